#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "boaw/error.hpp"
#include "boaw/matrix.hpp"
#include "boaw/parallel.hpp"
#include "boaw/random.hpp"

namespace boaw {

struct SpatialMedianOptions {
  double tol = 1e-9;
  std::size_t max_iter = 200;
};

struct SpatialMedianResult {
  std::vector<double> point;
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Sum of Euclidean distances from the selected rows to c.
inline double sum_of_distances(const Matrix& x, std::span<const std::size_t> rows, std::span<const double> c) {
  double s = 0.0;
  for (auto r : rows) s += euclidean_distance(x.row(r), c);
  return s;
}

namespace detail {

inline std::vector<double> coordinate_median(const Matrix& x, std::span<const std::size_t> rows) {
  std::vector<double> out(x.cols());
  std::vector<double> col(rows.size());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = x(rows[i], c);
    std::sort(col.begin(), col.end());
    const std::size_t m = col.size() / 2;
    out[c] = col.size() % 2 ? col[m] : 0.5 * (col[m - 1] + col[m]);
  }
  return out;
}

inline std::vector<std::size_t> all_rows(const Matrix& x) {
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace detail

/// Geometric median of the selected rows by the modified Weiszfeld iteration.
///
/// When the iterate sits on data points (within 1e-12) those points are left
/// out of the weighted average and the step is damped along the remaining
/// descent direction; if that direction is no stronger than the coincident
/// multiplicity the iterate is already optimal. Stops when the step is below
/// `tol` or after `max_iter` steps. Never returns a worse point than `start`.
inline SpatialMedianResult spatial_median(const Matrix& x, std::span<const std::size_t> rows,
                                          std::span<const double> start, const SpatialMedianOptions& opts = {}) {
  if (rows.empty()) throw ArgumentError("spatial median of an empty set");
  const std::size_t d = x.cols();
  std::vector<double> c(start.begin(), start.end());
  std::vector<double> num(d), resid(d), next(d);
  SpatialMedianResult res;
  for (; res.iterations < opts.max_iter; ++res.iterations) {
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(resid.begin(), resid.end(), 0.0);
    double den = 0.0, coincident = 0.0;
    for (auto r : rows) {
      const auto p = x.row(r);
      const double dist = euclidean_distance(p, c);
      if (dist < 1e-12) {
        coincident += 1.0;
        continue;
      }
      const double w = 1.0 / dist;
      den += w;
      for (std::size_t j = 0; j < d; ++j) {
        num[j] += w * p[j];
        resid[j] += w * (p[j] - c[j]);
      }
    }
    if (den == 0.0) break;
    double gamma = 0.0;
    if (coincident > 0.0) {
      double rnorm = 0.0;
      for (double v : resid) rnorm += v * v;
      rnorm = std::sqrt(rnorm);
      if (rnorm <= coincident) break;
      gamma = coincident / rnorm;
    }
    double step = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      next[j] = (1.0 - gamma) * (num[j] / den) + gamma * c[j];
      step += (next[j] - c[j]) * (next[j] - c[j]);
    }
    c.swap(next);
    if (std::sqrt(step) < opts.tol) {
      ++res.iterations;
      break;
    }
  }
  const double start_obj = sum_of_distances(x, rows, start);
  res.objective = sum_of_distances(x, rows, c);
  if (res.objective > start_obj) {
    c.assign(start.begin(), start.end());
    res.objective = start_obj;
  }
  res.point = std::move(c);
  return res;
}

/// Geometric median of all rows, started from the coordinate-wise median.
inline SpatialMedianResult spatial_median(const Matrix& points, const SpatialMedianOptions& opts = {}) {
  const auto rows = detail::all_rows(points);
  const auto start = detail::coordinate_median(points, rows);
  return spatial_median(points, rows, start, opts);
}

/// Number of distinct rows among the selection.
inline std::size_t count_distinct_rows(const Matrix& x, std::span<const std::size_t> rows) {
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (less(idx[i - 1], idx[i])) ++distinct;
  return distinct;
}

/// K-means++ seeding: first center uniform, each further center drawn with
/// probability proportional to the squared distance to its nearest chosen
/// center. Returns the chosen row positions (indices into `rows`).
inline std::vector<std::size_t> kmeanspp_init(const Matrix& x, std::span<const std::size_t> rows, std::size_t k,
                                              Rng& rng) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (k > count_distinct_rows(x, rows))
    throw ArgumentError("k = " + std::to_string(k) + " exceeds the number of distinct points");
  const std::size_t n = rows.size();
  std::vector<std::size_t> chosen;
  chosen.push_back(rng.index(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(rows[i]), x.row(rows[chosen[0]]));
  while (chosen.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (u < acc) break;
    }
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(rows[i]), x.row(rows[pick])));
  }
  return chosen;
}

inline Matrix kmeanspp_init(const Matrix& x, std::size_t k, Rng& rng) {
  const auto rows = detail::all_rows(x);
  const auto picked = kmeanspp_init(x, rows, k, rng);
  return x.select_rows(picked);
}

struct ClusterOptions {
  std::size_t max_iterations = 300;
  SpatialMedianOptions median;
};

struct ClusterRun {
  std::vector<std::size_t> assignments;  // per point, cluster index
  Matrix prototypes;                     // k x d
  double error = 0.0;                    // J: summed Euclidean distance to assigned prototypes
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> error_history;  // J after seeding and after every iteration
  std::size_t restart = 0;
};

/// Index of the nearest row of `prototypes`; ties go to the lowest index.
inline std::size_t nearest_prototype(const Matrix& prototypes, std::span<const double> v, double* dist2 = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < prototypes.rows(); ++p) {
    const double d = squared_distance(prototypes.row(p), v);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

namespace detail {

inline double cluster_error(const Matrix& x, std::span<const std::size_t> rows, const Matrix& protos,
                            const std::vector<std::size_t>& assign) {
  std::vector<double> per(protos.rows(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) per[assign[i]] += euclidean_distance(x.row(rows[i]), protos.row(assign[i]));
  return std::accumulate(per.begin(), per.end(), 0.0);
}

/// Nearest-prototype assignment followed by farthest-point repair of empty
/// clusters. Returns true when any assignment changed.
inline bool assign_points(const Matrix& x, std::span<const std::size_t> rows, Matrix& protos,
                          std::vector<std::size_t>& assign) {
  const std::size_t n = rows.size(), k = protos.rows();
  bool changed = false;
  std::vector<double> dist(n);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double d2;
    const std::size_t a = nearest_prototype(protos, x.row(rows[i]), &d2);
    if (a != assign[i]) changed = true;
    assign[i] = a;
    dist[i] = d2;
    ++sizes[a];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    std::size_t far = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (sizes[assign[i]] < 2) continue;
      if (far == n || dist[i] > dist[far]) far = i;
    }
    if (far == n) throw ArgumentError("cannot repair an empty cluster: too few points");
    --sizes[assign[far]];
    assign[far] = c;
    ++sizes[c];
    dist[far] = 0.0;
    const auto src = x.row(rows[far]);
    std::copy(src.begin(), src.end(), protos.row(c).begin());
    changed = true;
  }
  return changed;
}

inline ClusterRun cluster_once(const Matrix& x, std::span<const std::size_t> rows, std::size_t k, Rng& rng,
                               const ClusterOptions& opts) {
  ClusterRun run;
  const auto seeds = kmeanspp_init(x, rows, k, rng);
  run.prototypes = Matrix(k, x.cols());
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = x.row(rows[seeds[c]]);
    std::copy(src.begin(), src.end(), run.prototypes.row(c).begin());
  }
  run.assignments.assign(rows.size(), k);  // k = unassigned sentinel
  assign_points(x, rows, run.prototypes, run.assignments);
  run.error_history.push_back(cluster_error(x, rows, run.prototypes, run.assignments));

  std::vector<std::vector<std::size_t>> members(k);
  for (run.iterations = 0; run.iterations < opts.max_iterations;) {
    for (auto& m : members) m.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) members[run.assignments[i]].push_back(rows[i]);
    for (std::size_t c = 0; c < k; ++c) {
      const std::vector<double> start(run.prototypes.row(c).begin(), run.prototypes.row(c).end());
      const auto med = spatial_median(x, members[c], start, opts.median);
      std::copy(med.point.begin(), med.point.end(), run.prototypes.row(c).begin());
    }
    ++run.iterations;
    const bool changed = assign_points(x, rows, run.prototypes, run.assignments);
    run.error_history.push_back(cluster_error(x, rows, run.prototypes, run.assignments));
    if (!changed) {
      run.converged = true;
      break;
    }
  }
  run.error = run.error_history.back();
  return run;
}

}  // namespace detail

/// Replicated K-spatial-medians clustering of the selected rows.
///
/// Each restart seeds with K-means++ from its own stream
/// derive_seed(seed, {restart}), then alternates nearest-prototype assignment
/// with spatial-median updates until no point changes cluster. The restart
/// with the smallest J wins (lowest restart index on ties).
inline ClusterRun k_spatial_medians(const Matrix& x, std::span<const std::size_t> rows, std::size_t k,
                                    std::size_t restarts, std::uint64_t seed, const ClusterOptions& opts = {},
                                    std::size_t workers = 1) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (restarts < 1) throw ArgumentError("restarts must be at least 1");
  std::vector<ClusterRun> runs(restarts);
  parallel_for(restarts, workers, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {r}));
    runs[r] = detail::cluster_once(x, rows, k, rng, opts);
    runs[r].restart = r;
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].error < runs[best].error) best = r;
  return std::move(runs[best]);
}

inline ClusterRun k_spatial_medians(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed,
                                    const ClusterOptions& opts = {}, std::size_t workers = 1) {
  const auto rows = detail::all_rows(x);
  return k_spatial_medians(x, rows, k, restarts, seed, opts, workers);
}

}  // namespace boaw
