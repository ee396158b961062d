#pragma once

// Reference implementations shared by the unit suite and the acceptance
// binary. Each is written from the stated rules, without calling the code it
// checks, and favours brute force over speed.

#include <algorithm>
#include <array>
#include <utility>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "boaw/matrix.hpp"
#include "boaw/random.hpp"
#include "boaw/wav.hpp"

namespace boaw::oracle {

// --- Gini ------------------------------------------------------------------

/// Two-class Gini impurity by enumerating every ordered pair of draws:
/// the fraction of pairs with different labels. Returned as an exact ratio.
struct Ratio {
  long long num = 0;
  long long den = 1;
};

inline Ratio gini_by_pairs(long long a, long long b) {
  const long long n = a + b;
  long long differ = 0;
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j) differ += (i < a) != (j < a) ? 1 : 0;
  return {differ, n * n};
}

// --- Wilcoxon ----------------------------------------------------------------

/// Two-sided signed-rank p-value by listing all 2^n sign assignments of the
/// given ranks (ranks doubled so mid-ranks stay integral).
inline double signed_rank_p_enumerated(const std::vector<long long>& ranks2, long long observed_min2) {
  const std::size_t n = ranks2.size();
  long long total = 0;
  for (auto r : ranks2) total += r;
  std::uint64_t extreme = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    long long plus = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) plus += ranks2[i];
    if (std::min(plus, total - plus) <= observed_min2) ++extreme;
  }
  return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(patterns));
}

/// Doubled mid-ranks of |d| by counting, O(n^2).
inline std::vector<long long> doubled_ranks(const std::vector<double>& abs_d) {
  std::vector<long long> out(abs_d.size());
  for (std::size_t i = 0; i < abs_d.size(); ++i) {
    long long below = 0, equal = 0;
    for (double v : abs_d) {
      below += v < abs_d[i] ? 1 : 0;
      equal += v == abs_d[i] ? 1 : 0;
    }
    out[i] = 2 * below + equal + 1;  // 2 * (below + (equal + 1) / 2)
  }
  return out;
}

struct SignedRank {
  double w_plus = 0, w_minus = 0, p = 1.0;
};

inline SignedRank signed_rank_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> abs_d;
  std::vector<bool> pos;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0) continue;
    abs_d.push_back(std::fabs(d));
    pos.push_back(d > 0);
  }
  SignedRank out;
  if (abs_d.empty()) return out;
  const auto r2 = doubled_ranks(abs_d);
  long long p2 = 0, m2 = 0;
  for (std::size_t i = 0; i < r2.size(); ++i) (pos[i] ? p2 : m2) += r2[i];
  out.w_plus = static_cast<double>(p2) / 2;
  out.w_minus = static_cast<double>(m2) / 2;
  out.p = signed_rank_p_enumerated(r2, std::min(p2, m2));
  return out;
}

// --- scaling -----------------------------------------------------------------

/// One feature's outcome of the outlier-reconciliation loop.
struct ScalingTrace {
  double gain = 0, offset = 0;
  bool degenerate = false, adjusted = false, capped = false;
  double beta = 0;
  bool low_side = false, high_side = false;
  double low_cut = 0, low_value = 0, high_cut = 0, high_value = 0;
};

inline void minmax_coefficients(const std::vector<double>& v, ScalingTrace& t) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  t.degenerate = lo == hi;
  t.gain = t.degenerate ? 0.0 : 1.0 / (hi - lo);
  t.offset = t.degenerate ? 0.0 : lo / (lo - hi);
}

inline double linear_percentile(std::vector<double> v, double percent) {
  std::sort(v.begin(), v.end());
  const double pos = percent / 100.0 * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

/// Simulates the procedure literally:
///  1. fit min-max on train;
///  2. map the test values with those coefficients;
///  3. accept when all mapped test values lie in [-lambda, 1 + lambda];
///  4. otherwise, for beta = step, 2 step, ...: pool train and test, replace
///     values beyond the beta / (100 - beta) percentiles on every side that
///     has fallen outside the band so far by the nearest kept pooled value,
///     refit on the replaced train values and re-check the replaced test
///     values; stop when they fit or beta reaches the cap.
inline ScalingTrace simulate_reconciliation(const std::vector<double>& train, const std::vector<double>& test,
                                            double lambda, double step, double cap) {
  ScalingTrace t;
  minmax_coefficients(train, t);
  auto out_low = [&](const std::vector<double>& v) {
    for (double x : v)
      if (t.gain * x + t.offset < -lambda) return true;
    return false;
  };
  auto out_high = [&](const std::vector<double>& v) {
    for (double x : v)
      if (t.gain * x + t.offset > 1.0 + lambda) return true;
    return false;
  };
  bool low = out_low(test), high = out_high(test);
  if (!low && !high) return t;

  std::vector<double> pooled = train;
  pooled.insert(pooled.end(), test.begin(), test.end());
  bool sticky_low = low, sticky_high = high;
  for (int k = 1;; ++k) {
    const double beta = k * step;
    const double lo_cut = linear_percentile(pooled, beta);
    const double hi_cut = linear_percentile(pooled, 100.0 - beta);
    double lo_keep = std::numeric_limits<double>::infinity();
    double hi_keep = -std::numeric_limits<double>::infinity();
    for (double x : pooled) {
      if (x >= lo_cut) lo_keep = std::min(lo_keep, x);
      if (x <= hi_cut) hi_keep = std::max(hi_keep, x);
    }
    auto replace = [&](double x) {
      if (sticky_low && x < lo_cut) return lo_keep;
      if (sticky_high && x > hi_cut) return hi_keep;
      return x;
    };
    std::vector<double> tr, te;
    for (double x : train) tr.push_back(replace(x));
    for (double x : test) te.push_back(replace(x));
    minmax_coefficients(tr, t);
    t.adjusted = true;
    t.beta = beta;
    t.low_side = sticky_low;
    t.high_side = sticky_high;
    t.low_cut = lo_cut;
    t.low_value = lo_keep;
    t.high_cut = hi_cut;
    t.high_value = hi_keep;
    low = out_low(te);
    high = out_high(te);
    const bool at_cap = beta >= cap - 1e-12;
    if ((!low && !high) || at_cap) {
      t.capped = low || high;
      return t;
    }
    sticky_low = sticky_low || low;
    sticky_high = sticky_high || high;
  }
}

/// Randomized fixture: a train column, a test column, and optionally injected
/// tail outliers on one or both sides of either split.
struct ScalingFixture {
  std::vector<double> train, test;
};

inline ScalingFixture scaling_fixture(std::uint64_t seed) {
  Rng rng(seed);
  ScalingFixture f;
  const double centre = rng.uniform(-50, 50), spread = rng.uniform(0.1, 20);
  const auto n_train = static_cast<std::size_t>(rng.integer(5, 120));
  const auto n_test = static_cast<std::size_t>(rng.integer(2, 60));
  for (std::size_t i = 0; i < n_train; ++i) f.train.push_back(centre + spread * rng.normal());
  for (std::size_t i = 0; i < n_test; ++i) f.test.push_back(centre + spread * rng.normal());
  const auto kind = rng.index(5);
  const double kick = spread * rng.uniform(3, 40);
  if (kind == 1 || kind == 3) f.test[rng.index(n_test)] = centre + kick;
  if (kind == 2 || kind == 3) f.test[rng.index(n_test)] = centre - kick;
  if (kind == 4) {
    f.train[rng.index(n_train)] = centre + kick;
    f.test[rng.index(n_test)] = centre - 2 * kick;
  }
  if (rng.index(10) == 0) std::fill(f.train.begin(), f.train.end(), centre);  // degenerate train column
  return f;
}

// --- spatial median ----------------------------------------------------------

inline double sum_dist(const std::vector<std::array<double, 2>>& pts, double x, double y) {
  double s = 0;
  for (const auto& p : pts) s += std::hypot(p[0] - x, p[1] - y);
  return s;
}

/// Minimum of the summed distance by a dense grid over the bounding box,
/// then a shrinking-window refinement around the best point.
inline double grid_median_objective(const std::vector<std::array<double, 2>>& pts) {
  double x0 = pts[0][0], x1 = x0, y0 = pts[0][1], y1 = y0;
  for (const auto& p : pts) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  double bx = x0, by = y0, best = std::numeric_limits<double>::infinity();
  const int coarse = 200;
  for (int i = 0; i <= coarse; ++i) {
    for (int j = 0; j <= coarse; ++j) {
      const double x = x0 + (x1 - x0) * i / coarse, y = y0 + (y1 - y0) * j / coarse;
      const double v = sum_dist(pts, x, y);
      if (v < best) {
        best = v;
        bx = x;
        by = y;
      }
    }
  }
  // Pattern search on a 21x21 stencil: recentre while it improves, halve the
  // window once it stops.
  double hx = (x1 - x0) / coarse, hy = (y1 - y0) / coarse;
  for (int round = 0; round < 2000 && (hx > 1e-13 || hy > 1e-13); ++round) {
    const double cx = bx, cy = by, before = best;
    for (int i = -10; i <= 10; ++i) {
      for (int j = -10; j <= 10; ++j) {
        const double x = cx + hx * i / 10.0, y = cy + hy * j / 10.0;
        const double v = sum_dist(pts, x, y);
        if (v < best) {
          best = v;
          bx = x;
          by = y;
        }
      }
    }
    if (best == before) {
      hx /= 2;
      hy /= 2;
    }
  }
  return best;
}

// --- segmenter ---------------------------------------------------------------

/// 16 kHz buffer with `level_db` (raw-amplitude RMS) sine bursts at the given
/// [start, end) second spans, silence elsewhere.
inline AudioBuffer tone_buffer(double total_s, const std::vector<std::pair<double, double>>& spans,
                               double level_db = 75.0) {
  AudioBuffer b;
  b.sample_rate = 16000;
  const auto n = static_cast<std::size_t>(std::llround(total_s * b.sample_rate));
  b.samples.assign(n, 0.0);
  const double amp = std::sqrt(2.0) * std::pow(10.0, level_db / 20.0);
  for (const auto& [s, e] : spans) {
    const auto i0 = static_cast<std::size_t>(std::llround(s * b.sample_rate));
    const auto i1 = static_cast<std::size_t>(std::llround(e * b.sample_rate));
    for (std::size_t i = i0; i < i1 && i < n; ++i)
      b.samples[i] = std::round(amp * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0));
  }
  return b;
}

struct RuleSegment {
  double start, end, pause;
};

/// Frame-label oracle: mark loud frames, fill silent gaps of at most
/// max_pause between loud frames, cut runs into max_segment pieces and drop
/// pieces shorter than min_speech. Frame = 10 ms at 16 kHz.
inline std::vector<RuleSegment> rule_segments(const AudioBuffer& b, double threshold_db, double min_speech,
                                              double max_pause, double max_segment) {
  const std::size_t len = 160;
  const std::size_t frames = b.samples.size() / len;
  std::vector<int> loud(frames, 0);
  for (std::size_t f = 0; f < frames; ++f) {
    double e = 0;
    for (std::size_t i = 0; i < len; ++i) e += b.samples[f * len + i] * b.samples[f * len + i];
    e /= static_cast<double>(len);
    loud[f] = e > 0 && 10 * std::log10(e) >= threshold_db;
  }
  const auto gap_max = static_cast<std::size_t>(std::floor(max_pause / 0.01 + 1e-9));
  std::vector<int> speech = loud;
  std::size_t last_loud = frames;  // none yet
  for (std::size_t f = 0; f < frames; ++f) {
    if (!loud[f]) continue;
    if (last_loud != frames && f - last_loud - 1 <= gap_max)
      for (std::size_t g = last_loud + 1; g < f; ++g) speech[g] = 1;
    last_loud = f;
  }
  const auto min_frames = static_cast<std::size_t>(std::ceil(min_speech / 0.01 - 1e-9));
  const auto max_frames = static_cast<std::size_t>(std::floor(max_segment / 0.01 + 1e-9));
  std::vector<RuleSegment> out;
  double prev_end = 0;
  for (std::size_t f = 0; f < frames;) {
    if (!speech[f]) {
      ++f;
      continue;
    }
    std::size_t g = f;
    while (g < frames && speech[g]) ++g;
    if (g - f >= min_frames) {
      for (std::size_t p = f; p < g; p += max_frames) {
        const std::size_t q = std::min(g, p + max_frames);
        if (q - p < min_frames) continue;
        const double s = static_cast<double>(p * len) / 16000.0, e = static_cast<double>(q * len) / 16000.0;
        out.push_back({s, e, s - prev_end});
        prev_end = e;
      }
    }
    f = g;
  }
  return out;
}

}  // namespace boaw::oracle
