#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "boaw/classifiers/common.hpp"

namespace boaw::classifiers {

/// sum_b (a_b - b_b)^2 / (a_b + b_b), skipping bins where both are zero.
inline double chi2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("chi2 distance on histograms of different length");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0) throw ArgumentError("chi2 distance on a negative histogram entry");
    const double s = a[i] + b[i];
    if (s == 0.0) continue;
    const double diff = a[i] - b[i];
    d += diff * diff / s;
  }
  return d;
}

inline double chi2_kernel(std::span<const double> a, std::span<const double> b, double scale) {
  if (!(scale > 0)) throw ArgumentError("chi2 kernel scale must be positive");
  return std::exp(-chi2_distance(a, b) / scale);
}

/// Mean chi2 distance over unordered pairs i < j.
inline double chi2_mean_distance(const Matrix& x) {
  if (x.rows() < 2) throw ArgumentError("chi2 kernel scale needs at least two histograms");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) sum += chi2_distance(x.row(i), x.row(j));
  const double pairs = static_cast<double>(x.rows()) * static_cast<double>(x.rows() - 1) / 2.0;
  return sum / pairs;
}

inline Matrix chi2_gram(const Matrix& x, double scale) {
  Matrix k(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < x.rows(); ++j) k(i, j) = k(j, i) = chi2_kernel(x.row(i), x.row(j), scale);
  }
  return k;
}

struct Chi2SvmOptions {
  double c = 0.25;
  double eps = 1e-3;
};

/// C-SVC on a precomputed chi2 kernel, solved by SMO with second-order
/// working-set selection. f(x) = sum_i coef_i K(sv_i, x) - rho.
struct Chi2SvmModel {
  Matrix support;
  std::vector<double> coef;  // alpha_i * y_i
  double rho = 0.0;
  double scale = 1.0;
  std::size_t iterations = 0;

  static Chi2SvmModel fit(const Matrix& x, std::span<const int> y, const Chi2SvmOptions& opt = {}) {
    check_training_data(x, y);
    if (!(opt.c > 0)) throw ArgumentError("chi2 SVM cost must be positive");
    const double a = chi2_mean_distance(x);
    if (!(a > 0)) throw ArgumentError("chi2 kernel scale is zero: all training histograms are identical");
    const Matrix k = chi2_gram(x, a);
    const std::size_t n = x.rows();
    const double c = opt.c;
    constexpr double kTau = 1e-12;

    std::vector<double> s(n), alpha(n, 0.0), grad(n, -1.0);
    for (std::size_t i = 0; i < n; ++i) s[i] = y[i] == 1 ? 1.0 : -1.0;
    auto q = [&](std::size_t i, std::size_t j) { return s[i] * s[j] * k(i, j); };

    Chi2SvmModel m;
    m.scale = a;
    const std::size_t max_iter = std::max<std::size_t>(10000000, 100 * n);
    for (; m.iterations < max_iter; ++m.iterations) {
      double gmax = -std::numeric_limits<double>::infinity();
      std::ptrdiff_t pick_i = -1;
      for (std::size_t t = 0; t < n; ++t) {
        const bool up = s[t] > 0 ? alpha[t] < c : alpha[t] > 0;
        if (up && -s[t] * grad[t] >= gmax) {
          gmax = -s[t] * grad[t];
          pick_i = static_cast<std::ptrdiff_t>(t);
        }
      }
      double gmax2 = -std::numeric_limits<double>::infinity();
      std::ptrdiff_t pick_j = -1;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < n; ++t) {
        const bool low = s[t] > 0 ? alpha[t] > 0 : alpha[t] < c;
        if (!low) continue;
        const double yg = s[t] * grad[t];
        gmax2 = std::max(gmax2, yg);
        const double b = gmax + yg;
        if (pick_i < 0 || b <= 0) continue;
        const auto i = static_cast<std::size_t>(pick_i);
        double quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (quad <= 0) quad = kTau;
        const double obj = -b * b / quad;
        if (obj <= best) {
          best = obj;
          pick_j = static_cast<std::ptrdiff_t>(t);
        }
      }
      if (gmax + gmax2 < opt.eps || pick_j < 0) break;

      const auto i = static_cast<std::size_t>(pick_i), j = static_cast<std::size_t>(pick_j);
      const double old_i = alpha[i], old_j = alpha[j];
      if (s[i] != s[j]) {
        double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
        if (quad <= 0) quad = kTau;
        const double delta = (-grad[i] - grad[j]) / quad;
        const double diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if (diff > 0) {
          if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
        } else if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = -diff;
        }
        if (diff > 0) {
          if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
        } else if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = c + diff;
        }
      } else {
        double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
        if (quad <= 0) quad = kTau;
        const double delta = (grad[i] - grad[j]) / quad;
        const double sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if (sum > c) {
          if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
        } else if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = sum;
        }
        if (sum > c) {
          if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
        } else if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = sum;
        }
      }
      const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
      for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
    }
    if (m.iterations >= max_iter) throw ConvergenceError("chi2 SVM solver hit its iteration cap");

    double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double yg = s[t] * grad[t];
      if (alpha[t] >= c) {
        if (s[t] < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha[t] <= 0) {
        if (s[t] > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++free_count;
        free_sum += yg;
      }
    }
    m.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] <= 0) continue;
      m.support.append_row(x.row(t));
      m.coef.push_back(alpha[t] * s[t]);
    }
    return m;
  }

  double decision(std::span<const double> row) const {
    if (!support.empty()) check_width(row, support.cols());
    double f = -rho;
    for (std::size_t i = 0; i < support.rows(); ++i) f += coef[i] * chi2_kernel(support.row(i), row, scale);
    return f;
  }

  int predict(std::span<const double> row) const { return decision(row) > 0.0 ? 1 : 0; }

  nlohmann::json to_json() const {
    nlohmann::json sv = nlohmann::json::array();
    for (std::size_t i = 0; i < support.rows(); ++i)
      sv.push_back(std::vector<double>(support.row(i).begin(), support.row(i).end()));
    return {{"A", scale}, {"rho", rho}, {"coef", coef}, {"support", sv}, {"iterations", iterations}};
  }

  static Chi2SvmModel from_json(const nlohmann::json& j) {
    Chi2SvmModel m;
    m.scale = j.at("A").get<double>();
    m.rho = j.at("rho").get<double>();
    m.coef = j.at("coef").get<std::vector<double>>();
    for (const auto& r : j.at("support")) m.support.append_row(r.get<std::vector<double>>());
    m.iterations = j.at("iterations").get<std::size_t>();
    return m;
  }
};

}  // namespace boaw::classifiers
