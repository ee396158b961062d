#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "boaw/classifiers/common.hpp"
#include "boaw/random.hpp"

namespace boaw::classifiers {

struct LinearSvmOptions {
  double c = 1.0;
  double tol = 1e-4;
  std::size_t max_epochs = 10000;
};

/// L1-hinge linear SVM trained by dual coordinate descent. The bias is an
/// extra weight on a constant 1 feature (and so is regularized too).
/// Class 1 maps to +1; a zero decision value predicts class 0.
struct LinearSvmModel {
  std::vector<double> w;  // d weights followed by the bias
  std::vector<double> alpha;
  std::size_t epochs = 0;
  bool converged = false;

  static LinearSvmModel fit(const Matrix& x, std::span<const int> y, const LinearSvmOptions& opt, std::uint64_t seed) {
    check_training_data(x, y);
    if (!(opt.c > 0)) throw ArgumentError("linear SVM cost must be positive");
    const std::size_t n = x.rows(), d = x.cols();
    LinearSvmModel m;
    m.w.assign(d + 1, 0.0);
    m.alpha.assign(n, 0.0);
    std::vector<double> qdiag(n), sign(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 1.0;  // constant feature
      for (double v : x.row(i)) s += v * v;
      qdiag[i] = s;
      sign[i] = y[i] == 1 ? 1.0 : -1.0;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (m.epochs = 0; m.epochs < opt.max_epochs;) {
      rng.shuffle(std::span<std::size_t>(order));
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (std::size_t i : order) {
        const auto row = x.row(i);
        double wx = m.w[d];
        for (std::size_t j = 0; j < d; ++j) wx += m.w[j] * row[j];
        const double g = sign[i] * wx - 1.0;
        double pg = g;
        if (m.alpha[i] <= 0.0) pg = std::min(g, 0.0);
        else if (m.alpha[i] >= opt.c) pg = std::max(g, 0.0);
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg == 0.0) continue;
        const double old = m.alpha[i];
        m.alpha[i] = std::clamp(old - g / qdiag[i], 0.0, opt.c);
        const double delta = (m.alpha[i] - old) * sign[i];
        for (std::size_t j = 0; j < d; ++j) m.w[j] += delta * row[j];
        m.w[d] += delta;
      }
      ++m.epochs;
      if (pg_max - pg_min < opt.tol) {
        m.converged = true;
        break;
      }
    }
    return m;
  }

  double decision(std::span<const double> row) const {
    check_width(row, w.size() - 1);
    double s = w.back();
    for (std::size_t j = 0; j + 1 < w.size(); ++j) s += w[j] * row[j];
    return s;
  }

  int predict(std::span<const double> row) const { return decision(row) > 0.0 ? 1 : 0; }

  /// 0.5 |w|^2 + C * sum hinge.
  double primal_objective(const Matrix& x, std::span<const int> y, double c) const {
    double obj = 0.0;
    for (double v : w) obj += 0.5 * v * v;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double margin = (y[i] == 1 ? 1.0 : -1.0) * decision(x.row(i));
      obj += c * std::max(0.0, 1.0 - margin);
    }
    return obj;
  }

  /// sum alpha - 0.5 |w|^2.
  double dual_objective() const {
    double obj = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    for (double v : w) obj -= 0.5 * v * v;
    return obj;
  }

  nlohmann::json to_json() const { return {{"w", w}, {"epochs", epochs}, {"converged", converged}}; }

  static LinearSvmModel from_json(const nlohmann::json& j) {
    LinearSvmModel m;
    m.w = j.at("w").get<std::vector<double>>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.converged = j.at("converged").get<bool>();
    return m;
  }
};

}  // namespace boaw::classifiers
