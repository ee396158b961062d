#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "boaw/classifiers/common.hpp"

namespace boaw::classifiers {

/// Two-class linear discriminant with a pooled, ridge-regularized covariance.
///
/// delta_c(x) = x' S^-1 mu_c - mu_c' S^-1 mu_c / 2 + log(prior_c), where
/// S = pooled covariance + ridge * trace(pooled) / d * I. Ties go to class 0.
struct LdaModel {
  std::vector<double> weights[2];
  double bias[2] = {0.0, 0.0};
  std::vector<double> means[2];
  double priors[2] = {0.5, 0.5};

  static LdaModel fit(const Matrix& x, std::span<const int> y, double ridge = 1e-6, bool equal_priors = false) {
    check_training_data(x, y);
    const std::size_t n = x.rows(), d = x.cols();
    Eigen::VectorXd mu[2] = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
    double count[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      mu[y[i]] += Eigen::Map<const Eigen::VectorXd>(x.row(i).data(), d);
      count[y[i]] += 1;
    }
    for (int c = 0; c < 2; ++c) mu[c] /= count[c];

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(x.row(i).data(), d) - mu[y[i]];
      cov.noalias() += r * r.transpose();
    }
    cov /= n > 2 ? static_cast<double>(n - 2) : static_cast<double>(n);
    const double tr = cov.trace();
    const double eps = tr > 0 ? ridge * tr / static_cast<double>(d) : ridge;
    cov.diagonal().array() += eps;
    const Eigen::LDLT<Eigen::MatrixXd> solver(cov);

    LdaModel m;
    for (int c = 0; c < 2; ++c) {
      m.priors[c] = equal_priors ? 0.5 : count[c] / static_cast<double>(n);
      const Eigen::VectorXd w = solver.solve(mu[c]);
      m.weights[c].assign(w.data(), w.data() + d);
      m.means[c].assign(mu[c].data(), mu[c].data() + d);
      m.bias[c] = -0.5 * mu[c].dot(w) + std::log(m.priors[c]);
    }
    return m;
  }

  double discriminant(std::span<const double> row, int c) const {
    double s = bias[c];
    for (std::size_t j = 0; j < row.size(); ++j) s += weights[c][j] * row[j];
    return s;
  }

  int predict(std::span<const double> row) const {
    check_width(row, weights[0].size());
    return discriminant(row, 1) > discriminant(row, 0) ? 1 : 0;
  }

  nlohmann::json to_json() const {
    return {{"weights", {weights[0], weights[1]}},
            {"bias", {bias[0], bias[1]}},
            {"means", {means[0], means[1]}},
            {"priors", {priors[0], priors[1]}}};
  }

  static LdaModel from_json(const nlohmann::json& j) {
    LdaModel m;
    for (int c = 0; c < 2; ++c) {
      m.weights[c] = j.at("weights")[c].get<std::vector<double>>();
      m.bias[c] = j.at("bias")[c].get<double>();
      m.means[c] = j.at("means")[c].get<std::vector<double>>();
      m.priors[c] = j.at("priors")[c].get<double>();
    }
    return m;
  }
};

}  // namespace boaw::classifiers
