#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "boaw/classifiers/common.hpp"

namespace boaw::classifiers {

/// Euclidean distances from every row of `x` to every reference row.
inline Matrix distance_map(const Matrix& x, const Matrix& refs) {
  Matrix d(x.rows(), refs.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < refs.rows(); ++j) d(i, j) = euclidean_distance(x.row(i), refs.row(j));
  return d;
}

/// Distance-to-reference-points map followed by a ridge least-squares output
/// layer onto {-1,+1} one-hot targets. Every training point is a reference.
struct EmlmModel {
  Matrix refs;
  Matrix weights;  // refs x 2

  static EmlmModel fit(const Matrix& x, std::span<const int> y, double ridge = 1e-8) {
    check_training_data(x, y);
    const std::size_t n = x.rows();
    const Matrix d = distance_map(x, x);
    Eigen::MatrixXd dm(n, n), t(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) dm(i, j) = d(i, j);
      t(i, 0) = y[i] == 0 ? 1.0 : -1.0;
      t(i, 1) = -t(i, 0);
    }
    Eigen::MatrixXd gram = dm.transpose() * dm;
    gram.diagonal().array() += ridge;
    const Eigen::MatrixXd w = gram.ldlt().solve(dm.transpose() * t);

    EmlmModel m;
    m.refs = x;
    m.weights = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      m.weights(i, 0) = w(i, 0);
      m.weights(i, 1) = w(i, 1);
    }
    return m;
  }

  std::array<double, 2> output(std::span<const double> row) const {
    check_width(row, refs.cols());
    std::array<double, 2> o{0.0, 0.0};
    for (std::size_t j = 0; j < refs.rows(); ++j) {
      const double dist = euclidean_distance(refs.row(j), row);
      o[0] += dist * weights(j, 0);
      o[1] += dist * weights(j, 1);
    }
    return o;
  }

  int predict(std::span<const double> row) const {
    const auto o = output(row);
    return o[1] > o[0] ? 1 : 0;
  }

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array(), w = nlohmann::json::array();
    for (std::size_t i = 0; i < refs.rows(); ++i) {
      r.push_back(std::vector<double>(refs.row(i).begin(), refs.row(i).end()));
      w.push_back({weights(i, 0), weights(i, 1)});
    }
    return {{"refs", r}, {"weights", w}};
  }

  static EmlmModel from_json(const nlohmann::json& j) {
    EmlmModel m;
    for (const auto& r : j.at("refs")) m.refs.append_row(r.get<std::vector<double>>());
    for (const auto& w : j.at("weights")) m.weights.append_row(w.get<std::vector<double>>());
    return m;
  }
};

}  // namespace boaw::classifiers
