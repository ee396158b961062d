#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "boaw/classifiers/common.hpp"

namespace boaw::classifiers {

/// k-nearest-neighbour vote in Euclidean distance.
///
/// Neighbours are ordered by (distance, training index). A tied vote goes to
/// the class whose neighbours have the smaller distance sum, then to class 0.
struct KnnModel {
  Matrix x;
  std::vector<int> y;
  std::size_t k = 5;

  static KnnModel fit(const Matrix& x, std::span<const int> y, std::size_t k = 5) {
    check_training_data(x, y);
    if (k == 0) throw ArgumentError("knn needs k >= 1");
    return {x, std::vector<int>(y.begin(), y.end()), k};
  }

  int predict(std::span<const double> row) const {
    check_width(row, x.cols());
    std::vector<std::pair<double, std::size_t>> d(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) d[i] = {euclidean_distance(x.row(i), row), i};
    const std::size_t m = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
    std::size_t votes[2] = {0, 0};
    double dist_sum[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < m; ++i) {
      const int label = y[d[i].second];
      ++votes[label];
      dist_sum[label] += d[i].first;
    }
    if (votes[0] != votes[1]) return votes[1] > votes[0] ? 1 : 0;
    return dist_sum[1] < dist_sum[0] ? 1 : 0;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < x.rows(); ++i) rows.push_back(std::vector<double>(x.row(i).begin(), x.row(i).end()));
    return {{"k", k}, {"x", rows}, {"y", y}};
  }

  static KnnModel from_json(const nlohmann::json& j) {
    KnnModel m;
    m.k = j.at("k").get<std::size_t>();
    for (const auto& r : j.at("x")) m.x.append_row(r.get<std::vector<double>>());
    m.y = j.at("y").get<std::vector<int>>();
    return m;
  }
};

}  // namespace boaw::classifiers
