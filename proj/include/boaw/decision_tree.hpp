#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "boaw/error.hpp"
#include "boaw/matrix.hpp"
#include "boaw/random.hpp"

namespace boaw {

/// Gini impurity 1 - sum p_i^2 of a node with the given class counts.
/// Integer counts are combined exactly, (n^2 - sum c_i^2) / n^2, so the
/// result is the correctly rounded ratio.
template <typename Range>
double gini_impurity(const Range& class_counts) {
  using T = std::decay_t<decltype(*std::begin(class_counts))>;
  for (auto c : class_counts)
    if (c < 0) throw ArgumentError("class counts must be nonnegative");
  if constexpr (std::is_integral_v<T>) {
    long long n = 0, sq = 0;
    for (auto c : class_counts) {
      n += c;
      sq += static_cast<long long>(c) * static_cast<long long>(c);
    }
    if (n <= 0) throw ArgumentError("gini impurity of an empty node");
    return static_cast<double>(n * n - sq) / static_cast<double>(n * n);
  } else {
    double total = 0.0;
    for (auto c : class_counts) total += static_cast<double>(c);
    if (total <= 0.0) throw ArgumentError("gini impurity of an empty node");
    double sum_sq = 0.0;
    for (auto c : class_counts) {
      const double p = static_cast<double>(c) / total;
      sum_sq += p * p;
    }
    return 1.0 - sum_sq;
  }
}

inline double gini_impurity(std::initializer_list<long long> class_counts) {
  return gini_impurity<std::initializer_list<long long>>(class_counts);
}

struct TreeParams {
  std::size_t max_leaves = 0;    // 0 = grow until pure
  std::size_t max_features = 0;  // features inspected per split; 0 = ceil(sqrt(d))
  bool bootstrap = true;

  std::size_t features_per_split(std::size_t d) const {
    if (max_features > 0) return std::min(max_features, d);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
  }
};

/// Binary CART tree grown best-first on weighted Gini impurity.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight0 = 0.0;
    double weight1 = 0.0;

    int majority() const { return weight1 > weight0 ? 1 : 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  /// Fits on rows with positive weight. `importance` (size d) receives the
  /// weighted impurity decrease of every split, unnormalized.
  static DecisionTree fit(const Matrix& x, std::span<const int> y, std::span<const double> weights,
                          const TreeParams& params, Rng& rng, std::span<double> importance) {
    DecisionTree tree;
    Builder b{x, y, weights, params, rng, importance, tree.nodes_};
    b.grow();
    return tree;
  }

  int predict(std::span<const double> row) const {
    int n = 0;
    while (nodes_[n].feature >= 0) {
      const auto& node = nodes_[n];
      n = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes_[n].majority();
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
  }

  const std::vector<Node>& nodes() const { return nodes_; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : nodes_) arr.push_back({n.feature, n.threshold, n.left, n.right, n.weight0, n.weight1});
    return arr;
  }

  static DecisionTree from_json(const nlohmann::json& j) {
    DecisionTree t;
    for (const auto& a : j)
      t.nodes_.push_back({a[0].get<int>(), a[1].get<double>(), a[2].get<int>(), a[3].get<int>(), a[4].get<double>(),
                          a[5].get<double>()});
    if (t.nodes_.empty()) throw FormatError("decision tree without nodes");
    return t;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  struct Split {
    bool valid = false;
    int feature = -1;
    double threshold = 0.0;
    double improvement = 0.0;  // weighted impurity decrease
  };

  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    Split split;
    std::size_t order;
  };

  struct Builder {
    const Matrix& x;
    std::span<const int> y;
    std::span<const double> w;
    const TreeParams& params;
    Rng& rng;
    std::span<double> importance;
    std::vector<Node>& nodes;

    static double gini2(double w0, double w1) {
      const double t = w0 + w1;
      if (t <= 0) return 0.0;
      const double p = w1 / t;
      return 2.0 * p * (1.0 - p);
    }

    Split best_split(const std::vector<std::size_t>& rows, double w0, double w1) {
      Split best;
      const double total = w0 + w1;
      const double parent = gini2(w0, w1);
      if (parent <= 0.0 || rows.size() < 2) return best;

      const std::size_t d = x.cols();
      std::vector<std::size_t> features(d);
      std::iota(features.begin(), features.end(), 0);
      const std::size_t wanted = params.features_per_split(d);
      std::size_t inspected = 0;
      std::vector<std::pair<double, std::size_t>> sorted(rows.size());
      for (std::size_t k = 0; k < d && inspected < wanted; ++k) {
        // Partial Fisher-Yates: the k-th feature is drawn from the rest.
        const std::size_t pick = k + rng.index(d - k);
        std::swap(features[k], features[pick]);
        const std::size_t f = features[k];
        for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {x(rows[i], f), rows[i]};
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front().first == sorted.back().first) continue;  // constant here, does not count
        ++inspected;
        double l0 = 0.0, l1 = 0.0;
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
          const std::size_t r = sorted[i].second;
          (y[r] == 1 ? l1 : l0) += w[r];
          if (sorted[i].first == sorted[i + 1].first) continue;
          const double lw = l0 + l1, rw = total - lw;
          const double child = (lw * gini2(l0, l1) + rw * gini2(w0 - l0, w1 - l1)) / total;
          const double improvement = total * (parent - child);
          if (!best.valid || improvement > best.improvement) {
            double thr = 0.5 * (sorted[i].first + sorted[i + 1].first);
            if (thr >= sorted[i + 1].first) thr = sorted[i].first;
            best = {true, static_cast<int>(f), thr, improvement};
          }
        }
      }
      return best;
    }

    Pending make_node(std::vector<std::size_t> rows, std::size_t order) {
      Node n;
      for (auto r : rows) (y[r] == 1 ? n.weight1 : n.weight0) += w[r];
      nodes.push_back(n);
      const int id = static_cast<int>(nodes.size() - 1);
      Split s = best_split(rows, n.weight0, n.weight1);
      return {id, std::move(rows), s, order};
    }

    void grow() {
      std::vector<std::size_t> root_rows;
      for (std::size_t i = 0; i < x.rows(); ++i)
        if (w[i] > 0) root_rows.push_back(i);
      if (root_rows.empty()) throw ArgumentError("decision tree fit on zero-weight data");

      // Highest improvement first; creation order breaks ties.
      auto cmp = [](const Pending& a, const Pending& b) {
        if (a.split.improvement != b.split.improvement) return a.split.improvement < b.split.improvement;
        return a.order > b.order;
      };
      std::priority_queue<Pending, std::vector<Pending>, decltype(cmp)> open(cmp);
      std::size_t order = 0;
      std::size_t leaves = 1;
      auto root = make_node(std::move(root_rows), order++);
      if (root.split.valid) open.push(std::move(root));

      while (!open.empty() && (params.max_leaves == 0 || leaves < params.max_leaves)) {
        Pending p = std::move(const_cast<Pending&>(open.top()));
        open.pop();
        std::vector<std::size_t> left, right;
        for (auto r : p.rows) (x(r, p.split.feature) <= p.split.threshold ? left : right).push_back(r);
        auto l = make_node(std::move(left), order++);
        auto rr = make_node(std::move(right), order++);
        Node& n = nodes[p.node];
        n.feature = p.split.feature;
        n.threshold = p.split.threshold;
        n.left = l.node;
        n.right = rr.node;
        importance[p.split.feature] += p.split.improvement;
        ++leaves;
        if (l.split.valid) open.push(std::move(l));
        if (rr.split.valid) open.push(std::move(rr));
      }
    }
  };

  std::vector<Node> nodes_;
};

struct ForestParams {
  std::size_t trees = 100;
  TreeParams tree;
};

/// Bagged ensemble of DecisionTrees with mean-decrease-in-impurity importances.
class RandomForest {
 public:
  static RandomForest fit(const Matrix& x, std::span<const int> y, const ForestParams& params, std::uint64_t seed) {
    if (x.rows() != y.size()) throw ArgumentError("row count and label count differ");
    if (x.rows() == 0) throw ArgumentError("random forest fit on empty data");
    if (params.trees == 0) throw ArgumentError("random forest needs at least one tree");
    RandomForest forest;
    const std::size_t n = x.rows(), d = x.cols();
    forest.importances_.assign(d, 0.0);
    std::vector<double> weights(n), tree_imp(d);
    for (std::size_t t = 0; t < params.trees; ++t) {
      Rng rng(derive_seed(seed, {t}));
      if (params.tree.bootstrap) {
        std::fill(weights.begin(), weights.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) weights[rng.index(n)] += 1.0;
      } else {
        std::fill(weights.begin(), weights.end(), 1.0);
      }
      std::fill(tree_imp.begin(), tree_imp.end(), 0.0);
      forest.trees_.push_back(DecisionTree::fit(x, y, weights, params.tree, rng, tree_imp));
      const double s = std::accumulate(tree_imp.begin(), tree_imp.end(), 0.0);
      if (s > 0)
        for (std::size_t f = 0; f < d; ++f) forest.importances_[f] += tree_imp[f] / s;
    }
    const double total = std::accumulate(forest.importances_.begin(), forest.importances_.end(), 0.0);
    for (auto& v : forest.importances_) v = total > 0 ? v / total : 1.0 / static_cast<double>(d);
    return forest;
  }

  /// Majority vote over trees; an even split goes to class 0.
  int predict(std::span<const double> row) const {
    std::size_t ones = 0;
    for (const auto& t : trees_) ones += static_cast<std::size_t>(t.predict(row));
    return 2 * ones > trees_.size() ? 1 : 0;
  }

  /// Normalized importances (sum to 1). Uniform when no tree ever split.
  const std::vector<double>& importances() const { return importances_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  nlohmann::json to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"trees", trees}, {"importances", importances_}};
  }

  static RandomForest from_json(const nlohmann::json& j) {
    RandomForest f;
    for (const auto& t : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(t));
    f.importances_ = j.at("importances").get<std::vector<double>>();
    return f;
  }

  friend bool operator==(const RandomForest&, const RandomForest&) = default;

 private:
  std::vector<DecisionTree> trees_;
  std::vector<double> importances_;
};

}  // namespace boaw
