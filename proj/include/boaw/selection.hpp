#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boaw/decision_tree.hpp"
#include "boaw/feature_table.hpp"
#include "boaw/parallel.hpp"
#include "boaw/wilcoxon.hpp"

namespace boaw {

struct SelectionConfig {
  std::size_t repetitions = 100;
  double alpha = 0.05;
  std::size_t k = 25;
  ForestParams forest{100, TreeParams{0, 0, true}};
  std::uint64_t seed = 0;

  void validate(std::size_t feature_count) const {
    if (repetitions < 2) throw ArgumentError("selection needs at least two repetitions");
    if (!(alpha >= 0 && alpha < 1)) throw ArgumentError("alpha must lie in [0, 1)");
    if (k < 1 || k > feature_count)
      throw ArgumentError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(feature_count) + "]");
    if (forest.trees == 0) throw ArgumentError("selection forests need at least one tree");
  }
};

struct FeatureImportance {
  std::string name;
  double mean_importance = 0.0;  // percent
  std::vector<double> real;      // per repetition, percent
  std::vector<double> permuted;  // per repetition, percent
  double statistic = 0.0;
  double p_value = 1.0;
  bool selected = false;
  std::size_t rank = 0;  // 1 = highest mean importance
};

struct ImportanceReport {
  std::vector<FeatureImportance> features;  // input column order
  std::vector<std::string> selected;        // highest mean importance first
  std::size_t requested_k = 0;
  std::size_t shortfall = 0;
  double alpha = 0.05;
};

namespace detail {

inline void require_two_classes(std::span<const int> y) {
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw ArgumentError("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw ArgumentError("feature selection needs both classes in the labels");
}

inline Matrix importance_matrix(const Matrix& x, std::span<const int> y, const SelectionConfig& config, bool permute,
                                std::size_t workers) {
  if (x.rows() != y.size()) throw ArgumentError("row count and label count differ");
  require_two_classes(y);
  Matrix out(config.repetitions, x.cols());
  parallel_for(config.repetitions, workers, [&](std::size_t r) {
    std::vector<int> labels(y.begin(), y.end());
    std::uint64_t forest_seed = derive_seed(config.seed, {1, r});
    if (permute) {
      Rng rng(derive_seed(config.seed, {2, r}));
      rng.shuffle(std::span<int>(labels));
      forest_seed = derive_seed(config.seed, {3, r});
    }
    const auto forest = RandomForest::fit(x, labels, config.forest, forest_seed);
    for (std::size_t f = 0; f < x.cols(); ++f) out(r, f) = 100.0 * forest.importances()[f];
  });
  return out;
}

}  // namespace detail

/// R x d matrix; row r holds the Gini importances (percent, summing to 100)
/// of the forest fitted in repetition r.
inline Matrix importance_distributions(const Matrix& x, std::span<const int> y, const SelectionConfig& config,
                                       std::size_t workers = 1) {
  return detail::importance_matrix(x, y, config, false, workers);
}

/// Same as importance_distributions with labels shuffled independently in
/// every repetition.
inline Matrix permuted_importance_distributions(const Matrix& x, std::span<const int> y, const SelectionConfig& config,
                                                std::size_t workers = 1) {
  return detail::importance_matrix(x, y, config, true, workers);
}

/// Per-feature signed-rank test of real against permuted importances (paired
/// by repetition) and selection of the k most important significant features.
inline ImportanceReport select_features(const std::vector<std::string>& names, const Matrix& real,
                                        const Matrix& permuted, const SelectionConfig& config) {
  const std::size_t d = names.size();
  if (real.cols() != d || permuted.cols() != d || real.rows() != permuted.rows())
    throw ArgumentError("importance matrices do not match the feature list");
  ImportanceReport report;
  report.requested_k = config.k;
  report.alpha = config.alpha;
  report.features.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& fi = report.features[f];
    fi.name = names[f];
    fi.real = real.column(f);
    fi.permuted = permuted.column(f);
    fi.mean_importance = std::accumulate(fi.real.begin(), fi.real.end(), 0.0) / static_cast<double>(fi.real.size());
    const auto w = wilcoxon_signed_rank(fi.real, fi.permuted);
    fi.statistic = w.statistic;
    fi.p_value = w.p_value;
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& fa = report.features[a];
    const auto& fb = report.features[b];
    if (fa.mean_importance != fb.mean_importance) return fa.mean_importance > fb.mean_importance;
    return fa.name < fb.name;
  });
  for (std::size_t pos = 0; pos < d; ++pos) {
    auto& fi = report.features[order[pos]];
    fi.rank = pos + 1;
    if (fi.p_value < config.alpha && report.selected.size() < config.k) {
      fi.selected = true;
      report.selected.push_back(fi.name);
    }
  }
  report.shortfall = config.k - std::min(config.k, report.selected.size());
  return report;
}

/// Full selection on a scaled, labeled segment table. Columns are processed in
/// name order internally so the outcome does not depend on column order.
inline ImportanceReport run_selection(const FeatureTable& table, const SelectionConfig& config, std::size_t workers = 1) {
  config.validate(table.width());
  std::vector<std::string> sorted_names = table.feature_names;
  std::sort(sorted_names.begin(), sorted_names.end());
  const FeatureTable canon = select_columns(table, sorted_names);
  const auto y = require_labels(canon);
  const Matrix real = importance_distributions(canon.values, y, config, workers);
  const Matrix perm = permuted_importance_distributions(canon.values, y, config, workers);
  ImportanceReport canon_report = select_features(sorted_names, real, perm, config);

  ImportanceReport report = canon_report;
  for (std::size_t f = 0; f < table.width(); ++f) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(sorted_names.begin(), sorted_names.end(), table.feature_names[f]) - sorted_names.begin());
    report.features[f] = canon_report.features[pos];
  }
  return report;
}

/// Ranked listing: rank, feature, mean importance in percent, p-value; selected
/// features are marked with '*'.
inline std::string format_importance_table(const ImportanceReport& report) {
  std::vector<const FeatureImportance*> ranked;
  for (const auto& f : report.features) ranked.push_back(&f);
  std::sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
  std::size_t width = 7;
  for (auto* f : ranked) width = std::max(width, f->name.size());
  std::ostringstream out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-5s %-*s %14s %10s\n", "Rank", static_cast<int>(width + 2), "Feature",
                "Importance (%)", "p");
  out << buf;
  for (auto* f : ranked) {
    const std::string name = (f->selected ? "*" : " ") + std::string(" ") + f->name;
    std::snprintf(buf, sizeof buf, "%-5zu %-*s %14.2f %10.3g\n", f->rank, static_cast<int>(width + 2), name.c_str(),
                  f->mean_importance, f->p_value);
    out << buf;
  }
  double selected_sum = 0.0;
  for (auto* f : ranked)
    if (f->selected) selected_sum += f->mean_importance;
  std::snprintf(buf, sizeof buf, "selected %zu of %zu requested (shortfall %zu); summed importance %.2f%%\n",
                report.selected.size(), report.requested_k, report.shortfall, selected_sum);
  out << buf;
  return out.str();
}

inline nlohmann::json to_json(const ImportanceReport& r) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : r.features) {
    feats.push_back({{"name", f.name},
                     {"mean_importance", f.mean_importance},
                     {"real", f.real},
                     {"permuted", f.permuted},
                     {"statistic", f.statistic},
                     {"p_value", f.p_value},
                     {"selected", f.selected},
                     {"rank", f.rank}});
  }
  return {{"features", feats},
          {"selected", r.selected},
          {"requested_k", r.requested_k},
          {"shortfall", r.shortfall},
          {"alpha", r.alpha}};
}

inline ImportanceReport importance_report_from_json(const nlohmann::json& j) {
  ImportanceReport r;
  for (const auto& fj : j.at("features")) {
    FeatureImportance f;
    f.name = fj.at("name").get<std::string>();
    f.mean_importance = fj.at("mean_importance").get<double>();
    f.real = fj.at("real").get<std::vector<double>>();
    f.permuted = fj.at("permuted").get<std::vector<double>>();
    f.statistic = fj.at("statistic").get<double>();
    f.p_value = fj.at("p_value").get<double>();
    f.selected = fj.at("selected").get<bool>();
    f.rank = fj.at("rank").get<std::size_t>();
    r.features.push_back(std::move(f));
  }
  r.selected = j.at("selected").get<std::vector<std::string>>();
  r.requested_k = j.at("requested_k").get<std::size_t>();
  r.shortfall = j.at("shortfall").get<std::size_t>();
  r.alpha = j.at("alpha").get<double>();
  return r;
}

}  // namespace boaw
