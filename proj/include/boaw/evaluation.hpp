#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boaw/classifiers/model.hpp"
#include "boaw/codebook.hpp"
#include "boaw/scaler.hpp"
#include "boaw/selection.hpp"

namespace boaw {

using classifiers::ClassifierKind;
using classifiers::ClassifierParams;

enum class Aggregation { kMode, kMinError, kBestOfBoth };

inline std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kMode: return "mode";
    case Aggregation::kMinError: return "min_error";
    case Aggregation::kBestOfBoth: return "best_of_both";
  }
  return "?";
}

inline Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mode") return Aggregation::kMode;
  if (s == "min_error") return Aggregation::kMinError;
  if (s == "best_of_both") return Aggregation::kBestOfBoth;
  throw ArgumentError("unknown aggregation '" + std::string(s) + "' (expected mode, min_error or best_of_both)");
}

/// What LOSO does to the segment table inside each fold before clustering.
enum class Preprocessing {
  kNone,            // table is already scaled and selected
  kPerFold,         // train-only scaling and a fresh selection per fold
  kFixedSelection,  // train-only scaling per fold, fixed feature list
};

inline std::string to_string(Preprocessing p) {
  switch (p) {
    case Preprocessing::kNone: return "none";
    case Preprocessing::kPerFold: return "per_fold";
    case Preprocessing::kFixedSelection: return "fixed_selection";
  }
  return "?";
}

inline Preprocessing preprocessing_from_string(std::string_view s) {
  if (s == "none") return Preprocessing::kNone;
  if (s == "per_fold") return Preprocessing::kPerFold;
  if (s == "fixed_selection") return Preprocessing::kFixedSelection;
  throw ArgumentError("unknown preprocessing '" + std::string(s) + "' (expected none, per_fold or fixed_selection)");
}

struct ExperimentConfig {
  std::vector<std::size_t> k_sweep{15};
  std::size_t repetitions = 100;
  std::size_t restarts = 100;
  std::vector<ClassifierKind> classifiers{classifiers::kAllClassifiers.begin(), classifiers::kAllClassifiers.end()};
  Aggregation aggregation = Aggregation::kMinError;
  ClassifierParams classifier_params;
  ClusterOptions cluster;
  bool duration_weighted = false;
  std::uint64_t seed = 0;

  // LOSO only.
  Preprocessing preprocessing = Preprocessing::kNone;
  ToleranceBand band;
  SelectionConfig selection;
  std::vector<std::string> fixed_features;
  bool pad_selection = false;  // top up a short per-fold selection by rank
  bool paper_fast = false;     // one codebook per repetition on all subjects (leaks)

  void validate() const {
    if (repetitions < 1) throw ArgumentError("repetitions must be at least 1");
    if (restarts < 1) throw ArgumentError("restarts must be at least 1");
    if (k_sweep.empty()) throw ArgumentError("k_per_class sweep is empty");
    for (auto k : k_sweep)
      if (k < 1) throw ArgumentError("k_per_class values must be at least 1");
    if (classifiers.empty()) throw ArgumentError("no classifiers requested");
    if (preprocessing == Preprocessing::kFixedSelection && fixed_features.empty())
      throw ArgumentError("fixed_selection needs a feature list");
    if (paper_fast && preprocessing != Preprocessing::kNone)
      throw ArgumentError("paper_fast clustering requires preprocessing 'none'");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.classifiers) kinds.push_back(classifiers::to_string(k));
  return {{"k_sweep", c.k_sweep},
          {"repetitions", c.repetitions},
          {"restarts", c.restarts},
          {"classifiers", kinds},
          {"aggregation", to_string(c.aggregation)},
          {"classifier_params", classifiers::to_json(c.classifier_params)},
          {"cluster_max_iterations", c.cluster.max_iterations},
          {"median_tol", c.cluster.median.tol},
          {"median_max_iter", c.cluster.median.max_iter},
          {"duration_weighted", c.duration_weighted},
          {"seed", c.seed},
          {"preprocessing", to_string(c.preprocessing)},
          {"band", {{"lambda", c.band.lambda}, {"beta_step", c.band.beta_step}, {"beta_max", c.band.beta_max}}},
          {"selection",
           {{"repetitions", c.selection.repetitions},
            {"alpha", c.selection.alpha},
            {"k", c.selection.k},
            {"trees", c.selection.forest.trees},
            {"max_leaves", c.selection.forest.tree.max_leaves}}},
          {"fixed_features", c.fixed_features},
          {"pad_selection", c.pad_selection},
          {"paper_fast", c.paper_fast}};
}

/// Matches / total.
inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("accuracy on vectors of different length");
  if (truth.empty()) throw ArgumentError("accuracy of an empty prediction");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Per-subject combination of repeated predictions.
///
/// labels[r][s] is repetition r's label for subject s and errors[r][s] the
/// clustering error J behind it. mode: majority label, ties broken by the
/// smallest-J repetition. min_error: the smallest-J repetition's label
/// (earliest repetition on equal J). best_of_both needs `truth` and returns
/// whichever of the two has higher accuracy (mode on a tie).
inline std::vector<int> aggregate(const std::vector<std::vector<int>>& labels,
                                  const std::vector<std::vector<double>>& errors, Aggregation mode,
                                  std::span<const int> truth = {}) {
  if (labels.empty()) throw ArgumentError("aggregate needs at least one repetition");
  if (errors.size() != labels.size()) throw ArgumentError("one error row per repetition is required");
  const std::size_t n = labels.front().size();
  for (std::size_t r = 0; r < labels.size(); ++r)
    if (labels[r].size() != n || errors[r].size() != n) throw ArgumentError("ragged repetition matrix");

  if (mode == Aggregation::kBestOfBoth) {
    if (truth.size() != n) throw ArgumentError("best_of_both aggregation needs the true labels");
    auto by_mode = aggregate(labels, errors, Aggregation::kMode);
    auto by_error = aggregate(labels, errors, Aggregation::kMinError);
    return accuracy(by_error, truth) > accuracy(by_mode, truth) ? by_error : by_mode;
  }
  std::vector<int> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < labels.size(); ++r)
      if (errors[r][s] < errors[best][s]) best = r;
    if (mode == Aggregation::kMinError) {
      out[s] = labels[best][s];
      continue;
    }
    std::size_t ones = 0;
    for (const auto& rep : labels) ones += rep[s] == 1 ? 1 : 0;
    const std::size_t zeros = labels.size() - ones;
    out[s] = ones > zeros ? 1 : zeros > ones ? 0 : labels[best][s];
  }
  return out;
}

/// Same, with one clustering error per repetition shared by all subjects.
inline std::vector<int> aggregate(const std::vector<std::vector<int>>& labels, std::span<const double> rep_errors,
                                  Aggregation mode, std::span<const int> truth = {}) {
  if (rep_errors.size() != labels.size()) throw ArgumentError("one error per repetition is required");
  std::vector<std::vector<double>> errors;
  for (std::size_t r = 0; r < labels.size(); ++r) errors.emplace_back(labels[r].size(), rep_errors[r]);
  return aggregate(labels, errors, mode, truth);
}

/// Rows reordered by (subject_id, segment_index) so results do not depend on
/// the input order of subjects.
inline FeatureTable canonical_order(const FeatureTable& table) {
  std::vector<std::size_t> idx(table.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = table.segments[a];
    const auto& sb = table.segments[b];
    if (sa.subject_id != sb.subject_id) return sa.subject_id < sb.subject_id;
    return sa.segment_index < sb.segment_index;
  });
  return select_rows(table, idx);
}

inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Predictions of every requested classifier for `test`, with all models fit
/// on `train` histograms over the given codebook. Classifier i draws from
/// derive_seed(seed, {i}).
inline std::vector<std::vector<int>> score_with_codebook(const Codebook& book, const FeatureTable& train,
                                                         const FeatureTable& test, const ExperimentConfig& cfg,
                                                         std::uint64_t seed) {
  const auto htrain = subject_histograms(train, book, cfg.duration_weighted);
  const auto htest = subject_histograms(test, book, cfg.duration_weighted);
  const Matrix xtr = histogram_matrix(htrain), xte = histogram_matrix(htest);
  const auto ytr = histogram_labels(htrain);
  std::vector<std::vector<int>> out;
  for (std::size_t c = 0; c < cfg.classifiers.size(); ++c) {
    const auto model = classifiers::train(cfg.classifiers[c], xtr, ytr, cfg.classifier_params, derive_seed(seed, {c}));
    out.push_back(classifiers::predict(model, xte));
  }
  return out;
}

struct HoldoutCell {
  ClassifierKind kind = ClassifierKind::kChi2Svm;
  std::size_t k = 0;
  std::vector<double> accuracies;            // per repetition
  double mean = 0.0;
  double sd = 0.0;                           // sample SD, 0 for one repetition
  std::vector<std::vector<int>> predictions; // [repetition][test subject]
};

struct HoldoutReport {
  ExperimentConfig config;
  std::vector<std::string> test_subjects;
  std::vector<int> truth;
  std::vector<std::vector<double>> codebook_errors;  // [k index][repetition]
  std::vector<HoldoutCell> cells;                    // k-major, classifier-minor

  const HoldoutCell& cell(ClassifierKind kind, std::size_t k) const {
    for (const auto& c : cells)
      if (c.kind == kind && c.k == k) return c;
    throw ArgumentError("report has no cell for " + classifiers::to_string(kind) + " at k=" + std::to_string(k));
  }
};

inline void check_disjoint(const FeatureTable& a, const FeatureTable& b) {
  std::set<std::string> ids;
  for (const auto& s : a.segments) ids.insert(s.subject_id);
  for (const auto& s : b.segments)
    if (ids.count(s.subject_id)) throw LeakageError("subject '" + s.subject_id + "' appears in both train and test");
}

/// Repeated holdout on a fixed split. Unit (k, repetition) draws from
/// derive_seed(seed, {k, rep}): the codebook from sub-stream 0 and the
/// classifiers from sub-stream 1.
inline HoldoutReport holdout_eval(const FeatureTable& train_in, const FeatureTable& test_in,
                                  const ExperimentConfig& cfg, std::size_t workers = 1) {
  cfg.validate();
  check_disjoint(train_in, test_in);
  if (train_in.feature_names != test_in.feature_names) throw SchemaError("train and test columns differ");
  const FeatureTable train = canonical_order(train_in), test = canonical_order(test_in);
  require_labels(train);
  require_labels(test);

  HoldoutReport rep;
  rep.config = cfg;
  for (const auto& s : group_subjects(test)) {
    rep.test_subjects.push_back(s.subject_id);
    rep.truth.push_back(s.label);
  }
  const std::size_t nk = cfg.k_sweep.size(), nr = cfg.repetitions;
  struct Unit {
    double error = 0.0;
    std::vector<std::vector<int>> predictions;
  };
  std::vector<Unit> units(nk * nr);
  parallel_for(units.size(), workers, [&](std::size_t u) {
    const std::size_t ki = u / nr, r = u % nr, k = cfg.k_sweep[ki];
    const std::uint64_t useed = derive_seed(cfg.seed, {k, r});
    const Codebook book = build_codebook(train, k, cfg.restarts, derive_seed(useed, {0}), cfg.cluster, 1);
    units[u].error = book.total_error();
    units[u].predictions = score_with_codebook(book, train, test, cfg, derive_seed(useed, {1}));
  });

  rep.codebook_errors.assign(nk, std::vector<double>(nr));
  for (std::size_t ki = 0; ki < nk; ++ki) {
    for (std::size_t r = 0; r < nr; ++r) rep.codebook_errors[ki][r] = units[ki * nr + r].error;
    for (std::size_t c = 0; c < cfg.classifiers.size(); ++c) {
      HoldoutCell cell;
      cell.kind = cfg.classifiers[c];
      cell.k = cfg.k_sweep[ki];
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& pred = units[ki * nr + r].predictions[c];
        cell.accuracies.push_back(accuracy(pred, rep.truth));
        cell.predictions.push_back(pred);
      }
      cell.mean = std::accumulate(cell.accuracies.begin(), cell.accuracies.end(), 0.0) / static_cast<double>(nr);
      cell.sd = sample_sd(cell.accuracies);
      rep.cells.push_back(std::move(cell));
    }
  }
  return rep;
}

/// One record per fitted stage inside a LOSO fold: which subjects' segments
/// the stage saw. Used to check that the held-out subject never leaks.
struct LineageEvent {
  std::string stage;  // scaling, selection, codebook, classifier
  std::size_t k = 0;
  std::size_t repetition = 0;
  std::size_t fold = 0;
  std::string held_out;
  std::vector<std::string> subjects;
};

using LineageObserver = std::function<void(const LineageEvent&)>;

struct LosoCell {
  ClassifierKind kind = ClassifierKind::kChi2Svm;
  std::size_t k = 0;
  std::vector<std::vector<int>> labels;  // [repetition][subject]
  std::vector<double> rep_accuracies;
  double accuracy_mode = 0.0;
  double accuracy_min_error = 0.0;
  double accuracy_best_of_both = 0.0;  // optimistic: chosen on test accuracy
  std::vector<int> final_labels;       // under config.aggregation
  double accuracy = 0.0;               // under config.aggregation
};

struct LosoReport {
  ExperimentConfig config;
  std::vector<std::string> subjects;
  std::vector<int> truth;
  std::vector<std::vector<std::vector<double>>> fold_errors;  // [k index][repetition][subject]
  std::vector<std::vector<double>> rep_errors;                // [k index][repetition], summed over folds
  std::vector<std::vector<std::string>> fold_features;        // per subject's fold, when preprocessing
  std::vector<LosoCell> cells;                                // k-major, classifier-minor

  const LosoCell& cell(ClassifierKind kind, std::size_t k) const {
    for (const auto& c : cells)
      if (c.kind == kind && c.k == k) return c;
    throw ArgumentError("report has no cell for " + classifiers::to_string(kind) + " at k=" + std::to_string(k));
  }
};

namespace detail {

inline std::vector<std::string> subject_ids(const FeatureTable& t) {
  std::vector<std::string> ids;
  for (const auto& s : t.segments)
    if (ids.empty() || ids.back() != s.subject_id) ids.push_back(s.subject_id);
  return ids;
}

struct FoldData {
  FeatureTable train;
  FeatureTable test;
  std::vector<std::string> features;
};

inline FoldData prepare_fold(const FeatureTable& table, const std::string& held_out, std::size_t fold,
                             const ExperimentConfig& cfg, const LineageObserver& observer) {
  FoldData f;
  f.train = filter_subjects(table, [&](const std::string& id) { return id != held_out; });
  f.test = filter_subjects(table, [&](const std::string& id) { return id == held_out; });
  if (cfg.preprocessing == Preprocessing::kNone) {
    f.features = table.feature_names;
    return f;
  }
  auto emit = [&](const char* stage, const FeatureTable& seen) {
    if (observer) observer({stage, 0, 0, fold, held_out, subject_ids(seen)});
  };
  const ScalingParams scaling = fit_strict_train_only(f.train, cfg.band);
  emit("scaling", f.train);
  f.train = transform_reconciled(f.train, scaling);
  f.test = transform_reconciled(f.test, scaling);
  if (cfg.preprocessing == Preprocessing::kFixedSelection) {
    f.features = cfg.fixed_features;
  } else {
    SelectionConfig sel = cfg.selection;
    sel.k = std::min(sel.k, f.train.width());
    sel.seed = derive_seed(cfg.selection.seed, {fold});
    const auto report = run_selection(f.train, sel, 1);
    emit("selection", f.train);
    f.features = report.selected;
    if (cfg.pad_selection) {
      std::vector<const FeatureImportance*> ranked;
      for (const auto& fi : report.features) ranked.push_back(&fi);
      std::sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
      for (const auto* fi : ranked) {
        if (f.features.size() >= sel.k) break;
        if (!fi->selected) f.features.push_back(fi->name);
      }
    }
    if (f.features.empty())
      throw FoldError("fold holding out '" + held_out + "' selected no features at alpha " +
                      std::to_string(sel.alpha));
  }
  f.train = select_columns(f.train, f.features);
  f.test = select_columns(f.test, f.features);
  return f;
}

}  // namespace detail

/// Leave-one-subject-out cross-validation, repeated over independent
/// clusterings. Per fold the codebook and classifiers see only the N-1
/// training subjects. Unit (k, repetition, fold) draws its codebook from
/// derive_seed(seed, {k, rep, fold, 0}) and its classifiers from
/// derive_seed(seed, {k, rep, fold, 1}). Fold preprocessing is fitted once per
/// fold and shared across repetitions.
inline LosoReport loso_cv(const FeatureTable& table_in, const ExperimentConfig& cfg, std::size_t workers = 1,
                          const LineageObserver& observer = {}) {
  cfg.validate();
  const FeatureTable table = canonical_order(table_in);
  require_labels(table);
  const auto subjects = group_subjects(table);
  const std::size_t n = subjects.size();
  if (n < 2) throw ArgumentError("LOSO needs at least two subjects");
  std::size_t per_class[2] = {0, 0};
  for (const auto& s : subjects) ++per_class[s.label];
  for (const auto& s : subjects) {
    for (int c = 0; c < 2; ++c) {
      if (per_class[c] - (s.label == c ? 1 : 0) == 0)
        throw FoldError("fold holding out '" + s.subject_id + "' leaves no class-" + std::to_string(c) +
                        " subject for training");
    }
  }

  LosoReport rep;
  rep.config = cfg;
  for (const auto& s : subjects) {
    rep.subjects.push_back(s.subject_id);
    rep.truth.push_back(s.label);
  }

  std::vector<detail::FoldData> folds(n);
  parallel_for(n, workers, [&](std::size_t f) {
    folds[f] = detail::prepare_fold(table, subjects[f].subject_id, f, cfg, observer);
  });
  if (cfg.preprocessing != Preprocessing::kNone)
    for (const auto& f : folds) rep.fold_features.push_back(f.features);

  const std::size_t nk = cfg.k_sweep.size(), nr = cfg.repetitions, nc = cfg.classifiers.size();
  std::vector<Codebook> shared;  // paper_fast only: [k index * nr + rep]
  if (cfg.paper_fast) {
    shared.resize(nk * nr);
    parallel_for(shared.size(), workers, [&](std::size_t u) {
      const std::size_t k = cfg.k_sweep[u / nr], r = u % nr;
      shared[u] = build_codebook(table, k, cfg.restarts, derive_seed(cfg.seed, {k, r}), cfg.cluster, 1);
    });
  }

  struct Unit {
    double error = 0.0;
    std::vector<int> labels;  // per classifier
  };
  std::vector<Unit> units(nk * nr * n);
  parallel_for(units.size(), workers, [&](std::size_t u) {
    const std::size_t f = u % n, r = (u / n) % nr, ki = u / (n * nr), k = cfg.k_sweep[ki];
    const auto& fold = folds[f];
    const std::uint64_t useed = derive_seed(cfg.seed, {k, r, f});
    const Codebook book = cfg.paper_fast
                              ? shared[ki * nr + r]
                              : build_codebook(fold.train, k, cfg.restarts, derive_seed(useed, {0}), cfg.cluster, 1);
    if (observer) {
      const auto& seen = cfg.paper_fast ? table : fold.train;
      observer({"codebook", k, r, f, subjects[f].subject_id, detail::subject_ids(seen)});
      observer({"classifier", k, r, f, subjects[f].subject_id, detail::subject_ids(fold.train)});
    }
    units[u].error = book.total_error();
    for (auto& pred : score_with_codebook(book, fold.train, fold.test, cfg, derive_seed(useed, {1})))
      units[u].labels.push_back(pred.at(0));
  });

  rep.fold_errors.assign(nk, std::vector<std::vector<double>>(nr, std::vector<double>(n)));
  rep.rep_errors.assign(nk, std::vector<double>(nr, 0.0));
  for (std::size_t ki = 0; ki < nk; ++ki) {
    for (std::size_t r = 0; r < nr; ++r) {
      for (std::size_t f = 0; f < n; ++f) {
        const double e = units[(ki * nr + r) * n + f].error;
        rep.fold_errors[ki][r][f] = e;
        rep.rep_errors[ki][r] += e;
      }
      if (cfg.paper_fast) {
        rep.rep_errors[ki][r] = shared[ki * nr + r].total_error();
      }
    }
    for (std::size_t c = 0; c < nc; ++c) {
      LosoCell cell;
      cell.kind = cfg.classifiers[c];
      cell.k = cfg.k_sweep[ki];
      cell.labels.assign(nr, std::vector<int>(n));
      for (std::size_t r = 0; r < nr; ++r) {
        for (std::size_t f = 0; f < n; ++f) cell.labels[r][f] = units[(ki * nr + r) * n + f].labels[c];
        cell.rep_accuracies.push_back(accuracy(cell.labels[r], rep.truth));
      }
      const auto& errs = rep.fold_errors[ki];
      const auto by_mode = aggregate(cell.labels, errs, Aggregation::kMode);
      const auto by_error = aggregate(cell.labels, errs, Aggregation::kMinError);
      cell.accuracy_mode = accuracy(by_mode, rep.truth);
      cell.accuracy_min_error = accuracy(by_error, rep.truth);
      cell.accuracy_best_of_both = std::max(cell.accuracy_mode, cell.accuracy_min_error);
      cell.final_labels = aggregate(cell.labels, errs, cfg.aggregation, rep.truth);
      cell.accuracy = accuracy(cell.final_labels, rep.truth);
      rep.cells.push_back(std::move(cell));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const HoldoutReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"classifier", classifiers::to_string(c.kind)},
                     {"k_per_class", c.k},
                     {"mean", c.mean},
                     {"sd", c.sd},
                     {"accuracies", c.accuracies},
                     {"predictions", c.predictions}});
  }
  return {{"protocol", "holdout"},
          {"config", to_json(r.config)},
          {"test_subjects", r.test_subjects},
          {"truth", r.truth},
          {"codebook_errors", r.codebook_errors},
          {"cells", cells}};
}

inline nlohmann::json to_json(const LosoReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"classifier", classifiers::to_string(c.kind)},
                     {"k_per_class", c.k},
                     {"accuracy", c.accuracy},
                     {"accuracy_mode", c.accuracy_mode},
                     {"accuracy_min_error", c.accuracy_min_error},
                     {"accuracy_best_of_both", c.accuracy_best_of_both},
                     {"rep_accuracies", c.rep_accuracies},
                     {"final_labels", c.final_labels},
                     {"labels", c.labels}});
  }
  nlohmann::json j = {{"protocol", "loso"},
                      {"config", to_json(r.config)},
                      {"aggregation", to_string(r.config.aggregation)},
                      {"optimistic", r.config.aggregation == Aggregation::kBestOfBoth},
                      {"subjects", r.subjects},
                      {"truth", r.truth},
                      {"rep_errors", r.rep_errors},
                      {"fold_errors", r.fold_errors},
                      {"cells", cells}};
  if (!r.fold_features.empty()) j["fold_features"] = r.fold_features;
  return j;
}

namespace detail {

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto display_len = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char ch : s) n += (ch & 0xC0) != 0x80 ? 1 : 0;  // count UTF-8 code points
    return n;
  };
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = display_len(header[c]);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_len(row[c]));
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      out << std::string(width[c] - display_len(cells[c]), ' ') << cells[c];
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : rows) line(row);
  return out.str();
}

}  // namespace detail

/// Rows = k per class, columns = classifiers, cells = mean ± SD in percent.
inline std::string format_grid(const HoldoutReport& r) {
  std::vector<std::string> header{"K"};
  for (auto k : r.config.classifiers) header.push_back(classifiers::display_name(k));
  std::vector<std::vector<std::string>> rows;
  for (auto k : r.config.k_sweep) {
    std::vector<std::string> row{std::to_string(k) + "+" + std::to_string(k)};
    for (auto kind : r.config.classifiers) {
      const auto& c = r.cell(kind, k);
      row.push_back(detail::format_fixed(100 * c.mean, 1) + " ± " + detail::format_fixed(100 * c.sd, 1));
    }
    rows.push_back(std::move(row));
  }
  return "Holdout accuracy (%), " + std::to_string(r.config.repetitions) + " repetitions\n" +
         detail::render_grid(header, rows);
}

/// Rows = k per class, columns = classifiers, cells = aggregated accuracy in percent.
inline std::string format_grid(const LosoReport& r) {
  std::vector<std::string> header{"K"};
  for (auto k : r.config.classifiers) header.push_back(classifiers::display_name(k));
  std::vector<std::vector<std::string>> rows;
  for (auto k : r.config.k_sweep) {
    std::vector<std::string> row{std::to_string(k) + "+" + std::to_string(k)};
    for (auto kind : r.config.classifiers) row.push_back(detail::format_fixed(100 * r.cell(kind, k).accuracy, 1));
    rows.push_back(std::move(row));
  }
  std::string title = "LOSO accuracy (%), " + std::to_string(r.config.repetitions) + " repetitions, " +
                      to_string(r.config.aggregation) + " aggregation";
  if (r.config.aggregation == Aggregation::kBestOfBoth) title += " [optimistic: chosen on test accuracy]";
  return title + "\n" + detail::render_grid(header, rows);
}

}  // namespace boaw
