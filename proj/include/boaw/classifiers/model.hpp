#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "boaw/classifiers/chi2_svm.hpp"
#include "boaw/classifiers/emlm.hpp"
#include "boaw/classifiers/knn.hpp"
#include "boaw/classifiers/lda.hpp"
#include "boaw/classifiers/linear_svm.hpp"
#include "boaw/decision_tree.hpp"

namespace boaw::classifiers {

enum class ClassifierKind { kKnn5, kLda, kRf, kLinearSvm, kChi2Svm, kEmlm };

/// Column order used in report grids.
inline constexpr std::array<ClassifierKind, 6> kAllClassifiers = {
    ClassifierKind::kKnn5,    ClassifierKind::kRf,  ClassifierKind::kLinearSvm,
    ClassifierKind::kChi2Svm, ClassifierKind::kLda, ClassifierKind::kEmlm};

inline std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::kKnn5: return "knn5";
    case ClassifierKind::kLda: return "lda";
    case ClassifierKind::kRf: return "rf";
    case ClassifierKind::kLinearSvm: return "linear_svm";
    case ClassifierKind::kChi2Svm: return "chi2_svm";
    case ClassifierKind::kEmlm: return "emlm";
  }
  return "?";
}

inline std::string display_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::kKnn5: return "5-NN";
    case ClassifierKind::kLda: return "LDA";
    case ClassifierKind::kRf: return "RF";
    case ClassifierKind::kLinearSvm: return "Linear-SVM";
    case ClassifierKind::kChi2Svm: return "Chi2-SVM";
    case ClassifierKind::kEmlm: return "EMLM";
  }
  return "?";
}

inline ClassifierKind classifier_kind_from_string(std::string_view s) {
  for (auto k : kAllClassifiers)
    if (to_string(k) == s) return k;
  throw ArgumentError("unknown classifier '" + std::string(s) +
                      "' (expected knn5, lda, rf, linear_svm, chi2_svm or emlm)");
}

struct ClassifierParams {
  std::size_t knn_k = 5;
  double lda_ridge = 1e-6;
  std::size_t rf_trees = 50;
  std::size_t rf_max_leaves = 5;
  LinearSvmOptions linear;
  Chi2SvmOptions chi2;
  double emlm_ridge = 1e-8;

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

inline nlohmann::json to_json(const ClassifierParams& p) {
  return {{"knn_k", p.knn_k},
          {"lda_ridge", p.lda_ridge},
          {"rf_trees", p.rf_trees},
          {"rf_max_leaves", p.rf_max_leaves},
          {"linear_c", p.linear.c},
          {"linear_tol", p.linear.tol},
          {"linear_max_epochs", p.linear.max_epochs},
          {"chi2_c", p.chi2.c},
          {"chi2_eps", p.chi2.eps},
          {"emlm_ridge", p.emlm_ridge}};
}

/// Missing keys keep their defaults.
inline ClassifierParams classifier_params_from_json(const nlohmann::json& j) {
  ClassifierParams p;
  p.knn_k = j.value("knn_k", p.knn_k);
  p.lda_ridge = j.value("lda_ridge", p.lda_ridge);
  p.rf_trees = j.value("rf_trees", p.rf_trees);
  p.rf_max_leaves = j.value("rf_max_leaves", p.rf_max_leaves);
  p.linear.c = j.value("linear_c", p.linear.c);
  p.linear.tol = j.value("linear_tol", p.linear.tol);
  p.linear.max_epochs = j.value("linear_max_epochs", p.linear.max_epochs);
  p.chi2.c = j.value("chi2_c", p.chi2.c);
  p.chi2.eps = j.value("chi2_eps", p.chi2.eps);
  p.emlm_ridge = j.value("emlm_ridge", p.emlm_ridge);
  return p;
}

struct ForestModel {
  RandomForest forest;
  std::size_t width = 0;

  int predict(std::span<const double> row) const {
    check_width(row, width);
    return forest.predict(row);
  }
};

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::kKnn5;
  ClassifierParams params;
  std::uint64_t seed = 0;
  std::size_t width = 0;
  std::variant<KnnModel, LdaModel, ForestModel, LinearSvmModel, Chi2SvmModel, EmlmModel> impl;
};

inline TrainedModel train(ClassifierKind kind, const Matrix& x, std::span<const int> y,
                          const ClassifierParams& params = {}, std::uint64_t seed = 0) {
  TrainedModel m;
  m.kind = kind;
  m.params = params;
  m.seed = seed;
  m.width = x.cols();
  switch (kind) {
    case ClassifierKind::kKnn5: m.impl = KnnModel::fit(x, y, params.knn_k); break;
    case ClassifierKind::kLda: m.impl = LdaModel::fit(x, y, params.lda_ridge); break;
    case ClassifierKind::kRf: {
      check_training_data(x, y);
      ForestParams fp;
      fp.trees = params.rf_trees;
      fp.tree.max_leaves = params.rf_max_leaves;
      fp.tree.bootstrap = true;
      m.impl = ForestModel{RandomForest::fit(x, y, fp, seed), x.cols()};
      break;
    }
    case ClassifierKind::kLinearSvm: m.impl = LinearSvmModel::fit(x, y, params.linear, seed); break;
    case ClassifierKind::kChi2Svm: m.impl = Chi2SvmModel::fit(x, y, params.chi2); break;
    case ClassifierKind::kEmlm: m.impl = EmlmModel::fit(x, y, params.emlm_ridge); break;
  }
  return m;
}

inline int predict_one(const TrainedModel& m, std::span<const double> row) {
  check_width(row, m.width);
  return std::visit([&](const auto& impl) { return impl.predict(row); }, m.impl);
}

inline std::vector<int> predict(const TrainedModel& m, const Matrix& x) {
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_one(m, x.row(i));
  return out;
}

inline nlohmann::json to_json(const TrainedModel& m) {
  nlohmann::json body = std::visit(
      [](const auto& impl) -> nlohmann::json {
        using T = std::decay_t<decltype(impl)>;
        if constexpr (std::is_same_v<T, ForestModel>) return impl.forest.to_json();
        else return impl.to_json();
      },
      m.impl);
  return {{"kind", to_string(m.kind)},
          {"params", to_json(m.params)},
          {"seed", m.seed},
          {"width", m.width},
          {"model", body}};
}

inline TrainedModel trained_model_from_json(const nlohmann::json& j) {
  TrainedModel m;
  m.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
  m.params = classifier_params_from_json(j.at("params"));
  m.seed = j.at("seed").get<std::uint64_t>();
  m.width = j.at("width").get<std::size_t>();
  const auto& body = j.at("model");
  switch (m.kind) {
    case ClassifierKind::kKnn5: m.impl = KnnModel::from_json(body); break;
    case ClassifierKind::kLda: m.impl = LdaModel::from_json(body); break;
    case ClassifierKind::kRf: m.impl = ForestModel{RandomForest::from_json(body), m.width}; break;
    case ClassifierKind::kLinearSvm: m.impl = LinearSvmModel::from_json(body); break;
    case ClassifierKind::kChi2Svm: m.impl = Chi2SvmModel::from_json(body); break;
    case ClassifierKind::kEmlm: m.impl = EmlmModel::from_json(body); break;
  }
  return m;
}

}  // namespace boaw::classifiers
