#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "boaw/error.hpp"
#include "boaw/feature_table.hpp"

namespace boaw {

/// Acceptance band [-lambda, 1 + lambda] for scaled test features and the
/// tail-clamping schedule. beta values are percentiles expressed in percent
/// (0.05 means the 0.05th percentile).
struct ToleranceBand {
  double lambda = 0.1;
  double beta_step = 0.05;
  double beta_max = 0.5;

  void validate() const {
    if (!(lambda > 0 && lambda < 1)) throw ArgumentError("lambda must lie in (0, 1)");
    if (!(beta_step > 0 && beta_step <= beta_max && beta_max < 1))
      throw ArgumentError("need 0 < beta_step <= beta_max < 1");
  }

  friend bool operator==(const ToleranceBand&, const ToleranceBand&) = default;
};

/// Affine map x' = gain * x + offset for one feature, plus the record of any
/// tail clamping that produced it.
struct FeatureScaling {
  double gain = 0.0;
  double offset = 0.0;
  bool degenerate = false;  // constant on the fitting data; maps to 0
  bool adjusted = false;    // tail clamping was applied
  bool capped = false;      // clamping stopped at beta_max still outside the band
  double beta = 0.0;        // last beta tried, 0 when not adjusted
  bool clamp_low = false;
  bool clamp_high = false;
  double low_threshold = 0.0;    // raw values below this ...
  double low_replacement = 0.0;  // ... become this
  double high_threshold = 0.0;
  double high_replacement = 0.0;

  double apply(double x) const { return gain * x + offset; }

  double clamp_raw(double x) const {
    if (clamp_low && x < low_threshold) return low_replacement;
    if (clamp_high && x > high_threshold) return high_replacement;
    return x;
  }

  friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;
};

struct ScalingParams {
  std::vector<std::string> feature_names;
  std::vector<FeatureScaling> features;
  ToleranceBand band;
  bool strict_train_only = false;

  friend bool operator==(const ScalingParams&, const ScalingParams&) = default;
};

/// Linear-interpolation percentile of sorted data; `percent` in [0, 100].
inline double percentile_sorted(std::span<const double> sorted, double percent) {
  if (sorted.empty()) throw ArgumentError("percentile of an empty vector");
  const double pos = percent / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// Min-max fit of one column.
inline FeatureScaling fit_minmax_column(std::span<const double> values) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  FeatureScaling f;
  if (hi == lo) {
    f.degenerate = true;
    return f;
  }
  f.gain = 1.0 / (hi - lo);
  f.offset = lo / (lo - hi);
  return f;
}

inline ScalingParams fit_minmax(const FeatureTable& train) {
  if (train.size() < 2) throw ArgumentError("min-max fit needs at least two rows");
  ScalingParams p;
  p.feature_names = train.feature_names;
  p.features.reserve(train.width());
  for (std::size_t c = 0; c < train.width(); ++c) p.features.push_back(fit_minmax_column(train.values.column(c)));
  return p;
}

namespace detail {

inline void check_columns(const FeatureTable& table, const ScalingParams& params) {
  if (table.feature_names != params.feature_names)
    throw SchemaError("feature columns do not match the scaling parameters");
}

struct BandCheck {
  bool low = false;
  bool high = false;
  bool ok() const { return !low && !high; }
};

inline BandCheck check_band(const FeatureScaling& f, std::span<const double> raw, double lambda) {
  BandCheck b;
  for (double x : raw) {
    const double s = f.apply(x);
    if (s < -lambda) b.low = true;
    if (s > 1.0 + lambda) b.high = true;
  }
  return b;
}

}  // namespace detail

/// One feature of the outlier reconciliation: keep the train fit when the
/// scaled test values stay in the band, otherwise clamp pooled tails at
/// growing percentiles and refit until they do or beta reaches beta_max.
inline FeatureScaling reconcile_column(std::span<const double> train, std::span<const double> test,
                                       const ToleranceBand& band) {
  FeatureScaling f = fit_minmax_column(train);
  auto check = detail::check_band(f, test, band.lambda);
  if (check.ok()) return f;

  std::vector<double> pooled(train.begin(), train.end());
  pooled.insert(pooled.end(), test.begin(), test.end());
  std::sort(pooled.begin(), pooled.end());

  bool side_low = check.low, side_high = check.high;
  std::vector<double> train_c(train.size()), test_c(test.size());
  for (int step = 1;; ++step) {
    const double beta = step * band.beta_step;
    const bool last = beta >= band.beta_max - 1e-12;
    const double lo_thr = percentile_sorted(pooled, beta);
    const double hi_thr = percentile_sorted(pooled, 100.0 - beta);
    FeatureScaling cand;
    cand.clamp_low = side_low;
    cand.clamp_high = side_high;
    cand.low_threshold = lo_thr;
    cand.low_replacement = *std::lower_bound(pooled.begin(), pooled.end(), lo_thr);
    cand.high_threshold = hi_thr;
    cand.high_replacement = *std::prev(std::upper_bound(pooled.begin(), pooled.end(), hi_thr));
    for (std::size_t i = 0; i < train.size(); ++i) train_c[i] = cand.clamp_raw(train[i]);
    for (std::size_t i = 0; i < test.size(); ++i) test_c[i] = cand.clamp_raw(test[i]);

    const FeatureScaling refit = fit_minmax_column(train_c);
    cand.gain = refit.gain;
    cand.offset = refit.offset;
    cand.degenerate = refit.degenerate;
    cand.adjusted = true;
    cand.beta = beta;
    check = detail::check_band(cand, test_c, band.lambda);
    if (check.ok() || last) {
      cand.capped = !check.ok();
      return cand;
    }
    side_low = side_low || check.low;
    side_high = side_high || check.high;
  }
}

inline ScalingParams fit_with_reconciliation(const FeatureTable& train, const FeatureTable& test,
                                             const ToleranceBand& band = {}) {
  band.validate();
  if (train.feature_names != test.feature_names) throw SchemaError("train and test columns differ");
  if (train.size() < 2 || test.size() == 0) throw ArgumentError("reconciliation needs >= 2 train rows and a non-empty test set");
  ScalingParams p;
  p.feature_names = train.feature_names;
  p.band = band;
  p.features.resize(train.width());
  for (std::size_t c = 0; c < train.width(); ++c)
    p.features[c] = reconcile_column(train.values.column(c), test.values.column(c), band);
  return p;
}

/// Train-only fit; test values are later clipped into the band instead of
/// influencing the parameters.
inline ScalingParams fit_strict_train_only(const FeatureTable& train, const ToleranceBand& band = {}) {
  band.validate();
  ScalingParams p = fit_minmax(train);
  p.band = band;
  p.strict_train_only = true;
  return p;
}

/// Pure affine map, no clamping or clipping.
inline FeatureTable transform(const FeatureTable& table, const ScalingParams& params) {
  detail::check_columns(table, params);
  FeatureTable out = table;
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t c = 0; c < out.width(); ++c) out.values(r, c) = params.features[c].apply(table.values(r, c));
  return out;
}

/// The map the pipeline uses: recorded tail clamps on raw values, the affine
/// map, and in strict mode a final clip into [-lambda, 1 + lambda].
inline FeatureTable transform_reconciled(const FeatureTable& table, const ScalingParams& params) {
  detail::check_columns(table, params);
  FeatureTable out = table;
  const double lo = -params.band.lambda, hi = 1.0 + params.band.lambda;
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t c = 0; c < out.width(); ++c) {
      const auto& f = params.features[c];
      double v = f.apply(f.clamp_raw(table.values(r, c)));
      if (params.strict_train_only) v = std::clamp(v, lo, hi);
      out.values(r, c) = v;
    }
  }
  return out;
}

inline nlohmann::json to_json(const ScalingParams& p) {
  nlohmann::json feats = nlohmann::json::array();
  for (std::size_t i = 0; i < p.features.size(); ++i) {
    const auto& f = p.features[i];
    nlohmann::json j = {{"name", p.feature_names[i]}, {"gain", f.gain}, {"offset", f.offset},
                        {"degenerate", f.degenerate}, {"adjusted", f.adjusted}, {"capped", f.capped}};
    if (f.adjusted) {
      j["clamp"] = {{"beta", f.beta},
                    {"low", f.clamp_low},
                    {"high", f.clamp_high},
                    {"low_threshold", f.low_threshold},
                    {"low_replacement", f.low_replacement},
                    {"high_threshold", f.high_threshold},
                    {"high_replacement", f.high_replacement}};
    }
    feats.push_back(std::move(j));
  }
  return {{"features", feats},
          {"lambda", p.band.lambda},
          {"beta_step", p.band.beta_step},
          {"beta_max", p.band.beta_max},
          {"strict_train_only", p.strict_train_only}};
}

inline ScalingParams scaling_params_from_json(const nlohmann::json& j) {
  ScalingParams p;
  p.band.lambda = j.at("lambda").get<double>();
  p.band.beta_step = j.at("beta_step").get<double>();
  p.band.beta_max = j.at("beta_max").get<double>();
  p.strict_train_only = j.at("strict_train_only").get<bool>();
  for (const auto& fj : j.at("features")) {
    FeatureScaling f;
    p.feature_names.push_back(fj.at("name").get<std::string>());
    f.gain = fj.at("gain").get<double>();
    f.offset = fj.at("offset").get<double>();
    f.degenerate = fj.at("degenerate").get<bool>();
    f.adjusted = fj.at("adjusted").get<bool>();
    f.capped = fj.at("capped").get<bool>();
    if (f.adjusted) {
      const auto& c = fj.at("clamp");
      f.beta = c.at("beta").get<double>();
      f.clamp_low = c.at("low").get<bool>();
      f.clamp_high = c.at("high").get<bool>();
      f.low_threshold = c.at("low_threshold").get<double>();
      f.low_replacement = c.at("low_replacement").get<double>();
      f.high_threshold = c.at("high_threshold").get<double>();
      f.high_replacement = c.at("high_replacement").get<double>();
    }
    p.features.push_back(f);
  }
  return p;
}

}  // namespace boaw
