#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "boaw/feature_names.hpp"
#include "boaw/feature_table.hpp"
#include "boaw/random.hpp"

namespace boaw {

/// Planted two-class cohort. Each segment row is
///   base_f + spread_f * (shift_cf + offset_sf + noise),
/// with shift_cf = separation on informative features of class 1 and 0
/// elsewhere, a per-subject offset ~ N(0, subject_sd^2) and per-segment noise
/// ~ N(0, noise_sd^2).
struct CohortSpec {
  std::size_t subjects_per_class = 40;
  std::size_t min_segments = 8;
  std::size_t max_segments = 16;
  std::size_t features = 25;
  std::size_t informative = 5;
  std::vector<std::size_t> informative_indices;  // empty: drawn from the seed
  double separation = 1.0;
  double subject_sd = 0.3;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (subjects_per_class < 2) throw ArgumentError("need at least two subjects per class");
    if (min_segments < 1 || max_segments < min_segments)
      throw ArgumentError("segment range must satisfy 1 <= min <= max");
    if (features < 1) throw ArgumentError("need at least one feature");
    const std::size_t inf = informative_indices.empty() ? informative : informative_indices.size();
    if (inf > features) throw ArgumentError("more informative features than features");
    for (auto i : informative_indices)
      if (i >= features) throw ArgumentError("informative index out of range");
    if (!(noise_sd > 0) || subject_sd < 0 || !std::isfinite(separation))
      throw ArgumentError("noise_sd must be positive, subject_sd non-negative, separation finite");
  }
};

struct CohortTruth {
  std::vector<std::size_t> informative;  // sorted column indices
  std::vector<std::string> informative_names;
  double segment_margin = 0.0;       // Mahalanobis distance between class means, per segment
  double segment_bayes_error = 0.5;  // Phi(-margin / 2)
};

struct Cohort {
  FeatureTable table;
  CohortTruth truth;
};

inline std::vector<std::string> synthetic_feature_names(std::size_t d) {
  if (d == kEgemapsFeatureCount || d == kCanonicalFeatureCount)
    return {kCanonicalFeatureNames.begin(), kCanonicalFeatureNames.begin() + static_cast<std::ptrdiff_t>(d)};
  std::vector<std::string> names;
  char buf[32];
  for (std::size_t i = 0; i < d; ++i) {
    std::snprintf(buf, sizeof buf, "feature_%02zu", i);
    names.emplace_back(buf);
  }
  return names;
}

inline Cohort generate_cohort(const CohortSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Cohort out;
  auto& t = out.table;
  t.feature_names = synthetic_feature_names(spec.features);

  std::vector<std::size_t> inf = spec.informative_indices;
  if (inf.empty()) {
    std::vector<std::size_t> all(spec.features);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(std::span<std::size_t>(all));
    inf.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(spec.informative));
  }
  std::sort(inf.begin(), inf.end());
  std::vector<double> base(spec.features), spread(spec.features), shift(spec.features, 0.0);
  for (std::size_t f = 0; f < spec.features; ++f) {
    base[f] = rng.uniform(-10.0, 10.0);
    spread[f] = rng.uniform(0.5, 2.0);
  }
  for (auto f : inf) shift[f] = spec.separation;

  std::vector<double> row(spec.features), offset(spec.features);
  char id[32];
  for (int label = 0; label < 2; ++label) {
    for (std::size_t s = 0; s < spec.subjects_per_class; ++s) {
      std::snprintf(id, sizeof id, "%s%03zu", label == 0 ? "C" : "D", s + 1);
      for (auto& o : offset) o = rng.normal(0.0, spec.subject_sd);
      const auto segments = static_cast<std::size_t>(
          rng.integer(static_cast<long long>(spec.min_segments), static_cast<long long>(spec.max_segments)));
      std::vector<double> durations(segments);
      for (auto& d : durations) d = rng.uniform(0.5, 10.0);
      const double recording = std::accumulate(durations.begin(), durations.end(), 0.0) * 1.25;
      for (std::size_t g = 0; g < segments; ++g) {
        for (std::size_t f = 0; f < spec.features; ++f)
          row[f] = base[f] + spread[f] * ((label == 1 ? shift[f] : 0.0) + offset[f] + rng.normal(0.0, spec.noise_sd));
        t.values.append_row(row);
        t.segments.push_back({id, static_cast<int>(g), label, durations[g], recording});
      }
    }
  }

  out.truth.informative = inf;
  for (auto f : inf) out.truth.informative_names.push_back(t.feature_names[f]);
  out.truth.segment_margin =
      std::abs(spec.separation) * std::sqrt(static_cast<double>(inf.size())) /
      std::sqrt(spec.noise_sd * spec.noise_sd + spec.subject_sd * spec.subject_sd);
  out.truth.segment_bayes_error = 0.5 * std::erfc(out.truth.segment_margin / 2.0 / std::sqrt(2.0));
  return out;
}

inline nlohmann::json to_json(const CohortSpec& s) {
  return {{"subjects_per_class", s.subjects_per_class},
          {"min_segments", s.min_segments},
          {"max_segments", s.max_segments},
          {"features", s.features},
          {"informative", s.informative},
          {"informative_indices", s.informative_indices},
          {"separation", s.separation},
          {"subject_sd", s.subject_sd},
          {"noise_sd", s.noise_sd},
          {"seed", s.seed}};
}

inline CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  CohortSpec s;
  s.subjects_per_class = j.value("subjects_per_class", s.subjects_per_class);
  s.min_segments = j.value("min_segments", s.min_segments);
  s.max_segments = j.value("max_segments", s.max_segments);
  s.features = j.value("features", s.features);
  s.informative = j.value("informative", s.informative);
  s.informative_indices = j.value("informative_indices", s.informative_indices);
  s.separation = j.value("separation", s.separation);
  s.subject_sd = j.value("subject_sd", s.subject_sd);
  s.noise_sd = j.value("noise_sd", s.noise_sd);
  s.seed = j.value("seed", s.seed);
  return s;
}

inline nlohmann::json to_json(const CohortTruth& t) {
  return {{"informative", t.informative},
          {"informative_names", t.informative_names},
          {"segment_margin", t.segment_margin},
          {"segment_bayes_error", t.segment_bayes_error}};
}

/// One line per subject: subject_id,label,segments,recording_duration.
inline void write_subject_manifest(std::ostream& out, const FeatureTable& table) {
  out << "subject_id,label,segments,recording_duration\n";
  for (const auto& s : group_subjects(table))
    out << s.subject_id << ',' << s.label << ',' << s.rows.size() << ','
        << detail::format_double(s.recording_duration_s) << '\n';
}

}  // namespace boaw
