#pragma once

// Pipeline stages driven by JSON option objects. The CLI subcommands and the
// run-manifest both go through these functions.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "boaw/artifact.hpp"
#include "boaw/classifiers/model.hpp"
#include "boaw/codebook.hpp"
#include "boaw/evaluation.hpp"
#include "boaw/scaler.hpp"
#include "boaw/segmenter.hpp"
#include "boaw/selection.hpp"
#include "boaw/synth.hpp"
#include "boaw/wav.hpp"

namespace boaw::stages {

namespace fs = std::filesystem;

struct StageContext {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  fs::path out_dir = ".";
  fs::path base_dir = ".";  // relative inputs resolve here first

  fs::path output(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : out_dir / path;
  }
  fs::path input(const std::string& p) const {
    const fs::path path(p);
    if (path.is_absolute()) return path;
    if (fs::exists(base_dir / path)) return base_dir / path;
    return out_dir / path;
  }
};

/// Read-only view of a stage's option object with typed, defaulted access.
class Options {
 public:
  Options(const Json& j, std::string stage) : j_(j), stage_(std::move(stage)) {}

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(const std::string& key, const T& fallback) const {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T require(const std::string& key) const {
    if (!has(key)) throw ValidationError(stage_ + ": missing option '" + key + "'");
    return as<T>(key);
  }

  std::uint64_t seed(const StageContext& ctx) const { return get<std::uint64_t>("seed", ctx.seed); }
  const Json& raw() const { return j_; }

 private:
  template <typename T>
  T as(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(stage_ + ": option '" + key + "' has the wrong type");
    }
  }

  const Json& j_;
  std::string stage_;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::size_t to_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ValidationError("cannot read '" + s + "' as a count for " + what);
  return static_cast<std::size_t>(v);
}

/// Accepts 15, [5, 10], "5,10,15" or "lo:hi:step".
inline std::vector<std::size_t> parse_sweep(const Json& j) {
  if (j.is_number_unsigned() || j.is_number_integer()) return {j.get<std::size_t>()};
  if (j.is_array()) return j.get<std::vector<std::size_t>>();
  if (!j.is_string()) throw ValidationError("k_sweep must be a number, list or string");
  const auto s = j.get<std::string>();
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream in(s);
    std::string p;
    while (std::getline(in, p, ':')) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3) throw ValidationError("k_sweep range must be lo:hi or lo:hi:step");
    const auto lo = to_count(parts[0], "k_sweep"), hi = to_count(parts[1], "k_sweep");
    const auto step = parts.size() == 3 ? to_count(parts[2], "k_sweep") : 1;
    if (step == 0 || hi < lo) throw ValidationError("k_sweep range is empty");
    std::vector<std::size_t> out;
    for (auto k = lo; k <= hi; k += step) out.push_back(k);
    return out;
  }
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_count(item, "k_sweep"));
  return out;
}

inline std::vector<ClassifierKind> parse_classifiers(const Json& j) {
  std::vector<std::string> names;
  if (j.is_array()) names = j.get<std::vector<std::string>>();
  else if (j.is_string()) names = split_list(j.get<std::string>());
  else throw ValidationError("classifiers must be a list or comma-separated string");
  std::vector<ClassifierKind> out;
  for (const auto& n : names) {
    if (n == "all") return {classifiers::kAllClassifiers.begin(), classifiers::kAllClassifiers.end()};
    try {
      out.push_back(classifiers::classifier_kind_from_string(n));
    } catch (const ArgumentError& e) {
      throw ValidationError(e.what());
    }
  }
  return out;
}

inline std::vector<std::string> path_list(const Json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  if (j.is_array()) return j.get<std::vector<std::string>>();
  throw ValidationError("expected a path or a list of paths");
}

inline FeatureSchema parse_schema(const std::string& s) {
  if (s == "auto") return FeatureSchema::kAuto;
  if (s == "canonical") return FeatureSchema::kCanonical;
  if (s == "no_pause") return FeatureSchema::kCanonicalNoPause;
  if (s == "generic") return FeatureSchema::kGeneric;
  throw ValidationError("unknown schema '" + s + "' (expected auto, canonical, no_pause or generic)");
}

/// Rethrows configuration errors from library validators as validation errors.
template <typename F>
void as_validation(F&& f) {
  try {
    f();
  } catch (const ArgumentError& e) {
    throw ValidationError(e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << text;
}

inline void write_table(const fs::path& path, const FeatureTable& t) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_feature_table(path, t);
}

inline void write_envelope(const fs::path& path, ArtifactKind kind, std::uint64_t seed, const Json& config,
                           Json payload) {
  write_artifact({kind, kArtifactSchemaVersion, seed, config, std::move(payload)}, path);
}

/// Stage options as recorded in artifacts: everything except worker count.
inline Json provenance(const Json& options, std::uint64_t seed) {
  Json c = options;
  c.erase("workers");
  c["seed"] = seed;
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Option parsers (no I/O; used both for validation and for running).

inline SegmenterConfig segmenter_config(const Options& o) {
  SegmenterConfig c;
  c.energy_threshold_db = o.get("threshold_db", c.energy_threshold_db);
  c.min_speech_s = o.get("min_speech", c.min_speech_s);
  c.max_pause_s = o.get("max_pause", c.max_pause_s);
  c.max_segment_s = o.get("max_segment", c.max_segment_s);
  c.frame_s = o.get("frame", c.frame_s);
  detail::as_validation([&] { c.validate(); });
  return c;
}

inline ToleranceBand tolerance_band(const Options& o) {
  ToleranceBand b;
  b.lambda = o.get("lambda", b.lambda);
  b.beta_step = o.get("beta_step", b.beta_step);
  b.beta_max = o.get("beta_max", b.beta_max);
  detail::as_validation([&] { b.validate(); });
  return b;
}

/// Selection settings; `prefix` is "" for the select stage and "selection_"
/// inside loso.
inline SelectionConfig selection_config(const Options& o, const std::string& prefix = "") {
  SelectionConfig c;
  c.repetitions = o.get(prefix + "repetitions", c.repetitions);
  c.alpha = o.get(prefix + "alpha", c.alpha);
  c.k = o.get(prefix + "k", c.k);
  c.forest.trees = o.get(prefix + "trees", c.forest.trees);
  c.forest.tree.max_leaves = o.get(prefix + "max_leaves", c.forest.tree.max_leaves);
  return c;
}

inline ClassifierParams classifier_params(const Options& o) {
  return classifiers::classifier_params_from_json(o.raw());
}

/// Shared by evaluate and loso. `protocol` presets fill in the paper protocols
/// and explicit options override them.
inline ExperimentConfig experiment_config(const Options& o, const StageContext& ctx, bool loso) {
  ExperimentConfig c;
  const auto protocol = o.get<std::string>("protocol", "");
  if (protocol == "paper_holdout") {
    c.k_sweep = {15};
    c.repetitions = 100;
    c.restarts = 100;
  } else if (protocol == "paper_loso") {
    c.k_sweep = {11};
    c.repetitions = 75;
    c.restarts = 100;
    c.aggregation = Aggregation::kMinError;
  } else if (protocol == "paper_sweep") {
    c.k_sweep = loso ? detail::parse_sweep(Json("2:20")) : detail::parse_sweep(Json("5:50:5"));
    c.repetitions = loso ? 25 : 100;
    c.aggregation = Aggregation::kBestOfBoth;
  } else if (!protocol.empty()) {
    throw ValidationError("unknown protocol '" + protocol + "' (expected paper_holdout, paper_loso or paper_sweep)");
  }
  if (o.has("k_sweep")) c.k_sweep = detail::parse_sweep(o.raw().at("k_sweep"));
  c.repetitions = o.get("repetitions", c.repetitions);
  c.restarts = o.get("restarts", c.restarts);
  if (o.has("classifiers")) c.classifiers = detail::parse_classifiers(o.raw().at("classifiers"));
  c.classifier_params = classifier_params(o);
  c.cluster.max_iterations = o.get("max_iterations", c.cluster.max_iterations);
  c.duration_weighted = o.get("duration_weighted", c.duration_weighted);
  c.seed = o.seed(ctx);
  if (loso) {
    if (o.has("aggregation"))
      detail::as_validation([&] { c.aggregation = aggregation_from_string(o.require<std::string>("aggregation")); });
    if (o.has("preprocessing"))
      detail::as_validation(
          [&] { c.preprocessing = preprocessing_from_string(o.require<std::string>("preprocessing")); });
    c.band = tolerance_band(o);
    c.selection = selection_config(o, "selection_");
    c.selection.seed = derive_seed(c.seed, {0x5e1ec7});
    c.fixed_features = o.get("fixed_features", c.fixed_features);
    if (o.has("fixed_selection") && c.preprocessing == Preprocessing::kNone)
      c.preprocessing = Preprocessing::kFixedSelection;
    c.pad_selection = o.get("pad_selection", c.pad_selection);
    c.paper_fast = o.get("paper_fast", c.paper_fast);
  }
  if (!(loso && o.has("fixed_selection"))) detail::as_validation([&] { c.validate(); });
  return c;
}

inline CohortSpec cohort_spec(const Options& o, const StageContext& ctx) {
  CohortSpec s = cohort_spec_from_json(o.raw());
  s.seed = o.seed(ctx);
  detail::as_validation([&] { s.validate(); });
  return s;
}

// ---------------------------------------------------------------------------
// Stage bodies. Each returns a short JSON summary of what it wrote.

inline Json run_segment(const Json& j, const StageContext& ctx) {
  const Options o(j, "segment");
  const auto cfg = segmenter_config(o);
  const auto inputs = detail::path_list(o.require<Json>("inputs"));
  const auto out_path = ctx.output(o.require<std::string>("output"));
  const auto export_dir = o.get<std::string>("export_dir", "");

  std::vector<Json> recordings(inputs.size());
  parallel_for(inputs.size(), ctx.workers, [&](std::size_t i) {
    const fs::path path = ctx.input(inputs[i]);
    const AudioBuffer buffer = read_wav(path);
    const auto segments = detect_segments(buffer, cfg);
    const auto pauses = compute_pause_features(segments, buffer.duration_s());
    const std::string name = fs::path(inputs[i]).stem().string();
    Json segs = Json::array();
    for (std::size_t s = 0; s < segments.size(); ++s) {
      segs.push_back({{"index", s},
                      {"start_s", segments[s].start_s},
                      {"end_s", segments[s].end_s},
                      {"preceding_pause_s", segments[s].preceding_pause_s},
                      {"pause_duration_ratio", pauses[s].pause_duration_ratio},
                      {"pause_total_pauses_ratio", pauses[s].pause_total_pauses_ratio}});
      if (!export_dir.empty()) {
        const auto dir = ctx.output(export_dir);
        fs::create_directories(dir);
        const auto samples = segment_samples(buffer, segments[s]);
        write_wav(dir / (name + "_" + std::to_string(s) + ".wav"), samples, 1, buffer.sample_rate);
      }
    }
    recordings[i] = {{"recording", name},
                     {"path", inputs[i]},
                     {"sample_rate", buffer.sample_rate},
                     {"duration_s", buffer.duration_s()},
                     {"segments", segs}};
  });
  Json config = {{"threshold_db", cfg.energy_threshold_db},
                 {"min_speech", cfg.min_speech_s},
                 {"max_pause", cfg.max_pause_s},
                 {"max_segment", cfg.max_segment_s},
                 {"frame", cfg.frame_s}};
  write_json_file(out_path, {{"config", config}, {"recordings", recordings}});
  std::size_t total = 0;
  for (const auto& r : recordings) total += r.at("segments").size();
  return {{"written", {out_path.string()}}, {"recordings", inputs.size()}, {"segments", total}};
}

inline Json run_ingest(const Json& j, const StageContext& ctx) {
  const Options o(j, "ingest");
  const auto schema = detail::parse_schema(o.get<std::string>("schema", "auto"));
  FeatureTable table = read_feature_table(ctx.input(o.require<std::string>("input")), schema);

  if (o.has("labels")) {
    const auto path = ctx.input(o.require<std::string>("labels"));
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open");
    std::string line;
    std::getline(in, line);
    const char delim = boaw::detail::detect_delimiter(line);
    const auto header = boaw::detail::split_fields(line, delim);
    if (header.size() < 2 || header[0] != "subject_id" || header[1] != "label")
      throw SchemaError(path.string() + ": expected header subject_id,label");
    std::map<std::string, int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++row;
      const auto f = boaw::detail::split_fields(line, delim);
      const double v = boaw::detail::parse_number(f.at(1), row, "label");
      if (v != 0.0 && v != 1.0) throw DataError(path.string() + ": label at row " + std::to_string(row) + " is not 0 or 1");
      labels[f[0]] = static_cast<int>(v);
    }
    for (auto& s : table.segments) {
      auto it = labels.find(s.subject_id);
      if (it != labels.end()) s.label = it->second;
    }
  }

  if (o.has("segments")) {
    const Json manifest = read_json_file(ctx.input(o.require<std::string>("segments")));
    std::map<std::string, const Json*> by_name;
    for (const auto& r : manifest.at("recordings")) by_name[r.at("recording").get<std::string>()] = &r;
    for (auto name : {kPauseDurationRatio, kPauseTotalPausesRatio}) {
      if (table.column_index(name)) continue;
      Matrix widened(table.size(), table.width() + 1);
      for (std::size_t r = 0; r < table.size(); ++r)
        std::copy(table.values.row(r).begin(), table.values.row(r).end(), widened.row(r).begin());
      table.values = std::move(widened);
      table.feature_names.emplace_back(name);
    }
    const auto c_dur = *table.column_index(kPauseDurationRatio);
    const auto c_tot = *table.column_index(kPauseTotalPausesRatio);
    for (std::size_t r = 0; r < table.size(); ++r) {
      auto& s = table.segments[r];
      auto it = by_name.find(s.subject_id);
      if (it == by_name.end()) throw DataError("no segment manifest entry for subject '" + s.subject_id + "'");
      const auto& segs = it->second->at("segments");
      if (s.segment_index < 0 || static_cast<std::size_t>(s.segment_index) >= segs.size())
        throw DataError("subject '" + s.subject_id + "' has no segment " + std::to_string(s.segment_index) +
                        " in the segment manifest");
      const auto& seg = segs.at(static_cast<std::size_t>(s.segment_index));
      table.values(r, c_dur) = seg.at("pause_duration_ratio").get<double>();
      table.values(r, c_tot) = seg.at("pause_total_pauses_ratio").get<double>();
      s.segment_duration_s = seg.at("end_s").get<double>() - seg.at("start_s").get<double>();
      s.recording_duration_s = it->second->at("duration_s").get<double>();
    }
  }
  const auto out = ctx.output(o.require<std::string>("output"));
  detail::write_table(out, table);
  return {{"written", {out.string()}},
          {"rows", table.size()},
          {"subjects", group_subjects(table).size()},
          {"features", table.width()},
          {"warnings", table.warnings}};
}

inline Json run_scale(const Json& j, const StageContext& ctx) {
  const Options o(j, "scale");
  const auto band = tolerance_band(o);
  const bool strict = o.get("strict_train_only", false);
  const FeatureTable train = read_feature_table(ctx.input(o.require<std::string>("train")), FeatureSchema::kAuto);
  std::optional<FeatureTable> test;
  if (o.has("test")) test = read_feature_table(ctx.input(o.require<std::string>("test")), FeatureSchema::kAuto);

  ScalingParams params;
  if (strict) {
    params = fit_strict_train_only(train, band);
  } else if (test) {
    params = fit_with_reconciliation(train, *test, band);
  } else {
    params = fit_minmax(train);
    params.band = band;
  }
  Json written = Json::array();
  const auto seed = o.seed(ctx);
  const auto art = ctx.output(o.require<std::string>("output"));
  detail::write_envelope(art, ArtifactKind::kScaler, seed, detail::provenance(j, seed), to_json(params));
  written.push_back(art.string());
  if (o.has("train_out")) {
    const auto p = ctx.output(o.require<std::string>("train_out"));
    detail::write_table(p, transform_reconciled(train, params));
    written.push_back(p.string());
  }
  if (o.has("test_out")) {
    if (!test) throw ValidationError("scale: test_out requires test");
    const auto p = ctx.output(o.require<std::string>("test_out"));
    detail::write_table(p, transform_reconciled(*test, params));
    written.push_back(p.string());
  }
  std::size_t adjusted = 0, capped = 0, degenerate = 0;
  for (const auto& f : params.features) {
    adjusted += f.adjusted;
    capped += f.capped;
    degenerate += f.degenerate;
  }
  return {{"written", written}, {"adjusted", adjusted}, {"capped", capped}, {"degenerate", degenerate}};
}

inline Json run_select(const Json& j, const StageContext& ctx) {
  const Options o(j, "select");
  SelectionConfig cfg = selection_config(o);
  cfg.seed = o.seed(ctx);
  const FeatureTable table = read_feature_table(ctx.input(o.require<std::string>("input")), FeatureSchema::kAuto);
  detail::as_validation([&] { cfg.validate(table.width()); });
  const auto report = run_selection(table, cfg, ctx.workers);

  Json written = Json::array();
  const auto art = ctx.output(o.require<std::string>("output"));
  detail::write_envelope(art, ArtifactKind::kSelection, cfg.seed, detail::provenance(j, cfg.seed), to_json(report));
  written.push_back(art.string());
  if (o.has("table_out")) {
    const auto p = ctx.output(o.require<std::string>("table_out"));
    detail::write_text(p, format_importance_table(report));
    written.push_back(p.string());
  }
  auto apply = [&](const std::string& in_key, const std::string& out_key, const FeatureTable* loaded) {
    if (!o.has(out_key)) return;
    if (report.selected.empty()) throw DataError("select: no feature passed the significance test");
    const FeatureTable src =
        loaded ? *loaded : read_feature_table(ctx.input(o.require<std::string>(in_key)), FeatureSchema::kAuto);
    const auto p = ctx.output(o.require<std::string>(out_key));
    detail::write_table(p, select_columns(src, report.selected));
    written.push_back(p.string());
  };
  apply("input", "train_out", &table);
  apply("test", "test_out", nullptr);
  return {{"written", written}, {"selected", report.selected}, {"shortfall", report.shortfall}};
}

inline Json run_codebook(const Json& j, const StageContext& ctx) {
  const Options o(j, "codebook");
  const auto k = o.get<std::size_t>("k_per_class", 15);
  const auto restarts = o.get<std::size_t>("restarts", 100);
  ClusterOptions copts;
  copts.max_iterations = o.get("max_iterations", copts.max_iterations);
  const auto seed = o.seed(ctx);
  const FeatureTable table = read_feature_table(ctx.input(o.require<std::string>("input")), FeatureSchema::kAuto);
  const Codebook book = build_codebook(table, k, restarts, seed, copts, ctx.workers);
  const auto art = ctx.output(o.require<std::string>("output"));
  detail::write_envelope(art, ArtifactKind::kCodebook, seed, detail::provenance(j, seed), to_json(book));
  return {{"written", {art.string()}},
          {"shape", {book.words(), book.width()}},
          {"error", book.total_error()}};
}

inline Json run_histograms(const Json& j, const StageContext& ctx) {
  const Options o(j, "histograms");
  const auto env = read_artifact(ctx.input(o.require<std::string>("codebook")), ArtifactKind::kCodebook);
  const Codebook book = codebook_from_json(env.payload);
  const FeatureTable table = read_feature_table(ctx.input(o.require<std::string>("input")), FeatureSchema::kAuto);
  const auto hs = subject_histograms(select_columns(table, book.feature_names), book,
                                     o.get("duration_weighted", false));
  const auto out = ctx.output(o.require<std::string>("output"));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_histograms(out, hs);
  return {{"written", {out.string()}}, {"subjects", hs.size()}, {"words", book.words()}};
}

inline Json run_train(const Json& j, const StageContext& ctx) {
  const Options o(j, "train");
  ClassifierKind kind{};
  detail::as_validation([&] { kind = classifiers::classifier_kind_from_string(o.require<std::string>("kind")); });
  const auto params = classifier_params(o);
  const auto seed = o.seed(ctx);
  const auto hs = read_histograms(ctx.input(o.require<std::string>("input")));
  const auto model = classifiers::train(kind, histogram_matrix(hs), histogram_labels(hs), params, seed);
  if (const auto* svm = std::get_if<classifiers::LinearSvmModel>(&model.impl); svm && !svm->converged)
    throw ConvergenceError("linear SVM did not converge within " + std::to_string(params.linear.max_epochs) +
                           " epochs");
  const auto art = ctx.output(o.require<std::string>("output"));
  detail::write_envelope(art, ArtifactKind::kModel, seed, detail::provenance(j, seed), classifiers::to_json(model));
  const auto pred = classifiers::predict(model, histogram_matrix(hs));
  return {{"written", {art.string()}}, {"training_accuracy", accuracy(pred, histogram_labels(hs))}};
}

inline Json run_predict(const Json& j, const StageContext& ctx) {
  const Options o(j, "predict");
  const auto env = read_artifact(ctx.input(o.require<std::string>("model")), ArtifactKind::kModel);
  const auto model = classifiers::trained_model_from_json(env.payload);
  const auto hs = read_histograms(ctx.input(o.require<std::string>("input")));
  const auto pred = classifiers::predict(model, histogram_matrix(hs));
  const auto out = ctx.output(o.require<std::string>("output"));
  std::ostringstream text;
  text << "subject_id,predicted,label\n";
  bool labeled = !hs.empty();
  for (std::size_t i = 0; i < hs.size(); ++i) {
    text << hs[i].subject_id << ',' << pred[i] << ',' << hs[i].label << '\n';
    labeled = labeled && (hs[i].label == 0 || hs[i].label == 1);
  }
  detail::write_text(out, text.str());
  Json summary = {{"written", {out.string()}}, {"subjects", hs.size()}};
  if (labeled) summary["accuracy"] = accuracy(pred, histogram_labels(hs));
  return summary;
}

inline Json run_evaluate(const Json& j, const StageContext& ctx) {
  const Options o(j, "evaluate");
  const auto cfg = experiment_config(o, ctx, false);
  const FeatureTable train = read_feature_table(ctx.input(o.require<std::string>("train")), FeatureSchema::kAuto);
  const FeatureTable test = read_feature_table(ctx.input(o.require<std::string>("test")), FeatureSchema::kAuto);
  const auto report = holdout_eval(train, test, cfg, ctx.workers);
  const auto out = ctx.output(o.require<std::string>("output"));
  detail::write_envelope(out, ArtifactKind::kReport, cfg.seed, detail::provenance(j, cfg.seed), to_json(report));
  Json written = {out.string()};
  const std::string grid = format_grid(report);
  if (o.has("grid_out")) {
    const auto g = ctx.output(o.require<std::string>("grid_out"));
    detail::write_text(g, grid);
    written.push_back(g.string());
  }
  return {{"written", written}, {"grid", grid}};
}

inline Json run_loso(const Json& j, const StageContext& ctx) {
  const Options o(j, "loso");
  auto cfg = experiment_config(o, ctx, true);
  if (o.has("fixed_selection")) {
    const auto env = read_artifact(ctx.input(o.require<std::string>("fixed_selection")), ArtifactKind::kSelection);
    cfg.fixed_features = importance_report_from_json(env.payload).selected;
    detail::as_validation([&] { cfg.validate(); });
  }
  FeatureTable table = read_feature_table(ctx.input(o.require<std::string>("input")), FeatureSchema::kAuto);
  if (o.has("features")) table = select_columns(table, o.require<std::vector<std::string>>("features"));
  const auto report = loso_cv(table, cfg, ctx.workers);
  const auto out = ctx.output(o.require<std::string>("output"));
  detail::write_envelope(out, ArtifactKind::kReport, cfg.seed, detail::provenance(j, cfg.seed), to_json(report));
  Json written = {out.string()};
  const std::string grid = format_grid(report);
  if (o.has("grid_out")) {
    const auto g = ctx.output(o.require<std::string>("grid_out"));
    detail::write_text(g, grid);
    written.push_back(g.string());
  }
  return {{"written", written}, {"grid", grid}};
}

inline Json run_synth(const Json& j, const StageContext& ctx) {
  const Options o(j, "synth");
  const auto spec = cohort_spec(o, ctx);
  Cohort cohort = generate_cohort(spec);
  if (o.get("shuffle_labels", false)) {
    // Permute labels across subjects; segments follow their subject.
    auto subjects = group_subjects(cohort.table);
    std::vector<int> labels;
    for (const auto& s : subjects) labels.push_back(s.label);
    Rng rng(derive_seed(spec.seed, {0x5u}));
    rng.shuffle(std::span<int>(labels));
    for (std::size_t i = 0; i < subjects.size(); ++i)
      for (auto r : subjects[i].rows) cohort.table.segments[r].label = labels[i];
  }
  Json written = Json::array();
  const auto out = ctx.output(o.require<std::string>("output"));
  detail::write_table(out, cohort.table);
  written.push_back(out.string());
  if (o.has("subjects_out")) {
    const auto p = ctx.output(o.require<std::string>("subjects_out"));
    std::ostringstream text;
    write_subject_manifest(text, cohort.table);
    detail::write_text(p, text.str());
    written.push_back(p.string());
  }
  if (o.has("truth_out")) {
    const auto p = ctx.output(o.require<std::string>("truth_out"));
    write_json_file(p, {{"spec", to_json(spec)}, {"truth", to_json(cohort.truth)}});
    written.push_back(p.string());
  }
  return {{"written", written}, {"rows", cohort.table.size()}, {"informative", cohort.truth.informative_names}};
}

// ---------------------------------------------------------------------------
// Registry

struct StageDef {
  std::string name;
  std::vector<std::string> required;
  std::vector<std::string> optional;
  std::vector<std::string> inputs;   // path-valued keys read by the stage
  std::vector<std::string> outputs;  // path-valued keys written by the stage
  std::function<void(const Json&, const StageContext&)> check;
  std::function<Json(const Json&, const StageContext&)> run;
};

inline const std::vector<std::string>& classifier_param_keys() {
  static const std::vector<std::string> keys{"knn_k",      "lda_ridge",         "rf_trees", "rf_max_leaves",
                                             "linear_c",   "linear_tol",        "linear_max_epochs",
                                             "chi2_c",     "chi2_eps",          "emlm_ridge"};
  return keys;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline const std::vector<StageDef>& stage_registry() {
  static const std::vector<StageDef> defs = [] {
    const std::vector<std::string> experiment{"protocol", "k_sweep",        "repetitions", "restarts",
                                              "classifiers", "max_iterations", "duration_weighted", "seed"};
    std::vector<StageDef> d;
    d.push_back({"segment",
                 {"inputs", "output"},
                 {"threshold_db", "min_speech", "max_pause", "max_segment", "frame", "export_dir"},
                 {"inputs"},
                 {"output"},
                 [](const Json& j, const StageContext&) { segmenter_config(Options(j, "segment")); },
                 run_segment});
    d.push_back({"ingest",
                 {"input", "output"},
                 {"schema", "labels", "segments"},
                 {"input", "labels", "segments"},
                 {"output"},
                 [](const Json& j, const StageContext&) {
                   detail::parse_schema(Options(j, "ingest").get<std::string>("schema", "auto"));
                 },
                 run_ingest});
    d.push_back({"scale",
                 {"train", "output"},
                 {"test", "train_out", "test_out", "lambda", "beta_step", "beta_max", "strict_train_only", "seed"},
                 {"train", "test"},
                 {"output", "train_out", "test_out"},
                 [](const Json& j, const StageContext&) { tolerance_band(Options(j, "scale")); },
                 run_scale});
    d.push_back({"select",
                 {"input", "output"},
                 {"table_out", "train_out", "test", "test_out", "repetitions", "alpha", "k", "trees", "max_leaves",
                  "seed"},
                 {"input", "test"},
                 {"output", "table_out", "train_out", "test_out"},
                 [](const Json& j, const StageContext&) {
                   const Options o(j, "select");
                   auto c = selection_config(o);
                   detail::as_validation([&] { c.validate(std::max<std::size_t>(c.k, 1)); });
                 },
                 run_select});
    d.push_back({"codebook",
                 {"input", "output"},
                 {"k_per_class", "restarts", "max_iterations", "seed"},
                 {"input"},
                 {"output"},
                 [](const Json& j, const StageContext&) {
                   const Options o(j, "codebook");
                   if (o.get<std::size_t>("k_per_class", 15) < 1) throw ValidationError("k_per_class must be >= 1");
                   if (o.get<std::size_t>("restarts", 100) < 1) throw ValidationError("restarts must be >= 1");
                 },
                 run_codebook});
    d.push_back({"histograms",
                 {"codebook", "input", "output"},
                 {"duration_weighted"},
                 {"codebook", "input"},
                 {"output"},
                 [](const Json&, const StageContext&) {},
                 run_histograms});
    d.push_back({"train",
                 {"kind", "input", "output"},
                 concat({"seed"}, classifier_param_keys()),
                 {"input"},
                 {"output"},
                 [](const Json& j, const StageContext&) {
                   detail::as_validation([&] {
                     classifiers::classifier_kind_from_string(Options(j, "train").require<std::string>("kind"));
                   });
                 },
                 run_train});
    d.push_back({"predict",
                 {"model", "input", "output"},
                 {},
                 {"model", "input"},
                 {"output"},
                 [](const Json&, const StageContext&) {},
                 run_predict});
    d.push_back({"evaluate",
                 {"train", "test", "output"},
                 concat(concat({"grid_out"}, experiment), classifier_param_keys()),
                 {"train", "test"},
                 {"output", "grid_out"},
                 [](const Json& j, const StageContext& ctx) { experiment_config(Options(j, "evaluate"), ctx, false); },
                 run_evaluate});
    d.push_back({"loso",
                 {"input", "output"},
                 concat(concat({"grid_out", "aggregation", "preprocessing", "lambda", "beta_step", "beta_max",
                                "selection_repetitions", "selection_alpha", "selection_k", "selection_trees",
                                "selection_max_leaves", "fixed_features", "fixed_selection", "pad_selection",
                                "paper_fast", "features"},
                               experiment),
                        classifier_param_keys()),
                 {"input", "fixed_selection"},
                 {"output", "grid_out"},
                 [](const Json& j, const StageContext& ctx) { experiment_config(Options(j, "loso"), ctx, true); },
                 run_loso});
    d.push_back({"synth",
                 {"output"},
                 {"subjects_out", "truth_out", "subjects_per_class", "min_segments", "max_segments", "features",
                  "informative", "informative_indices", "separation", "subject_sd", "noise_sd", "shuffle_labels",
                  "seed"},
                 {},
                 {"output", "subjects_out", "truth_out"},
                 [](const Json& j, const StageContext& ctx) { cohort_spec(Options(j, "synth"), ctx); },
                 run_synth});
    return d;
  }();
  return defs;
}

inline const StageDef& find_stage(const std::string& name) {
  for (const auto& d : stage_registry())
    if (d.name == name) return d;
  throw ValidationError("unknown stage '" + name + "'");
}

/// Option keys, required keys and value ranges; no file access.
inline void check_options(const StageDef& def, const Json& options, const StageContext& ctx) {
  if (!options.is_object()) throw ValidationError(def.name + ": options must be an object");
  for (const auto& [key, value] : options.items()) {
    const bool known = std::find(def.required.begin(), def.required.end(), key) != def.required.end() ||
                       std::find(def.optional.begin(), def.optional.end(), key) != def.optional.end();
    if (!known) throw ValidationError(def.name + ": unknown option '" + key + "'");
  }
  for (const auto& key : def.required)
    if (!options.contains(key) || options.at(key).is_null())
      throw ValidationError(def.name + ": missing option '" + key + "'");
  def.check(options, ctx);
}

inline Json run_stage(const std::string& name, const Json& options, const StageContext& ctx) {
  const auto& def = find_stage(name);
  check_options(def, options, ctx);
  for (const auto& key : def.inputs) {
    if (!options.contains(key)) continue;
    for (const auto& p : detail::path_list(options.at(key)))
      if (!fs::exists(ctx.input(p))) throw StageError(name + ": input '" + p + "' does not exist");
  }
  return def.run(options, ctx);
}

}  // namespace boaw::stages
