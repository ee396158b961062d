// boaw: command line front end for the acoustic-word pipeline.
//
// Every subcommand converts its flags into a JSON option object and hands it
// to the same stage function a run-manifest would use.

#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boaw/manifest.hpp"

namespace {

using boaw::Json;
namespace st = boaw::stages;

const std::set<std::string> kBoolKeys{"strict_train_only", "duration_weighted", "pad_selection", "paper_fast",
                                      "shuffle_labels"};
const std::set<std::string> kListKeys{"inputs", "features", "fixed_features", "informative_indices"};

// `synth --features` is a column count; everywhere else it is a column list.
bool is_list(const std::string& stage, const std::string& key) {
  return kListKeys.count(key) > 0 && !(stage == "synth" && key == "features");
}
const std::set<std::string> kStringKeys{"kind",     "schema",   "aggregation", "preprocessing", "protocol",
                                        "k_sweep",  "classifiers", "export_dir"};

const std::map<std::string, std::string> kHelp{
    {"inputs", "WAV recordings"},
    {"input", "input table or artifact"},
    {"output", "output path (relative paths land in --out-dir)"},
    {"train", "training-split feature table"},
    {"test", "test-split feature table"},
    {"train_out", "write the transformed training table here"},
    {"test_out", "write the transformed test table here"},
    {"table_out", "write the ranked importance listing here"},
    {"grid_out", "write the plain-text accuracy grid here"},
    {"truth_out", "write planted ground truth (JSON) here"},
    {"subjects_out", "write the subject manifest (CSV) here"},
    {"export_dir", "also export each segment as a WAV file into this directory"},
    {"threshold_db", "frame energy threshold in dB of raw 16-bit amplitude (default 65)"},
    {"min_speech", "minimum speech run in seconds (default 0.2)"},
    {"max_pause", "longest gap merged into a run, seconds (default 0.3)"},
    {"max_segment", "segments are split at this length, seconds (default 10)"},
    {"frame", "frame length in seconds (default 0.01)"},
    {"schema", "auto, canonical, no_pause or generic"},
    {"labels", "CSV with subject_id,label"},
    {"segments", "segment manifest from `boaw segment`, fills the pause columns"},
    {"lambda", "tolerance band half-width (default 0.1)"},
    {"beta_step", "clamp percentile step, in percent (default 0.05)"},
    {"beta_max", "largest clamp percentile, in percent (default 0.5)"},
    {"strict_train_only", "fit on the training split only and clip test values into the band"},
    {"repetitions", "repetitions (selection: forest pairs, default 100; evaluation: clusterings)"},
    {"selection_repetitions", "per-fold selection: forest pairs (default 100)"},
    {"selection_alpha", "per-fold selection: significance level (default 0.05)"},
    {"selection_k", "per-fold selection: features kept (default 25)"},
    {"selection_trees", "per-fold selection: trees per forest (default 100)"},
    {"selection_max_leaves", "per-fold selection: leaf cap per tree, 0 = unlimited"},
    {"knn_k", "neighbours for knn5 (default 5)"},
    {"lda_ridge", "LDA covariance ridge, relative to its mean diagonal (default 1e-6)"},
    {"rf_trees", "trees in the RF classifier (default 50)"},
    {"rf_max_leaves", "leaf cap per RF classifier tree (default 5)"},
    {"linear_c", "linear SVM cost (default 1)"},
    {"linear_tol", "linear SVM stopping tolerance (default 1e-4)"},
    {"linear_max_epochs", "linear SVM epoch cap (default 10000)"},
    {"chi2_c", "chi2 SVM cost (default 0.25)"},
    {"chi2_eps", "chi2 SVM stopping tolerance (default 1e-3)"},
    {"emlm_ridge", "EMLM ridge (default 1e-8)"},
    {"subjects_per_class", "subjects per class (default 40)"},
    {"min_segments", "fewest segments per subject (default 8)"},
    {"max_segments", "most segments per subject (default 16)"},
    {"informative", "number of informative features (default 5)"},
    {"informative_indices", "explicit informative column indices"},
    {"separation", "class shift on informative features, in noise SDs (default 1)"},
    {"subject_sd", "per-subject offset SD (default 0.3)"},
    {"noise_sd", "per-segment noise SD (default 1)"},
    {"shuffle_labels", "permute subject labels (null cohort)"},
    {"alpha", "significance level (default 0.05)"},
    {"k", "number of features to keep (default 25)"},
    {"trees", "trees per selection forest (default 100)"},
    {"max_leaves", "leaf cap per selection tree, 0 = unlimited"},
    {"k_per_class", "prototypes per class (default 15)"},
    {"restarts", "clustering restarts (default 100)"},
    {"max_iterations", "clustering iteration cap (default 300)"},
    {"codebook", "codebook artifact"},
    {"duration_weighted", "weight histogram counts by segment duration"},
    {"kind", "knn5, lda, rf, linear_svm, chi2_svm or emlm"},
    {"model", "model artifact"},
    {"protocol", "preset: paper_holdout (15+15, 100 reps), paper_loso (11+11, 75 reps, min_error), paper_sweep"},
    {"k_sweep", "k per class: 15, \"5,10\" or \"5:50:5\""},
    {"classifiers", "comma-separated classifier kinds or 'all'"},
    {"aggregation", "mode, min_error or best_of_both (optimistic)"},
    {"preprocessing", "none, per_fold or fixed_selection"},
    {"fixed_selection", "selection artifact whose feature list is frozen across folds"},
    {"fixed_features", "feature list frozen across folds"},
    {"pad_selection", "top up a short per-fold selection with the next-ranked features"},
    {"paper_fast", "cluster once per repetition on all subjects (leaks the held-out subject)"},
    {"features", "restrict the input table to these columns"},
    {"seed", "per-stage seed override"},
};

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  for (auto& c : f)
    if (c == '_') c = '-';
  return f;
}

/// Numbers, booleans and lists typed on the command line become JSON values;
/// anything else stays a string.
Json scalar_value(const std::string& text) {
  try {
    Json j = Json::parse(text);
    if (j.is_number() || j.is_boolean() || j.is_array()) return j;
  } catch (const Json::exception&) {
  }
  return text;
}

struct Bound {
  std::map<std::string, std::string> scalars;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, bool> flags;
};

void bind_stage(CLI::App& sub, const st::StageDef& def, Bound& b) {
  auto add = [&](const std::string& key, bool required) {
    const auto it = kHelp.find(key);
    std::string help = it != kHelp.end() ? it->second : key;
    if (def.name == "synth" && key == "features") help = "number of feature columns (default 25)";
    const std::string name = flag_name(key);
    if (kBoolKeys.count(key)) {
      sub.add_flag(name, b.flags[key], help);
      return;
    }
    CLI::Option* opt = is_list(def.name, key) ? sub.add_option(name, b.lists[key], help)
                                            : sub.add_option(name, b.scalars[key], help);
    if (required) opt->required();
  };
  for (const auto& k : def.required) add(k, true);
  for (const auto& k : def.optional)
    if (k != "seed") add(k, false);  // the global --seed covers it
}

Json collect(const CLI::App& sub, const st::StageDef& def, const Bound& b) {
  Json options = Json::object();
  std::set<std::string> path_keys(def.inputs.begin(), def.inputs.end());
  path_keys.insert(def.outputs.begin(), def.outputs.end());
  for (const auto& [key, value] : b.scalars) {
    if (sub.count(flag_name(key)) == 0) continue;
    options[key] = path_keys.count(key) || kStringKeys.count(key) ? Json(value) : scalar_value(value);
  }
  for (const auto& [key, values] : b.lists) {
    if (sub.count(flag_name(key)) == 0) continue;
    Json arr = Json::array();
    for (const auto& v : values) arr.push_back(key == "informative_indices" ? scalar_value(v) : Json(v));
    options[key] = arr;
  }
  for (const auto& [key, on] : b.flags)
    if (sub.count(flag_name(key)) > 0) options[key] = on;
  return options;
}

void print_summary(const Json& summary) {
  if (summary.contains("grid")) {
    std::cout << summary.at("grid").get<std::string>();
    Json rest = summary;
    rest.erase("grid");
    std::cout << rest.dump(2) << '\n';
  } else {
    std::cout << summary.dump(2) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bag-of-acoustic-words speech classification pipeline"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "RNG seed for every stage (default 0)");
  app.add_option("--workers", workers, "worker threads; results do not depend on it (default 1)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "directory for relative output paths (default .)");

  std::vector<std::pair<CLI::App*, const st::StageDef*>> subs;
  std::vector<std::unique_ptr<Bound>> bounds;
  const std::map<std::string, std::string> descriptions{
      {"segment", "detect speech segments in WAV recordings and compute pause features"},
      {"ingest", "read and normalize a segment feature table"},
      {"scale", "fit min-max scaling with tolerance-band reconciliation"},
      {"select", "random-forest importance + Wilcoxon feature selection"},
      {"codebook", "build per-class K-spatial-medians codebooks"},
      {"histograms", "quantize segments into per-subject word histograms"},
      {"train", "train one classifier on a histogram table"},
      {"predict", "predict labels for a histogram table"},
      {"evaluate", "repeated holdout evaluation over a k sweep"},
      {"loso", "repeated leave-one-subject-out evaluation"},
      {"synth", "generate a synthetic labeled cohort"},
  };
  for (const auto& def : st::stage_registry()) {
    auto* sub = app.add_subcommand(def.name, descriptions.at(def.name));
    sub->fallthrough();
    bounds.push_back(std::make_unique<Bound>());
    bind_stage(*sub, def, *bounds.back());
    subs.emplace_back(sub, &def);
  }
  std::string manifest_path;
  auto* run = app.add_subcommand("run", "validate and execute a JSON or TOML run manifest");
  run->fallthrough();
  run->add_option("manifest", manifest_path, "manifest file (.json or .toml)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(boaw::ExitCode::kValidation);
  }

  try {
    st::StageContext ctx;
    ctx.seed = seed;
    ctx.workers = workers;
    ctx.out_dir = out_dir;
    if (run->parsed()) {
      const auto manifest = st::read_manifest(manifest_path);
      if (manifest.seed && app.count("--seed") == 0) ctx.seed = *manifest.seed;
      if (manifest.workers && app.count("--workers") == 0) ctx.workers = *manifest.workers;
      if (manifest.out_dir && app.count("--out-dir") == 0) ctx.out_dir = *manifest.out_dir;
      ctx.base_dir = std::filesystem::path(manifest_path).parent_path();
      if (ctx.base_dir.empty()) ctx.base_dir = ".";
      if (ctx.out_dir.is_relative() && app.count("--out-dir") == 0) ctx.out_dir = ctx.base_dir / ctx.out_dir;
      const auto result = st::run_manifest(manifest, ctx);
      for (std::size_t i = 0; i < result.summaries.size(); ++i) {
        std::cout << "== stage " << i + 1 << " (" << manifest.stages[i].command << ")\n";
        print_summary(result.summaries[i]);
      }
      return 0;
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i].first->parsed()) continue;
      const Json options = collect(*subs[i].first, *subs[i].second, *bounds[i]);
      std::filesystem::create_directories(ctx.out_dir);
      print_summary(st::run_stage(subs[i].second->name, options, ctx));
      return 0;
    }
  } catch (const boaw::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(boaw::ExitCode::kData);
  }
  return 0;
}
