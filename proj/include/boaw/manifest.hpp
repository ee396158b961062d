#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include "boaw/stages.hpp"

namespace boaw::stages {

/// A stage failure that keeps the underlying exit code and names the stage.
class StageFailure : public Error {
 public:
  StageFailure(const std::string& what, ExitCode code, std::size_t index, std::string command)
      : Error(what, code), index_(index), command_(std::move(command)) {}
  std::size_t index() const { return index_; }
  const std::string& command() const { return command_; }

 private:
  std::size_t index_;
  std::string command_;
};

struct ManifestStage {
  std::string command;
  Json options = Json::object();
};

/// {seed, workers, out_dir, stages: [{command, options}]}. Global values are
/// optional; CLI flags override them.
struct Manifest {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
  std::vector<ManifestStage> stages;
};

namespace detail {

inline Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json j = Json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = node.as_array()) {
    Json j = Json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = node.as_integer()) {
    const auto i = v->get();
    return i >= 0 ? Json(static_cast<std::uint64_t>(i)) : Json(i);
  }
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ValidationError("manifest uses an unsupported TOML value type (dates are not accepted)");
}

}  // namespace detail

inline Manifest manifest_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("manifest must be an object");
  for (const auto& [key, value] : j.items())
    if (key != "seed" && key != "workers" && key != "out_dir" && key != "stages")
      throw ValidationError("manifest: unknown key '" + key + "'");
  Manifest m;
  try {
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) m.workers = j.at("workers").get<std::size_t>();
    if (j.contains("out_dir")) m.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("manifest: seed, workers and out_dir must be a number, number and string");
  }
  if (!j.contains("stages") || !j.at("stages").is_array() || j.at("stages").empty())
    throw ValidationError("manifest: 'stages' must be a non-empty list");
  for (const auto& s : j.at("stages")) {
    if (!s.is_object() || !s.contains("command") || !s.at("command").is_string())
      throw ValidationError("manifest: every stage needs a 'command' string");
    for (const auto& [key, value] : s.items())
      if (key != "command" && key != "options") throw ValidationError("manifest stage: unknown key '" + key + "'");
    m.stages.push_back({s.at("command").get<std::string>(), s.value("options", Json::object())});
  }
  return m;
}

/// JSON or TOML, chosen by file extension.
inline Manifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError(path.string() + ": manifest does not exist");
  const auto ext = path.extension().string();
  if (ext == ".json") {
    try {
      return manifest_from_json(read_json_file(path));
    } catch (const FormatError& e) {
      throw ValidationError(e.what());
    }
  }
  if (ext == ".toml") {
    try {
      return manifest_from_json(detail::toml_to_json(toml::parse_file(path.string())));
    } catch (const toml::parse_error& e) {
      throw ValidationError(path.string() + ": " + std::string(e.description()));
    }
  }
  throw ValidationError(path.string() + ": manifest must end in .json or .toml");
}

namespace detail {

/// Feature count of a table on disk, from its header alone.
inline std::optional<std::size_t> table_width(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string header;
  if (!in || !std::getline(in, header)) return std::nullopt;
  const auto fields = boaw::detail::split_fields(header, boaw::detail::detect_delimiter(header));
  std::size_t n = 0;
  for (const auto& f : fields) n += boaw::detail::reserved_columns().count(f) ? 0 : 1;
  return n;
}

}  // namespace detail

/// Checks every stage before anything runs: commands, option keys and
/// values, input paths (existing or produced by an earlier stage) and
/// feature-count conflicts such as k larger than the table width.
inline void validate_manifest(const Manifest& m, const StageContext& ctx) {
  std::set<std::filesystem::path> produced;
  std::map<std::filesystem::path, std::size_t> widths;  // known feature counts
  auto norm = [](const std::filesystem::path& p) { return p.lexically_normal(); };
  auto width_of = [&](const std::string& p) -> std::optional<std::size_t> {
    const auto out = norm(ctx.output(p));
    if (produced.count(out)) {
      auto it = widths.find(out);
      if (it != widths.end()) return it->second;
      return std::nullopt;
    }
    return detail::table_width(ctx.input(p));
  };

  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    const auto& s = m.stages[i];
    const std::string where = "stage " + std::to_string(i + 1) + " (" + s.command + ")";
    try {
      if (s.command == "run") throw ValidationError("manifests cannot nest 'run'");
      const auto& def = find_stage(s.command);
      check_options(def, s.options, ctx);
      for (const auto& key : def.inputs) {
        if (!s.options.contains(key)) continue;
        for (const auto& p : detail::path_list(s.options.at(key))) {
          if (produced.count(norm(ctx.output(p)))) continue;
          if (!std::filesystem::exists(ctx.input(p))) throw ValidationError("input '" + p + "' does not exist");
        }
      }
      const Options o(s.options, s.command);
      if (s.command == "select") {
        const auto k = o.get<std::size_t>("k", SelectionConfig{}.k);
        if (auto w = width_of(o.require<std::string>("input")); w && k > *w)
          throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(*w) +
                                " features of '" + o.require<std::string>("input") + "'");
      }
      if (s.command == "loso" && o.get<std::string>("preprocessing", "none") == "per_fold") {
        const auto k = o.get<std::size_t>("selection_k", SelectionConfig{}.k);
        if (auto w = width_of(o.require<std::string>("input")); w && k > *w)
          throw ValidationError("selection_k = " + std::to_string(k) + " exceeds the " + std::to_string(*w) +
                                " features of '" + o.require<std::string>("input") + "'");
      }

      for (const auto& key : def.outputs)
        if (s.options.contains(key)) produced.insert(norm(ctx.output(s.options.at(key).get<std::string>())));
      auto set_width = [&](const char* key, std::optional<std::size_t> w) {
        if (w && s.options.contains(key)) widths[norm(ctx.output(s.options.at(key).get<std::string>()))] = *w;
      };
      if (s.command == "synth") set_width("output", o.get<std::size_t>("features", CohortSpec{}.features));
      if (s.command == "scale") {
        const auto w = width_of(o.require<std::string>("train"));
        set_width("train_out", w);
        set_width("test_out", w);
      }
      if (s.command == "select") {
        const auto k = o.get<std::size_t>("k", SelectionConfig{}.k);
        set_width("train_out", k);
        set_width("test_out", k);
      }
    } catch (const Error& e) {
      throw StageFailure(where + ": " + e.what(), ExitCode::kValidation, i, s.command);
    } catch (const nlohmann::json::exception& e) {
      throw StageFailure(where + ": malformed option value (" + std::string(e.what()) + ")", ExitCode::kValidation,
                         i, s.command);
    }
  }
}

struct ManifestResult {
  std::vector<Json> summaries;
};

/// Validates the whole manifest, then runs its stages in order. A failing
/// stage stops the run and is named in the error.
inline ManifestResult run_manifest(const Manifest& m, const StageContext& ctx) {
  validate_manifest(m, ctx);
  std::filesystem::create_directories(ctx.out_dir);
  ManifestResult result;
  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    const auto& s = m.stages[i];
    try {
      result.summaries.push_back(run_stage(s.command, s.options, ctx));
    } catch (const Error& e) {
      throw StageFailure("stage " + std::to_string(i + 1) + " (" + s.command + ") failed: " + e.what(), e.code(), i,
                         s.command);
    }
  }
  return result;
}

}  // namespace boaw::stages
