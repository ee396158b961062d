#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "boaw/error.hpp"

namespace boaw {

using Json = nlohmann::json;

inline constexpr int kArtifactSchemaVersion = 1;

enum class ArtifactKind { kScaler, kSelection, kCodebook, kModel, kReport };

inline std::string_view to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::kScaler: return "scaler";
    case ArtifactKind::kSelection: return "selection";
    case ArtifactKind::kCodebook: return "codebook";
    case ArtifactKind::kModel: return "model";
    case ArtifactKind::kReport: return "report";
  }
  return "?";
}

inline ArtifactKind artifact_kind_from_string(std::string_view s) {
  for (auto k : {ArtifactKind::kScaler, ArtifactKind::kSelection, ArtifactKind::kCodebook, ArtifactKind::kModel,
                 ArtifactKind::kReport})
    if (to_string(k) == s) return k;
  throw SchemaError("unknown artifact kind '" + std::string(s) + "'");
}

/// Versioned container for every persisted intermediate. `config` holds the
/// full configuration the payload was produced with.
struct ArtifactEnvelope {
  ArtifactKind kind = ArtifactKind::kReport;
  int schema_version = kArtifactSchemaVersion;
  std::uint64_t rng_seed = 0;
  Json config = Json::object();
  Json payload = Json::object();

  friend bool operator==(const ArtifactEnvelope&, const ArtifactEnvelope&) = default;
};

/// FNV-1a over the compact serialization of config and payload.
inline std::string artifact_checksum(const ArtifactEnvelope& e) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(e.config.dump());
  feed("\n");
  feed(e.payload.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Json to_json(const ArtifactEnvelope& e) {
  Json j;
  j["kind"] = to_string(e.kind);
  j["schema_version"] = e.schema_version;
  j["rng_seed"] = e.rng_seed;
  j["config"] = e.config;
  j["payload"] = e.payload;
  j["checksum"] = artifact_checksum(e);
  return j;
}

inline ArtifactEnvelope envelope_from_json(const Json& j, const std::string& origin = "<json>") {
  ArtifactEnvelope e;
  try {
    e.schema_version = j.at("schema_version").get<int>();
    if (e.schema_version > kArtifactSchemaVersion || e.schema_version < 1) {
      throw VersionError(origin + ": artifact schema_version " + std::to_string(e.schema_version) +
                         " is not supported (this build reads up to " + std::to_string(kArtifactSchemaVersion) + ")");
    }
    e.kind = artifact_kind_from_string(j.at("kind").get<std::string>());
    e.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    e.config = j.value("config", Json::object());
    e.payload = j.at("payload");
    const auto stored = j.at("checksum").get<std::string>();
    if (stored != artifact_checksum(e)) throw CorruptionError(origin + ": artifact checksum mismatch");
  } catch (const Json::exception& ex) {
    throw FormatError(origin + ": malformed artifact: " + ex.what());
  }
  return e;
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& ex) {
    throw FormatError(path.string() + ": invalid JSON: " + ex.what());
  }
}

inline void write_artifact(const ArtifactEnvelope& e, const std::filesystem::path& path) {
  write_json_file(path, to_json(e));
}

inline ArtifactEnvelope read_artifact(const std::filesystem::path& path) {
  return envelope_from_json(read_json_file(path), path.string());
}

/// Reads an artifact and checks it has the expected kind.
inline ArtifactEnvelope read_artifact(const std::filesystem::path& path, ArtifactKind expected) {
  auto e = read_artifact(path);
  if (e.kind != expected) {
    throw SchemaError(path.string() + ": expected a " + std::string(to_string(expected)) + " artifact, found " +
                      std::string(to_string(e.kind)));
  }
  return e;
}

}  // namespace boaw
