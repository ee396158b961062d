#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "boaw/error.hpp"
#include "boaw/feature_names.hpp"
#include "boaw/matrix.hpp"

namespace boaw {

inline constexpr int kUnknownLabel = -1;

/// Metadata carried by every segment row.
struct SegmentInfo {
  std::string subject_id;
  int segment_index = 0;
  int label = kUnknownLabel;  // 0 = control, 1 = dementia
  double segment_duration_s = 0.0;    // 0 when not supplied
  double recording_duration_s = 0.0;  // 0 when not supplied

  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

/// Per-segment feature vectors, grouped by subject with increasing
/// segment_index inside each subject.
struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<SegmentInfo> segments;
  Matrix values;  // segments.size() x feature_names.size()
  std::vector<std::string> warnings;

  std::size_t size() const { return segments.size(); }
  std::size_t width() const { return feature_names.size(); }

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
      if (feature_names[i] == name) return i;
    return std::nullopt;
  }

  bool operator==(const FeatureTable& o) const {
    return feature_names == o.feature_names && segments == o.segments && values == o.values;
  }
};

/// One person: label, recording length and the table rows holding their segments.
struct SubjectRecord {
  std::string subject_id;
  int label = kUnknownLabel;
  double recording_duration_s = 0.0;
  std::vector<std::size_t> rows;
};

enum class FeatureSchema {
  kAuto,             // canonical if every eGeMAPS name is present, else generic
  kCanonical,        // 88 eGeMAPS + 2 pause columns
  kCanonicalNoPause, // 88 eGeMAPS columns
  kGeneric,          // every non-reserved column, in file order
};

/// Data error pinned to one cell. `row` is the 1-based data row (header excluded).
class CellDataError : public DataError {
 public:
  CellDataError(std::size_t row, std::string column, const std::string& what)
      : DataError(what), row_(row), column_(std::move(column)) {}
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

namespace detail {

inline const std::set<std::string, std::less<>>& reserved_columns() {
  static const std::set<std::string, std::less<>> names = {
      "subject_id", "segment_index", "label", "segment_duration", "recording_duration", "name", "frameTime"};
  return names;
}

inline char detect_delimiter(const std::string& header) {
  const auto commas = std::count(header.begin(), header.end(), ',');
  const auto semis = std::count(header.begin(), header.end(), ';');
  return semis > commas ? ';' : ',';
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == delim && !quoted) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t'");
    const auto e = f.find_last_not_of(" \t'");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    // from_chars rejects a few spellings strtod accepts ("+1", "nan", "inf").
    char* end = nullptr;
    v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
      throw CellDataError(row, column,
                          "unparsable value '" + cell + "' at row " + std::to_string(row) + ", column \"" + column + "\"");
    }
  }
  if (!std::isfinite(v)) {
    throw CellDataError(row, column,
                        "non-finite value at row " + std::to_string(row) + ", column \"" + column + "\"");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Sorts rows into subject groups (first-appearance order of subjects,
/// ascending segment_index inside a subject) and validates the grouping.
inline void group_rows_by_subject(FeatureTable& table) {
  std::unordered_map<std::string, std::size_t> first_seen;
  for (std::size_t i = 0; i < table.segments.size(); ++i)
    first_seen.emplace(table.segments[i].subject_id, first_seen.size());
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = table.segments[a];
    const auto& sb = table.segments[b];
    const auto fa = first_seen.at(sa.subject_id), fb = first_seen.at(sb.subject_id);
    if (fa != fb) return fa < fb;
    return sa.segment_index < sb.segment_index;
  });
  std::vector<SegmentInfo> segs;
  segs.reserve(order.size());
  for (auto i : order) segs.push_back(table.segments[i]);
  table.values = table.values.select_rows(order);
  table.segments = std::move(segs);
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& prev = table.segments[i - 1];
    const auto& cur = table.segments[i];
    if (prev.subject_id != cur.subject_id) continue;
    if (prev.segment_index == cur.segment_index)
      throw DataError("subject '" + cur.subject_id + "' repeats segment_index " + std::to_string(cur.segment_index));
    if (prev.label != cur.label)
      throw DataError("subject '" + cur.subject_id + "' has segments with different labels");
  }
}

/// Parses a delimited feature table from a stream.
inline FeatureTable parse_feature_table(std::istream& in, FeatureSchema schema = FeatureSchema::kAuto,
                                        const std::string& origin = "<stream>") {
  std::string header_line;
  if (!std::getline(in, header_line)) throw SchemaError(origin + ": empty feature table");
  const char delim = detail::detect_delimiter(header_line);
  std::vector<std::string> header = detail::split_fields(header_line, delim);
  for (auto& h : header)
    if (auto alias = canonical_alias(h)) h = std::string(*alias);

  std::map<std::string, std::size_t, std::less<>> pos;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!pos.emplace(header[i], i).second) throw SchemaError(origin + ": duplicate column '" + header[i] + "'");
  }

  FeatureTable table;
  auto require = [&](std::string_view name) {
    if (!pos.count(name)) throw SchemaError(origin + ": missing required column '" + std::string(name) + "'");
  };
  require("subject_id");
  require("segment_index");

  if (schema == FeatureSchema::kAuto) {
    const bool all_egemaps = std::all_of(kCanonicalFeatureNames.begin(), kCanonicalFeatureNames.begin() + kEgemapsFeatureCount,
                                         [&](std::string_view n) { return pos.count(n) > 0; });
    if (all_egemaps) {
      const bool pause = pos.count(kPauseDurationRatio) && pos.count(kPauseTotalPausesRatio);
      schema = pause ? FeatureSchema::kCanonical : FeatureSchema::kCanonicalNoPause;
    } else {
      schema = FeatureSchema::kGeneric;
    }
  }

  std::vector<std::size_t> feature_cols;
  if (schema == FeatureSchema::kGeneric) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (detail::reserved_columns().count(header[i])) continue;
      table.feature_names.push_back(header[i]);
      feature_cols.push_back(i);
    }
  } else {
    const std::size_t n = schema == FeatureSchema::kCanonical ? kCanonicalFeatureCount : kEgemapsFeatureCount;
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < n; ++i) {
      auto it = pos.find(kCanonicalFeatureNames[i]);
      if (it == pos.end()) {
        missing.emplace_back(kCanonicalFeatureNames[i]);
        continue;
      }
      table.feature_names.emplace_back(kCanonicalFeatureNames[i]);
      feature_cols.push_back(it->second);
    }
    if (!missing.empty()) {
      std::string msg = origin + ": missing " + std::to_string(missing.size()) + " canonical column(s):";
      for (const auto& m : missing) msg += " " + m;
      throw SchemaError(msg);
    }
    std::set<std::size_t> used(feature_cols.begin(), feature_cols.end());
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (used.count(i) || detail::reserved_columns().count(header[i])) continue;
      table.warnings.push_back("ignoring unknown column '" + header[i] + "'");
    }
  }
  if (table.feature_names.empty()) throw SchemaError(origin + ": no feature columns");

  auto opt_col = [&](std::string_view name) -> std::optional<std::size_t> {
    auto it = pos.find(name);
    return it == pos.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  };
  const std::size_t c_subject = pos.at("subject_id"), c_index = pos.at("segment_index");
  const auto c_label = opt_col("label"), c_segdur = opt_col("segment_duration"), c_recdur = opt_col("recording_duration");

  std::string line;
  std::size_t row = 0;
  std::vector<double> values(feature_cols.size());
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto fields = detail::split_fields(line, delim);
    if (fields.size() != header.size()) {
      throw DataError(origin + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    SegmentInfo info;
    info.subject_id = fields[c_subject];
    if (info.subject_id.empty()) throw CellDataError(row, "subject_id", "empty subject_id at row " + std::to_string(row));
    const double idx = detail::parse_number(fields[c_index], row, "segment_index");
    if (idx != std::floor(idx) || idx < 0)
      throw CellDataError(row, "segment_index", "segment_index must be a non-negative integer at row " + std::to_string(row));
    info.segment_index = static_cast<int>(idx);
    if (c_label && !fields[*c_label].empty()) {
      const double lab = detail::parse_number(fields[*c_label], row, "label");
      if (lab != 0.0 && lab != 1.0 && lab != kUnknownLabel)
        throw CellDataError(row, "label", "label must be 0 or 1 at row " + std::to_string(row));
      info.label = static_cast<int>(lab);
    }
    if (c_segdur) info.segment_duration_s = detail::parse_number(fields[*c_segdur], row, "segment_duration");
    if (c_recdur) info.recording_duration_s = detail::parse_number(fields[*c_recdur], row, "recording_duration");
    for (std::size_t j = 0; j < feature_cols.size(); ++j)
      values[j] = detail::parse_number(fields[feature_cols[j]], row, table.feature_names[j]);
    table.segments.push_back(std::move(info));
    table.values.append_row(values);
  }
  if (table.values.cols() == 0) table.values = Matrix(0, table.feature_names.size());
  group_rows_by_subject(table);
  return table;
}

inline FeatureTable read_feature_table(const std::filesystem::path& path, FeatureSchema schema = FeatureSchema::kAuto) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return parse_feature_table(in, schema, path.string());
}

/// Canonical eGeMAPS ingestion, with or without the two pause columns.
inline FeatureTable read_feature_table(const std::filesystem::path& path, bool expect_pause_features) {
  return read_feature_table(path, expect_pause_features ? FeatureSchema::kCanonical : FeatureSchema::kCanonicalNoPause);
}

inline void write_feature_table(std::ostream& out, const FeatureTable& table) {
  const bool durations = std::any_of(table.segments.begin(), table.segments.end(), [](const SegmentInfo& s) {
    return s.segment_duration_s != 0.0 || s.recording_duration_s != 0.0;
  });
  out << "subject_id,segment_index,label";
  if (durations) out << ",segment_duration,recording_duration";
  for (const auto& n : table.feature_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& s = table.segments[i];
    out << s.subject_id << ',' << s.segment_index << ',' << s.label;
    if (durations) out << ',' << detail::format_double(s.segment_duration_s) << ',' << detail::format_double(s.recording_duration_s);
    for (double v : table.values.row(i)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline void write_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  write_feature_table(out, table);
}

/// Subjects in table order. Requires rows to be grouped (as produced by the readers).
inline std::vector<SubjectRecord> group_subjects(const FeatureTable& table) {
  std::vector<SubjectRecord> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& s = table.segments[i];
    if (out.empty() || out.back().subject_id != s.subject_id) {
      for (const auto& prev : out)
        if (prev.subject_id == s.subject_id) throw DataError("rows of subject '" + s.subject_id + "' are not contiguous");
      out.push_back({s.subject_id, s.label, s.recording_duration_s, {}});
    }
    out.back().rows.push_back(i);
  }
  return out;
}

/// Rows picked by index; metadata follows the rows.
inline FeatureTable select_rows(const FeatureTable& table, std::span<const std::size_t> rows) {
  FeatureTable out;
  out.feature_names = table.feature_names;
  out.values = table.values.select_rows(rows);
  out.segments.reserve(rows.size());
  for (auto r : rows) out.segments.push_back(table.segments[r]);
  return out;
}

/// Keeps only the subjects whose id satisfies `keep`.
template <typename Pred>
FeatureTable filter_subjects(const FeatureTable& table, Pred keep) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.size(); ++i)
    if (keep(table.segments[i].subject_id)) rows.push_back(i);
  return select_rows(table, rows);
}

/// Column subset by name, in the order given.
inline FeatureTable select_columns(const FeatureTable& table, std::span<const std::string> names) {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) {
    auto c = table.column_index(n);
    if (!c) throw SchemaError("feature table has no column '" + n + "'");
    idx.push_back(*c);
  }
  FeatureTable out;
  out.feature_names.assign(names.begin(), names.end());
  out.segments = table.segments;
  out.values = table.values.select_cols(idx);
  return out;
}

/// Per-row labels; throws when any row is unlabeled.
inline std::vector<int> require_labels(const FeatureTable& table) {
  std::vector<int> y(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    y[i] = table.segments[i].label;
    if (y[i] != 0 && y[i] != 1)
      throw DataError("segment " + std::to_string(i) + " of subject '" + table.segments[i].subject_id + "' has no label");
  }
  return y;
}

}  // namespace boaw
