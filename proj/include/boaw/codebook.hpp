#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boaw/clustering.hpp"
#include "boaw/feature_table.hpp"

namespace boaw {

/// 2K prototypes: K from control segments followed by K from dementia segments.
struct Codebook {
  std::vector<std::string> feature_names;
  Matrix prototypes;
  std::size_t k_per_class = 0;
  std::array<double, 2> class_error{0.0, 0.0};  // J of the winning restart per class
  std::size_t restarts = 0;
  std::uint64_t seed = 0;

  std::size_t words() const { return prototypes.rows(); }
  std::size_t width() const { return prototypes.cols(); }
  double total_error() const { return class_error[0] + class_error[1]; }

  friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// Clusters each class separately and concatenates the prototype blocks.
/// Class c uses the stream derive_seed(seed, {c}).
inline Codebook build_codebook(const FeatureTable& train, std::size_t k_per_class, std::size_t restarts,
                               std::uint64_t seed, const ClusterOptions& opts = {}, std::size_t workers = 1) {
  if (k_per_class < 1) throw ArgumentError("k_per_class must be at least 1");
  const auto y = require_labels(train);
  std::array<std::vector<std::size_t>, 2> rows;
  for (std::size_t i = 0; i < y.size(); ++i) rows[y[i]].push_back(i);

  Codebook book;
  book.feature_names = train.feature_names;
  book.k_per_class = k_per_class;
  book.restarts = restarts;
  book.seed = seed;
  book.prototypes = Matrix(2 * k_per_class, train.width());
  for (int c = 0; c < 2; ++c) {
    if (count_distinct_rows(train.values, rows[c]) < k_per_class) {
      throw ArgumentError("class " + std::to_string(c) + " has fewer than " + std::to_string(k_per_class) +
                          " distinct segment vectors");
    }
    const auto run = k_spatial_medians(train.values, rows[c], k_per_class, restarts,
                                       derive_seed(seed, {static_cast<std::uint64_t>(c)}), opts, workers);
    for (std::size_t p = 0; p < k_per_class; ++p) {
      const auto src = run.prototypes.row(p);
      std::copy(src.begin(), src.end(), book.prototypes.row(c * k_per_class + p).begin());
    }
    book.class_error[c] = run.error;
  }
  return book;
}

/// Word index of the nearest prototype (lowest index on ties).
inline std::size_t quantize(std::span<const double> v, const Codebook& book) {
  if (v.size() != book.width())
    throw SchemaError("vector width " + std::to_string(v.size()) + " does not match codebook width " +
                      std::to_string(book.width()));
  return nearest_prototype(book.prototypes, v);
}

struct SubjectHistogram {
  std::string subject_id;
  int label = kUnknownLabel;
  std::vector<std::size_t> counts;
  std::vector<double> frequencies;

  friend bool operator==(const SubjectHistogram&, const SubjectHistogram&) = default;
};

/// Word histogram of one subject's segments. Frequencies are normalized by the
/// word count, or by total segment duration when `duration_weighted`.
inline SubjectHistogram subject_histogram(const FeatureTable& table, const SubjectRecord& subject,
                                          const Codebook& book, bool duration_weighted = false) {
  if (subject.rows.empty()) throw EmptySubjectError("subject '" + subject.subject_id + "' has no segments");
  if (table.feature_names != book.feature_names) throw SchemaError("table columns do not match the codebook");
  SubjectHistogram h;
  h.subject_id = subject.subject_id;
  h.label = subject.label;
  h.counts.assign(book.words(), 0);
  std::vector<double> mass(book.words(), 0.0);
  double total = 0.0;
  for (auto r : subject.rows) {
    const std::size_t w = quantize(table.values.row(r), book);
    ++h.counts[w];
    const double m = duration_weighted ? table.segments[r].segment_duration_s : 1.0;
    mass[w] += m;
    total += m;
  }
  if (!(total > 0)) throw DataError("subject '" + subject.subject_id + "' has zero total segment duration");
  h.frequencies.resize(book.words());
  for (std::size_t w = 0; w < book.words(); ++w) h.frequencies[w] = mass[w] / total;
  return h;
}

inline std::vector<SubjectHistogram> subject_histograms(const FeatureTable& table, const Codebook& book,
                                                        bool duration_weighted = false) {
  std::vector<SubjectHistogram> out;
  for (const auto& s : group_subjects(table)) out.push_back(subject_histogram(table, s, book, duration_weighted));
  return out;
}

/// Stacks frequencies into an N x 2K matrix plus the label vector.
inline Matrix histogram_matrix(const std::vector<SubjectHistogram>& hs) {
  Matrix m;
  for (const auto& h : hs) m.append_row(h.frequencies);
  return m;
}

inline std::vector<int> histogram_labels(const std::vector<SubjectHistogram>& hs) {
  std::vector<int> y;
  for (const auto& h : hs) y.push_back(h.label);
  return y;
}

inline void write_histograms(const std::filesystem::path& path, const std::vector<SubjectHistogram>& hs) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  const std::size_t words = hs.empty() ? 0 : hs.front().frequencies.size();
  out << "subject_id,label,segments";
  for (std::size_t w = 0; w < words; ++w) out << ",word_" << w;
  out << '\n';
  for (const auto& h : hs) {
    std::size_t n = 0;
    for (auto c : h.counts) n += c;
    out << h.subject_id << ',' << h.label << ',' << n;
    for (double f : h.frequencies) out << ',' << detail::format_double(f);
    out << '\n';
  }
}

/// Reads a histogram table. Counts are not stored on disk and come back empty.
inline std::vector<SubjectHistogram> read_histograms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty histogram table");
  const auto header = detail::split_fields(line, ',');
  if (header.size() < 4 || header[0] != "subject_id" || header[1] != "label" || header[2] != "segments")
    throw SchemaError(path.string() + ": expected header subject_id,label,segments,word_0,...");
  std::vector<SubjectHistogram> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto f = detail::split_fields(line, ',');
    if (f.size() != header.size()) throw DataError(path.string() + ": row " + std::to_string(row) + " has wrong width");
    SubjectHistogram h;
    h.subject_id = f[0];
    h.label = static_cast<int>(detail::parse_number(f[1], row, "label"));
    for (std::size_t c = 3; c < f.size(); ++c) h.frequencies.push_back(detail::parse_number(f[c], row, header[c]));
    out.push_back(std::move(h));
  }
  return out;
}

inline nlohmann::json to_json(const Codebook& b) {
  nlohmann::json protos = nlohmann::json::array();
  for (std::size_t r = 0; r < b.words(); ++r) {
    const auto row = b.prototypes.row(r);
    protos.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"feature_names", b.feature_names},
          {"shape", {b.words(), b.width()}},
          {"k_per_class", b.k_per_class},
          {"class_error", b.class_error},
          {"error", b.total_error()},
          {"restarts", b.restarts},
          {"seed", b.seed},
          {"prototypes", protos}};
}

inline Codebook codebook_from_json(const nlohmann::json& j) {
  Codebook b;
  b.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  b.k_per_class = j.at("k_per_class").get<std::size_t>();
  b.class_error = j.at("class_error").get<std::array<double, 2>>();
  b.restarts = j.at("restarts").get<std::size_t>();
  b.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& row : j.at("prototypes")) b.prototypes.append_row(row.get<std::vector<double>>());
  const auto shape = j.at("shape").get<std::array<std::size_t, 2>>();
  if (shape[0] != b.prototypes.rows() || shape[1] != b.prototypes.cols() || b.words() != 2 * b.k_per_class)
    throw FormatError("codebook shape does not match its prototypes");
  return b;
}

}  // namespace boaw
