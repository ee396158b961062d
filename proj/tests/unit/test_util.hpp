#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "boaw/feature_table.hpp"
#include "boaw/random.hpp"
#include "boaw/synth.hpp"

namespace boaw::test {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("boaw_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Small planted cohort used across suites.
inline Cohort small_cohort(std::size_t per_class, std::uint64_t seed, double separation = 2.0,
                           std::size_t features = 6, std::size_t informative = 3) {
  CohortSpec spec;
  spec.subjects_per_class = per_class;
  spec.min_segments = 6;
  spec.max_segments = 10;
  spec.features = features;
  spec.informative = informative;
  spec.separation = separation;
  spec.seed = seed;
  return generate_cohort(spec);
}

/// Subjects [first, last) of each class, by their position in the table.
inline FeatureTable subject_slice(const FeatureTable& t, std::size_t first, std::size_t last) {
  std::vector<std::size_t> rows;
  std::size_t seen[2] = {0, 0};
  for (const auto& s : group_subjects(t)) {
    const auto pos = seen[s.label]++;
    if (pos >= first && pos < last) rows.insert(rows.end(), s.rows.begin(), s.rows.end());
  }
  return select_rows(t, rows);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

}  // namespace boaw::test
