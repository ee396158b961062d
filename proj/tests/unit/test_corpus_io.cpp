#include <algorithm>
#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "boaw/artifact.hpp"
#include "boaw/codebook.hpp"
#include "boaw/feature_names.hpp"
#include "boaw/feature_table.hpp"
#include "boaw/scaler.hpp"
#include "boaw/wav.hpp"
#include "test_util.hpp"

namespace boaw {
namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Wav, SilenceDecodesToZeros) {
  const std::vector<std::int16_t> pcm(16000, 0);
  const auto buf = decode_wav(bytes_of(encode_wav(pcm, 1, 16000)));
  EXPECT_EQ(buf.sample_rate, 16000);
  ASSERT_EQ(buf.samples.size(), 16000u);
  EXPECT_TRUE(std::all_of(buf.samples.begin(), buf.samples.end(), [](double v) { return v == 0.0; }));
  EXPECT_DOUBLE_EQ(buf.duration_s(), 1.0);
}

TEST(Wav, OpposedStereoChannelsCancel) {
  std::vector<std::int16_t> pcm;
  for (int i = 0; i < 800; ++i) {
    pcm.push_back(100);
    pcm.push_back(-100);
  }
  const auto buf = decode_wav(bytes_of(encode_wav(pcm, 2, 8000)));
  ASSERT_EQ(buf.samples.size(), 800u);
  for (double v : buf.samples) EXPECT_EQ(v, 0.0);
}

TEST(Wav, TruncatedDataNamesByteCounts) {
  const std::vector<std::int16_t> pcm(1000, 7);
  auto bytes = bytes_of(encode_wav(pcm, 1, 16000));
  bytes.resize(bytes.size() - 300);
  try {
    decode_wav(bytes);
    FAIL() << "truncated file accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 2000 bytes, found 1700"), std::string::npos) << e.what();
  }
}

TEST(Wav, RejectsNonPcmAndEightBit) {
  const std::vector<std::int16_t> pcm(10, 0);
  auto floaty = bytes_of(encode_wav(pcm, 1, 16000));
  floaty[20] = 3;  // format tag: IEEE float
  EXPECT_THROW(decode_wav(floaty), UnsupportedFormatError);
  auto eight = bytes_of(encode_wav(pcm, 1, 16000));
  eight[34] = 8;
  try {
    decode_wav(eight);
    FAIL();
  } catch (const UnsupportedFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bits_per_sample=8"), std::string::npos);
  }
  EXPECT_THROW(decode_wav(bytes_of("RIFX")), FormatError);
}

TEST(Wav, DownmixIsLinear) {
  Rng rng(11);
  std::vector<std::int16_t> a, b, sum;
  for (int i = 0; i < 2000; ++i) {
    const auto x = static_cast<std::int16_t>(rng.integer(-12000, 12000));
    const auto y = static_cast<std::int16_t>(rng.integer(-12000, 12000));
    a.push_back(x);
    b.push_back(y);
    sum.push_back(static_cast<std::int16_t>(x + y));
  }
  const auto da = decode_wav(bytes_of(encode_wav(a, 2, 16000)));
  const auto db = decode_wav(bytes_of(encode_wav(b, 2, 16000)));
  const auto ds = decode_wav(bytes_of(encode_wav(sum, 2, 16000)));
  for (std::size_t i = 0; i < ds.samples.size(); ++i) EXPECT_EQ(ds.samples[i], da.samples[i] + db.samples[i]);
}

TEST(Wav, FileRoundTrip) {
  test::TempDir dir;
  const std::vector<std::int16_t> pcm{0, 1, -1, 32767, -32768, 1234};
  write_wav(dir / "x.wav", pcm, 1, 22050);
  const auto buf = read_wav(dir / "x.wav");
  EXPECT_EQ(buf.sample_rate, 22050);
  ASSERT_EQ(buf.samples.size(), pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) EXPECT_EQ(buf.samples[i], pcm[i]);
  EXPECT_THROW(read_wav(dir / "missing.wav"), FormatError);
}

// --- feature tables -------------------------------------------------------

std::string canonical_csv(std::size_t width, const std::vector<std::string>& rows_prefix,
                          const std::vector<std::string>& header_order = {}, char delim = ',') {
  std::vector<std::string> names = header_order;
  if (names.empty())
    for (std::size_t i = 0; i < width; ++i) names.emplace_back(kCanonicalFeatureNames[i]);
  std::ostringstream out;
  out << "subject_id" << delim << "segment_index" << delim << "label";
  for (const auto& n : names) out << delim << n;
  out << '\n';
  for (std::size_t r = 0; r < rows_prefix.size(); ++r) {
    out << rows_prefix[r];
    for (const auto& n : names) {
      // Value depends on the column name so permuted headers carry the same data.
      const auto idx = static_cast<std::size_t>(
          std::find(kCanonicalFeatureNames.begin(), kCanonicalFeatureNames.end(), n) - kCanonicalFeatureNames.begin());
      out << delim << (static_cast<double>(idx) + 0.25 * static_cast<double>(r));
    }
    out << '\n';
  }
  return out.str();
}

TEST(FeatureTable, CanonicalNinetyColumnsGroupedBySubject) {
  std::istringstream in(canonical_csv(90, {"s2,0,1", "s1,0,0", "s2,1,1"}));
  const auto t = parse_feature_table(in);
  EXPECT_EQ(t.width(), 90u);
  ASSERT_EQ(t.size(), 3u);
  const auto subjects = group_subjects(t);
  ASSERT_EQ(subjects.size(), 2u);
  EXPECT_EQ(subjects[0].subject_id, "s2");
  EXPECT_EQ(subjects[0].rows.size(), 2u);
  EXPECT_EQ(subjects[1].label, 0);
  EXPECT_EQ(t.feature_names.back(), "pauseTotalPausesRatio");
}

TEST(FeatureTable, EightyEightColumnsWithoutPauseFeatures) {
  test::TempDir dir;
  test::spit(dir / "t.csv", canonical_csv(88, {"a,0,0", "b,0,1"}));
  const auto t = read_feature_table(dir / "t.csv", false);
  EXPECT_EQ(t.width(), kEgemapsFeatureCount);
  EXPECT_THROW(read_feature_table(dir / "t.csv", true), SchemaError);
}

TEST(FeatureTable, NanCellReportsCoordinates) {
  auto text = canonical_csv(90, {"a,0,0", "a,1,0", "b,0,1"});
  // Row 2 (second data row), loudness_sma3_amean is column index 10 -> value "10.25".
  const auto pos = text.find(",10.25,");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 7, ",nan,");
  std::istringstream in(text);
  try {
    parse_feature_table(in);
    FAIL() << "NaN accepted";
  } catch (const CellDataError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), "loudness_sma3_amean");
    EXPECT_EQ(e.code(), ExitCode::kData);
  }
}

TEST(FeatureTable, ColumnOrderDoesNotMatter) {
  std::vector<std::string> shuffled;
  for (std::size_t i = 0; i < 90; ++i) shuffled.emplace_back(kCanonicalFeatureNames[i]);
  Rng rng(5);
  rng.shuffle(std::span<std::string>(shuffled));
  std::istringstream a(canonical_csv(90, {"x,0,1", "x,1,1", "y,0,0"}));
  std::istringstream b(canonical_csv(90, {"x,0,1", "x,1,1", "y,0,0"}, shuffled));
  EXPECT_EQ(parse_feature_table(a), parse_feature_table(b));
}

TEST(FeatureTable, SemicolonDelimiterAndAlias) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 90; ++i) names.emplace_back(kCanonicalFeatureNames[i]);
  auto text = canonical_csv(90, {"x;0;1", "y;0;0"}, names, ';');
  const auto pos = text.find("pauseDurationRatio");
  text.replace(pos, std::strlen("pauseDurationRatio"), "pauseTotalDurationRatio");
  std::istringstream in(text);
  const auto t = parse_feature_table(in);
  EXPECT_EQ(t.width(), 90u);
  EXPECT_TRUE(t.column_index("pauseDurationRatio").has_value());
}

TEST(FeatureTable, MissingCanonicalColumnsAreListed) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 90; ++i) names.emplace_back(kCanonicalFeatureNames[i]);
  names.erase(names.begin() + 3);
  std::istringstream in(canonical_csv(0, {"x,0,1"}, names));
  try {
    parse_feature_table(in, FeatureSchema::kCanonical);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("F0semitoneFrom27.5Hz_sma3nz_percentile50.0"), std::string::npos);
  }
}

TEST(FeatureTable, UnknownExtraColumnWarnsOnly) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 90; ++i) names.emplace_back(kCanonicalFeatureNames[i]);
  auto text = canonical_csv(90, {"x,0,1"}, names);
  text.insert(text.find('\n'), ",extra");
  text.insert(text.size() - 1, ",1");
  std::istringstream in(text);
  const auto t = parse_feature_table(in);
  EXPECT_EQ(t.width(), 90u);
  ASSERT_EQ(t.warnings.size(), 1u);
}

TEST(FeatureTable, CanonicalNameListIsFrozen) {
  EXPECT_EQ(kCanonicalFeatureNames.size(), 90u);
  std::set<std::string_view> unique(kCanonicalFeatureNames.begin(), kCanonicalFeatureNames.end());
  EXPECT_EQ(unique.size(), 90u);
  EXPECT_EQ(kCanonicalFeatureNames[0], "F0semitoneFrom27.5Hz_sma3nz_amean");
  EXPECT_EQ(kCanonicalFeatureNames[87], "equivalentSoundLevel_dBp");
  EXPECT_EQ(kCanonicalFeatureNames[88], "pauseDurationRatio");
  EXPECT_EQ(kCanonicalFeatureNames[89], "pauseTotalPausesRatio");
  for (std::string_view n : {"slopeV0-500_sma3nz_amean", "slopeV500-1500_sma3nz_amean", "spectralFlux_sma3_amean",
                             "F3frequency_sma3nz_amean", "mfcc4_sma3_amean", "HNRdBACF_sma3nz_amean"})
    EXPECT_TRUE(unique.count(n)) << n;
}

TEST(FeatureTable, WriteReadRoundTrip) {
  test::TempDir dir;
  const auto c = test::small_cohort(3, 1);
  write_feature_table(dir / "t.csv", c.table);
  EXPECT_EQ(read_feature_table(dir / "t.csv"), c.table);
}

// --- artifacts -------------------------------------------------------------

TEST(Artifact, ScalerRoundTripIsIdentity) {
  test::TempDir dir;
  const auto c = test::small_cohort(4, 2);
  const auto params = fit_with_reconciliation(test::subject_slice(c.table, 0, 2), test::subject_slice(c.table, 2, 4));
  ArtifactEnvelope e;
  e.kind = ArtifactKind::kScaler;
  e.rng_seed = 0xfeedbeefcafeULL;
  e.config = {{"lambda", 0.1}};
  e.payload = to_json(params);
  write_artifact(e, dir / "s.json");
  const auto back = read_artifact(dir / "s.json", ArtifactKind::kScaler);
  EXPECT_EQ(back, e);
  EXPECT_EQ(scaling_params_from_json(back.payload), params);
  EXPECT_THROW(read_artifact(dir / "s.json", ArtifactKind::kModel), SchemaError);
}

TEST(Artifact, FutureVersionRejected) {
  test::TempDir dir;
  ArtifactEnvelope e;
  auto j = to_json(e);
  j["schema_version"] = 999;
  write_json_file(dir / "a.json", j);
  try {
    read_artifact(dir / "a.json");
    FAIL();
  } catch (const VersionError& err) {
    EXPECT_EQ(err.code(), ExitCode::kValidation);
  }
}

TEST(Artifact, ChecksumMismatchIsCorruption) {
  test::TempDir dir;
  ArtifactEnvelope e;
  e.payload = {{"x", 1}};
  auto j = to_json(e);
  j["payload"]["x"] = 2;
  write_json_file(dir / "a.json", j);
  EXPECT_THROW(read_artifact(dir / "a.json"), CorruptionError);
}

TEST(Artifact, CodebookRecordsShapeAndError) {
  CohortSpec spec;
  spec.subjects_per_class = 11;
  spec.features = 25;
  spec.seed = 4;
  const auto c = generate_cohort(spec);
  const auto book = build_codebook(c.table, 11, 5, 9);
  const auto j = to_json(book);
  EXPECT_EQ(j.at("shape"), nlohmann::json({22, 25}));
  EXPECT_GT(j.at("error").get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j.at("error").get<double>(), book.class_error[0] + book.class_error[1]);
  EXPECT_EQ(codebook_from_json(j), book);
}

}  // namespace
}  // namespace boaw
