#include <cmath>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "boaw/segmenter.hpp"

namespace boaw {
namespace {

using oracle::tone_buffer;

void expect_matches_rules(const AudioBuffer& b, const SegmenterConfig& cfg) {
  const auto got = detect_segments(b, cfg);
  const auto want =
      oracle::rule_segments(b, cfg.energy_threshold_db, cfg.min_speech_s, cfg.max_pause_s, cfg.max_segment_s);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].start_s, want[i].start);
    EXPECT_EQ(got[i].end_s, want[i].end);
    EXPECT_EQ(got[i].preceding_pause_s, want[i].pause);
  }
}

TEST(FrameEnergy, SilenceFullScaleAndDoubling) {
  AudioBuffer b;
  b.sample_rate = 16000;
  b.samples.assign(480, 0.0);
  std::fill(b.samples.begin() + 160, b.samples.begin() + 320, 32767.0);
  std::fill(b.samples.begin() + 320, b.samples.end(), 2 * 1000.0);
  const auto e = frame_energy_db(b, {});
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], kSilenceFloorDb);
  EXPECT_NEAR(e[1], 90.309, 1e-3);
  EXPECT_NEAR(e[1], 20.0 * std::log10(32767.0), 1e-9);
  EXPECT_NEAR(e[2] - 60.0, 20.0 * std::log10(2.0), 1e-9);
}

TEST(FrameEnergy, PartialTrailingFrameIgnored) {
  AudioBuffer b;
  b.sample_rate = 16000;
  b.samples.assign(1000, 5.0);
  EXPECT_EQ(frame_energy_db(b, {}).size(), 6u);
}

TEST(Segmenter, GoldenSilence) {
  const auto b = tone_buffer(3.0, {});
  EXPECT_TRUE(detect_segments(b, {}).empty());
  expect_matches_rules(b, {});
}

TEST(Segmenter, GoldenSingleTone) {
  const auto b = tone_buffer(2.0, {{0.5, 1.5}});
  const auto segs = detect_segments(b, {});
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].start_s, 0.5);
  EXPECT_EQ(segs[0].end_s, 1.5);
  EXPECT_EQ(segs[0].preceding_pause_s, 0.5);
  expect_matches_rules(b, {});
}

TEST(Segmenter, GoldenTwelveSecondSplit) {
  const auto b = tone_buffer(12.0, {{0.0, 12.0}});
  const auto segs = detect_segments(b, {});
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].duration_s(), 10.0);
  EXPECT_EQ(segs[1].start_s, 10.0);
  EXPECT_EQ(segs[1].end_s, 12.0);
  EXPECT_EQ(segs[1].preceding_pause_s, 0.0);
  expect_matches_rules(b, {});
}

TEST(Segmenter, GoldenShortGapMerged) {
  const auto b = tone_buffer(2.5, {{0.5, 1.0}, {1.2, 1.7}});
  const auto segs = detect_segments(b, {});
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].start_s, 0.5);
  EXPECT_EQ(segs[0].end_s, 1.7);
  expect_matches_rules(b, {});
}

TEST(Segmenter, LongGapKeptAndShortBurstDropped) {
  const auto b = tone_buffer(4.0, {{0.2, 0.8}, {1.5, 1.6}, {2.5, 3.0}});
  const auto segs = detect_segments(b, {});
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[1].start_s, 2.5);
  EXPECT_NEAR(segs[1].preceding_pause_s, 2.5 - 0.8, 1e-12);
  expect_matches_rules(b, {});
}

TEST(Segmenter, RandomBurstsMatchRuleOracleAndInvariants) {
  Rng rng(21);
  SegmenterConfig cfg;
  cfg.max_segment_s = 1.5;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::pair<double, double>> spans;
    double t = 0.0;
    while (true) {
      t += 0.01 * static_cast<double>(rng.integer(0, 60));
      const double len = 0.01 * static_cast<double>(rng.integer(1, 250));
      if (t + len > 8.0) break;
      spans.emplace_back(t, t + len);
      t += len;
    }
    const auto b = tone_buffer(8.0, spans);
    expect_matches_rules(b, cfg);
    const auto segs = detect_segments(b, cfg);
    double prev_end = 0.0;
    for (const auto& s : segs) {
      EXPECT_GE(s.start_s, prev_end);
      EXPECT_GE(s.duration_s(), cfg.min_speech_s - cfg.frame_s - 1e-12);
      EXPECT_LE(s.duration_s(), cfg.max_segment_s + 1e-12);
      prev_end = s.end_s;
    }
    EXPECT_LE(prev_end, b.duration_s());
  }
}

TEST(Segmenter, AmplitudeScalingShiftsThreshold) {
  Rng rng(8);
  AudioBuffer b;
  b.sample_rate = 16000;
  // Frame levels kept at least 0.5 dB away from the threshold.
  for (int f = 0; f < 400; ++f) {
    double db = rng.uniform(40.0, 90.0);
    if (std::fabs(db - 65.0) < 0.5) db += 1.0;
    const double amp = std::pow(10.0, db / 20.0);
    for (int i = 0; i < 160; ++i) b.samples.push_back(i % 2 ? amp : -amp);
  }
  const double c = 3.7;
  AudioBuffer scaled = b;
  for (auto& v : scaled.samples) v *= c;
  const auto e1 = frame_energy_db(b, {}), e2 = frame_energy_db(scaled, {});
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_NEAR(e2[i] - e1[i], 20.0 * std::log10(c), 1e-9);
  SegmenterConfig shifted;
  shifted.energy_threshold_db += 20.0 * std::log10(c);
  EXPECT_EQ(detect_segments(b, {}), detect_segments(scaled, shifted));
}

TEST(PauseFeatures, Examples) {
  auto one = compute_pause_features({{0.0, 5.0, 0.0}}, 10.0);
  EXPECT_EQ(one[0], (PauseFeatures{0.0, 0.0}));
  auto two = compute_pause_features({{2.0, 4.0, 2.0}, {6.0, 8.0, 2.0}}, 10.0);
  for (const auto& p : two) {
    EXPECT_DOUBLE_EQ(p.pause_duration_ratio, 0.2);
    EXPECT_DOUBLE_EQ(p.pause_total_pauses_ratio, 0.5);
  }
  auto late = compute_pause_features({{9.0, 10.0, 9.0}}, 10.0);
  EXPECT_DOUBLE_EQ(late[0].pause_duration_ratio, 0.9);
  EXPECT_DOUBLE_EQ(late[0].pause_total_pauses_ratio, 1.0);
}

TEST(PauseFeatures, TotalRatioSumsToOneAndTrailingSilenceExcluded) {
  const auto b = tone_buffer(6.0, {{0.4, 1.0}, {2.0, 2.5}, {3.1, 4.0}});
  const auto segs = detect_segments(b, {});
  ASSERT_EQ(segs.size(), 3u);
  const auto f = compute_pause_features(segs, b.duration_s());
  double sum = 0.0;
  for (const auto& p : f) {
    EXPECT_GE(p.pause_duration_ratio, 0.0);
    EXPECT_LE(p.pause_duration_ratio, 1.0);
    sum += p.pause_total_pauses_ratio;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  const auto none = compute_pause_features({{0.0, 1.0, 0.0}, {1.0, 2.0, 0.0}}, 5.0);
  EXPECT_EQ(none[0].pause_total_pauses_ratio + none[1].pause_total_pauses_ratio, 0.0);
  EXPECT_THROW(compute_pause_features({{2.0, 3.0, 2.0}, {1.0, 1.5, 0.0}}, 5.0), ArgumentError);
}

TEST(SegmenterConfig, RejectsBadDurations) {
  SegmenterConfig c;
  c.min_speech_s = 20.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.frame_s = 0.0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

}  // namespace
}  // namespace boaw
