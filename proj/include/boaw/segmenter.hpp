#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "boaw/error.hpp"
#include "boaw/wav.hpp"

namespace boaw {

/// Energy-threshold speech activity settings. Energies are computed on raw
/// 16-bit amplitudes, so 65 dB corresponds to an RMS of about 1778.
struct SegmenterConfig {
  double energy_threshold_db = 65.0;
  double min_speech_s = 0.2;
  double max_pause_s = 0.3;
  double max_segment_s = 10.0;
  double frame_s = 0.01;

  void validate() const {
    if (!(min_speech_s > 0 && max_pause_s > 0 && max_segment_s > 0 && frame_s > 0))
      throw ArgumentError("segmenter durations must be positive");
    if (min_speech_s > max_segment_s) throw ArgumentError("min_speech_s exceeds max_segment_s");
  }
};

inline constexpr double kSilenceFloorDb = -120.0;

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  double preceding_pause_s = 0.0;

  double duration_s() const { return end_s - start_s; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct PauseFeatures {
  double pause_duration_ratio = 0.0;
  double pause_total_pauses_ratio = 0.0;
  friend bool operator==(const PauseFeatures&, const PauseFeatures&) = default;
};

namespace detail {

inline std::size_t frame_length(const AudioBuffer& buffer, const SegmenterConfig& config) {
  const auto len = static_cast<long long>(std::llround(config.frame_s * buffer.sample_rate));
  if (len < 1) throw ArgumentError("frame_s * sample_rate must be at least one sample");
  return static_cast<std::size_t>(len);
}

// Number of whole frames covering a duration, with a small tolerance so that
// 0.3 s / 0.01 s lands on 30 rather than 29.999.
inline long long frames_floor(double seconds, double frame_s) {
  return static_cast<long long>(std::floor(seconds / frame_s + 1e-9));
}

}  // namespace detail

/// Energy of each non-overlapping frame in dB: 10*log10(mean(x^2)).
/// Silent frames report kSilenceFloorDb; a trailing partial frame is ignored.
inline std::vector<double> frame_energy_db(const AudioBuffer& buffer, const SegmenterConfig& config) {
  if (buffer.samples.empty() || buffer.sample_rate <= 0) throw ArgumentError("empty audio buffer");
  const std::size_t len = detail::frame_length(buffer, config);
  const std::size_t frames = buffer.samples.size() / len;
  std::vector<double> out(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = f * len; i < (f + 1) * len; ++i) acc += buffer.samples[i] * buffer.samples[i];
    const double mean = acc / static_cast<double>(len);
    out[f] = mean > 0.0 ? 10.0 * std::log10(mean) : kSilenceFloorDb;
  }
  return out;
}

/// Active-speech segments.
///
/// Frames at or above the threshold form runs; runs whose gap is at most
/// max_pause_s are joined; runs shorter than min_speech_s are dropped; runs
/// longer than max_segment_s are cut into max_segment_s pieces and a short
/// tail piece (below min_speech_s) is dropped as well.
inline std::vector<Segment> detect_segments(const AudioBuffer& buffer, const SegmenterConfig& config) {
  config.validate();
  const auto energy = frame_energy_db(buffer, config);
  if (energy.empty()) throw ArgumentError("audio shorter than one frame");
  const std::size_t len = detail::frame_length(buffer, config);
  const double frame_s = static_cast<double>(len) / buffer.sample_rate;

  struct Run {
    long long begin, end;  // [begin, end) in frames
  };
  std::vector<Run> runs;
  for (std::size_t f = 0; f < energy.size(); ++f) {
    if (energy[f] < config.energy_threshold_db) continue;
    const auto fi = static_cast<long long>(f);
    if (!runs.empty() && runs.back().end == fi) {
      runs.back().end = fi + 1;
    } else {
      runs.push_back({fi, fi + 1});
    }
  }

  const long long max_gap = detail::frames_floor(config.max_pause_s, frame_s);
  std::vector<Run> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.begin - merged.back().end <= max_gap) {
      merged.back().end = r.end;
    } else {
      merged.push_back(r);
    }
  }

  const long long min_len = static_cast<long long>(std::ceil(config.min_speech_s / frame_s - 1e-9));
  const long long max_len = std::max<long long>(1, detail::frames_floor(config.max_segment_s, frame_s));
  std::vector<Run> pieces;
  for (const auto& r : merged) {
    if (r.end - r.begin < min_len) continue;
    for (long long b = r.begin; b < r.end; b += max_len) {
      const long long e = std::min(r.end, b + max_len);
      if (e - b >= min_len) pieces.push_back({b, e});
    }
  }

  std::vector<Segment> out;
  out.reserve(pieces.size());
  double prev_end = 0.0;
  for (const auto& p : pieces) {
    Segment s;
    s.start_s = static_cast<double>(p.begin * static_cast<long long>(len)) / buffer.sample_rate;
    s.end_s = static_cast<double>(p.end * static_cast<long long>(len)) / buffer.sample_rate;
    s.preceding_pause_s = s.start_s - prev_end;
    prev_end = s.end_s;
    out.push_back(s);
  }
  return out;
}

/// Relative pause before each segment. Total pause time is the sum of the
/// preceding pauses; trailing silence after the last segment is excluded.
inline std::vector<PauseFeatures> compute_pause_features(const std::vector<Segment>& segments,
                                                         double recording_duration_s) {
  if (!(recording_duration_s > 0)) throw ArgumentError("recording duration must be positive");
  std::vector<double> pauses(segments.size());
  double prev_end = 0.0, total = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.start_s < prev_end || s.end_s < s.start_s || s.end_s > recording_duration_s + 1e-9)
      throw ArgumentError("segments must be ordered, non-overlapping and inside the recording");
    pauses[i] = s.start_s - prev_end;
    prev_end = s.end_s;
    total += pauses[i];
  }
  std::vector<PauseFeatures> out(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out[i].pause_duration_ratio = pauses[i] / recording_duration_s;
    out[i].pause_total_pauses_ratio = total > 0.0 ? pauses[i] / total : 0.0;
  }
  return out;
}

/// Samples of one segment, rounded back to 16-bit for export.
inline std::vector<std::int16_t> segment_samples(const AudioBuffer& buffer, const Segment& seg) {
  const auto b = static_cast<std::size_t>(std::llround(seg.start_s * buffer.sample_rate));
  const auto e = std::min(buffer.samples.size(), static_cast<std::size_t>(std::llround(seg.end_s * buffer.sample_rate)));
  std::vector<std::int16_t> out;
  out.reserve(e > b ? e - b : 0);
  for (std::size_t i = b; i < e; ++i) {
    const double v = std::clamp(std::round(buffer.samples[i]), -32768.0, 32767.0);
    out.push_back(static_cast<std::int16_t>(v));
  }
  return out;
}

}  // namespace boaw
