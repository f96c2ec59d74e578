#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mslm/embedding.hpp"
#include "mslm/geometry.hpp"
#include "mslm/heatmap.hpp"

namespace mslm {

/// Mono PCM in [-1, 1]; start_time is on the odometry clock.
struct AudioTrack {
  std::vector<float> samples;
  double sample_rate = 16000.0;
  double start_time = 0.0;

  double duration() const { return samples.size() / sample_rate; }
  double time_of(std::size_t sample) const { return start_time + sample / sample_rate; }
};

struct GateParams {
  double threshold_db = -10.0;
  double attack_ms = 250.0;
  double hold_ms = 1000.0;
  double release_ms = 170.0;
  double window_ms = 10.0;  // RMS level window
};

/// Per-sample gain in [0, 1]. Level is the RMS of the 10 ms block holding the
/// sample, in dB = 20·log10(rms). The gate opens (gain ramps to 1 over the
/// attack time) while the level is at or above threshold and stays open for
/// the hold time after it drops; then gain ramps to 0 over the release time.
std::vector<double> gate_envelope(const AudioTrack& track, const GateParams& params = {});
AudioTrack noise_gate(const AudioTrack& track, const GateParams& params = {});

struct TimeSpan {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const TimeSpan&) const = default;
};

struct SilenceParams {
  double threshold = 0.1;       // peak amplitude per frame
  double min_silence_ms = 500.0;
  double frame_ms = 10.0;
};

/// Maximal loud runs, split where the frame peak stays at or below the
/// threshold for at least min_silence. Ordered and disjoint.
std::vector<TimeSpan> split_on_silence(const AudioTrack& track, const SilenceParams& params = {});

struct OdometrySample {
  double time = 0.0;
  Pose pose;
};
/// Sorted by time.
using Odometry = std::vector<OdometrySample>;

/// Pose with the nearest timestamp; nullopt outside [first, last] time.
std::optional<Pose> pose_at(const Odometry& odom, double t);

/// (time, pose, embedding) entries: audio segments, or frames for area queries.
struct PoseFeatureEntry {
  double time = 0.0;
  Pose pose;
  Embedding embedding;
};

struct PoseFeatureDB {
  int dim = 0;
  std::vector<PoseFeatureEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

struct AudioSegment {
  TimeSpan span;
  Embedding embedding;
  Pose pose;
};

using AudioEmbedder = std::function<Embedding(const TimeSpan&, std::span<const float>)>;

/// Embeds each segment and pairs it with the pose at its start time. Throws
/// InvalidArgument naming the first segment outside the odometry range.
PoseFeatureDB build_audio_db(const AudioTrack& track, std::span<const TimeSpan> segments,
                             const AudioEmbedder& embed, const Odometry& odom);

/// Cosine scores of every entry against the query, min-max normalized to
/// [0, 1] (all 1 when the scores are equal), placed at the entry positions.
std::vector<ScoredPosition> score_entries(const PoseFeatureDB& db, std::span<const double> query,
                                          const GridSpec& spec);

/// Scored heatmap over the db; nullopt (no target) when the db is empty.
std::optional<Heatmap> audio_query_heatmap(const PoseFeatureDB& db, std::span<const double> query,
                                           double eps, const GridSpec& spec);

void save(const PoseFeatureDB& db, const std::filesystem::path& path);
PoseFeatureDB load_pose_db(const std::filesystem::path& path);

/// PCM16 or float32 WAV; multi-channel input is rejected.
AudioTrack read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioTrack& track, bool float32 = true);

}  // namespace mslm
