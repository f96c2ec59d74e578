#include "mslm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mslm/binio.hpp"
#include "mslm/error.hpp"

namespace mslm {

namespace {

std::size_t ms_to_samples(double ms, double rate) {
  return static_cast<std::size_t>(std::llround(ms * 1e-3 * rate));
}

}  // namespace

std::vector<double> gate_envelope(const AudioTrack& track, const GateParams& p) {
  if (p.attack_ms < 0 || p.hold_ms < 0 || p.release_ms < 0) {
    throw InvalidArgument("gate attack/hold/release must be >= 0");
  }
  if (!(track.sample_rate > 0)) throw InvalidArgument("sample rate must be > 0");
  const std::size_t n = track.samples.size();
  std::vector<double> gain(n, 0.0);
  if (n == 0) return gain;

  const std::size_t window = std::max<std::size_t>(1, ms_to_samples(p.window_ms, track.sample_rate));
  const std::size_t attack = ms_to_samples(p.attack_ms, track.sample_rate);
  const std::size_t hold = ms_to_samples(p.hold_ms, track.sample_rate);
  const std::size_t release = ms_to_samples(p.release_ms, track.sample_rate);
  const double up = attack ? 1.0 / static_cast<double>(attack) : 1.0;
  const double down = release ? 1.0 / static_cast<double>(release) : 1.0;

  double g = 0.0;
  std::size_t hold_left = 0;
  for (std::size_t block = 0; block < n; block += window) {
    const std::size_t end = std::min(n, block + window);
    double energy = 0.0;
    for (std::size_t i = block; i < end; ++i) energy += double(track.samples[i]) * track.samples[i];
    const double rms = std::sqrt(energy / static_cast<double>(end - block));
    const double level_db = rms > 0.0 ? 20.0 * std::log10(rms) : -std::numeric_limits<double>::infinity();
    const bool loud = level_db >= p.threshold_db;
    for (std::size_t i = block; i < end; ++i) {
      if (loud) {
        hold_left = hold;
        g = std::min(1.0, g + up);
      } else if (hold_left > 0) {
        --hold_left;
        g = std::min(1.0, g + up);
      } else {
        g = std::max(0.0, g - down);
      }
      gain[i] = g;
    }
  }
  return gain;
}

AudioTrack noise_gate(const AudioTrack& track, const GateParams& params) {
  const auto gain = gate_envelope(track, params);
  AudioTrack out = track;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = static_cast<float>(out.samples[i] * gain[i]);
  }
  return out;
}

std::vector<TimeSpan> split_on_silence(const AudioTrack& track, const SilenceParams& p) {
  if (!(p.threshold > 0.0 && p.threshold < 1.0)) throw InvalidArgument("silence threshold must be in (0, 1)");
  const std::size_t frame = std::max<std::size_t>(1, ms_to_samples(p.frame_ms, track.sample_rate));
  const std::size_t frames = (track.samples.size() + frame - 1) / frame;
  const double frame_s = static_cast<double>(frame) / track.sample_rate;
  const auto min_quiet = static_cast<std::size_t>(std::ceil(p.min_silence_ms * 1e-3 / frame_s - 1e-9));

  std::vector<TimeSpan> out;
  bool open = false;
  std::size_t seg_start = 0, last_loud = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t b = f * frame;
    const std::size_t e = std::min(track.samples.size(), b + frame);
    float peak = 0.0f;
    for (std::size_t i = b; i < e; ++i) peak = std::max(peak, std::abs(track.samples[i]));
    if (peak > p.threshold) {
      if (!open) {
        open = true;
        seg_start = f;
      }
      last_loud = f;
    } else if (open && f - last_loud >= min_quiet) {
      out.push_back({track.start_time + seg_start * frame_s, track.start_time + (last_loud + 1) * frame_s});
      open = false;
    }
  }
  if (open) {
    const double end = std::min(track.start_time + (last_loud + 1) * frame_s,
                                track.start_time + track.duration());
    out.push_back({track.start_time + seg_start * frame_s, end});
  }
  return out;
}

std::optional<Pose> pose_at(const Odometry& odom, double t) {
  if (odom.empty() || t < odom.front().time || t > odom.back().time) return std::nullopt;
  auto it = std::lower_bound(odom.begin(), odom.end(), t,
                             [](const OdometrySample& s, double v) { return s.time < v; });
  if (it == odom.begin()) return it->pose;
  auto prev = std::prev(it);
  if (it == odom.end()) return prev->pose;
  // Ties go to the earlier sample.
  return (t - prev->time <= it->time - t) ? prev->pose : it->pose;
}

PoseFeatureDB build_audio_db(const AudioTrack& track, std::span<const TimeSpan> segments,
                             const AudioEmbedder& embed, const Odometry& odom) {
  PoseFeatureDB db;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const TimeSpan& s = segments[i];
    if (!(s.end > s.start)) throw InvalidArgument("segment " + std::to_string(i) + " has end <= start");
    const auto pose = pose_at(odom, s.start);
    if (!pose) {
      throw InvalidArgument("segment " + std::to_string(i) + " [" + std::to_string(s.start) + ", " +
                            std::to_string(s.end) + "] starts outside the odometry range");
    }
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor((s.start - track.start_time) * track.sample_rate)));
    const auto last = static_cast<std::size_t>(std::max(0.0, std::ceil((s.end - track.start_time) * track.sample_rate)));
    const std::size_t b = std::min(first, track.samples.size());
    const std::size_t e = std::min(std::max(last, b), track.samples.size());
    Embedding emb = embed(s, std::span<const float>(track.samples.data() + b, e - b));
    if (db.entries.empty()) {
      db.dim = static_cast<int>(emb.size());
    } else if (static_cast<int>(emb.size()) != db.dim) {
      throw DimensionMismatch("audio embedding dims differ between segments");
    }
    db.entries.push_back({s.start, *pose, std::move(emb)});
  }
  return db;
}

std::vector<ScoredPosition> score_entries(const PoseFeatureDB& db, std::span<const double> query,
                                          const GridSpec& spec) {
  std::vector<ScoredPosition> out;
  if (db.empty()) return out;
  if (static_cast<int>(query.size()) != db.dim) throw DimensionMismatch("query dim != db dim");
  std::vector<double> raw;
  raw.reserve(db.size());
  for (const auto& e : db.entries) raw.push_back(cosine(e.embedding, query));
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < db.size(); ++i) {
    auto hit = voxel_index(db.entries[i].pose.translation, spec);
    hit.index.pz = std::clamp(hit.index.pz, 0, spec.z - 1);
    const double s = range > 0.0 ? (raw[i] - *lo) / range : 1.0;
    out.push_back({hit.index, s});
  }
  return out;
}

std::optional<Heatmap> audio_query_heatmap(const PoseFeatureDB& db, std::span<const double> query,
                                           double eps, const GridSpec& spec) {
  if (db.empty()) return std::nullopt;
  const auto scored = score_entries(db, query, spec);
  return scored_heatmap(scored, eps, spec);
}

namespace {
constexpr char kDbMagic[4] = {'M', 'S', 'P', 'D'};
constexpr std::uint16_t kDbVersion = 1;
}  // namespace

void save(const PoseFeatureDB& db, const std::filesystem::path& path) {
  binio::Writer w;
  w.put_bytes(std::string_view(kDbMagic, 4));
  w.put(kDbVersion);
  w.put(static_cast<std::uint32_t>(db.dim));
  w.put(static_cast<std::uint64_t>(db.size()));
  double m[16];
  for (const auto& e : db.entries) {
    if (static_cast<int>(e.embedding.size()) != db.dim) throw DimensionMismatch("db entry dim mismatch");
    w.put(e.time);
    e.pose.to_row_major(m);
    w.put_span(std::span<const double>(m, 16));
    w.put_span(std::span<const double>(e.embedding));
  }
  w.save(path);
}

PoseFeatureDB load_pose_db(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  if (r.get_bytes(4) != std::string_view(kDbMagic, 4)) throw FormatError("bad pose db magic", 0);
  const auto at = r.offset();
  const auto version = r.get<std::uint16_t>();
  if (version != kDbVersion) throw UnsupportedVersion(version, at);
  PoseFeatureDB db;
  db.dim = static_cast<int>(r.get<std::uint32_t>());
  const auto count = r.get<std::uint64_t>();
  const std::uint64_t record = 8 + 16 * 8 + std::uint64_t(db.dim) * 8;
  if (count > r.remaining() / record) throw FormatError("truncated pose db", r.offset());
  double m[16];
  for (std::uint64_t i = 0; i < count; ++i) {
    PoseFeatureEntry e;
    e.time = r.get<double>();
    r.get_into(std::span<double>(m, 16));
    e.pose = Pose::from_row_major(m);
    e.embedding.resize(db.dim);
    r.get_into(std::span<double>(e.embedding));
    db.entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after pose db", r.offset());
  return db;
}

AudioTrack read_wav(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  if (r.get_bytes(4) != "RIFF") throw FormatError("not a RIFF file", 0);
  r.get<std::uint32_t>();
  if (r.get_bytes(4) != "WAVE") throw FormatError("not a WAVE file", 8);
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::string id = r.get_bytes(4);
    const auto size = r.get<std::uint32_t>();
    const auto at = r.offset();
    if (id == "fmt ") {
      format = r.get<std::uint16_t>();
      channels = r.get<std::uint16_t>();
      rate = r.get<std::uint32_t>();
      r.get<std::uint32_t>();
      r.get<std::uint16_t>();
      bits = r.get<std::uint16_t>();
      r.get_bytes(size - 16);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", at);
      if (channels != 1) throw FormatError("only monaural audio is supported", at);
      AudioTrack t;
      t.sample_rate = rate;
      if (format == 1 && bits == 16) {
        t.samples.resize(size / 2);
        for (auto& s : t.samples) s = static_cast<float>(r.get<std::int16_t>() / 32768.0);
      } else if (format == 3 && bits == 32) {
        t.samples.resize(size / 4);
        r.get_into(std::span<float>(t.samples));
      } else {
        throw FormatError("unsupported WAV encoding (need PCM16 or float32)", at);
      }
      return t;
    } else {
      r.get_bytes(size + (size & 1));
    }
  }
  throw FormatError("missing data chunk", r.offset());
}

void write_wav(const std::filesystem::path& path, const AudioTrack& track, bool float32) {
  const std::uint16_t bits = float32 ? 32 : 16;
  const auto data_bytes = static_cast<std::uint32_t>(track.samples.size() * (bits / 8));
  const auto rate = static_cast<std::uint32_t>(std::lround(track.sample_rate));
  binio::Writer w;
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_bytes("WAVEfmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(float32 ? 3 : 1);
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(rate);
  w.put<std::uint32_t>(rate * (bits / 8));
  w.put<std::uint16_t>(bits / 8);
  w.put<std::uint16_t>(bits);
  w.put_bytes("data");
  w.put<std::uint32_t>(data_bytes);
  if (float32) {
    w.put_span(std::span<const float>(track.samples));
  } else {
    for (float s : track.samples) {
      w.put(static_cast<std::int16_t>(std::clamp(std::lround(double(s) * 32768.0), -32768L, 32767L)));
    }
  }
  w.save(path);
}

}  // namespace mslm
