#include "mslm/featmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mslm/binio.hpp"
#include "mslm/error.hpp"

namespace mslm {

FuseStats& FuseStats::operator+=(const FuseStats& o) {
  fused += o.fused;
  invalid_depth += o.invalid_depth;
  out_of_bounds += o.out_of_bounds;
  out_of_band += o.out_of_band;
  return *this;
}

FeatureGrid::FeatureGrid(GridSpec spec, int feature_dim) : spec_(spec), dim_(feature_dim) {
  if (!spec.valid()) throw InvalidArgument("invalid grid spec");
  if (feature_dim < 1) throw InvalidArgument("feature dimension must be >= 1");
}

std::uint64_t FeatureGrid::linear(const Voxel& v) const {
  return (static_cast<std::uint64_t>(v.px) * static_cast<std::uint64_t>(spec_.w) +
          static_cast<std::uint64_t>(v.py)) *
             static_cast<std::uint64_t>(spec_.z) +
         static_cast<std::uint64_t>(v.pz);
}

std::size_t FeatureGrid::slot_for(const Voxel& v) {
  if (!in_bounds(v, spec_)) throw InvalidArgument("voxel outside grid");
  auto [it, inserted] = slots_.try_emplace(linear(v), static_cast<std::uint32_t>(keys_.size()));
  if (inserted) {
    keys_.push_back(v);
    counts_.push_back(0);
    sums_.resize(sums_.size() + dim_, 0.0);
  }
  return it->second;
}

void FeatureGrid::accumulate(const Voxel& v, std::span<const float> q) {
  if (static_cast<int>(q.size()) != dim_) throw DimensionMismatch("embedding size != featureDim");
  const std::size_t s = slot_for(v);
  ++counts_[s];
  double* dst = sums_.data() + s * dim_;
  for (int i = 0; i < dim_; ++i) dst[i] += static_cast<double>(q[i]);
}

void FeatureGrid::accumulate_sum(const Voxel& v, std::uint32_t count, std::span<const double> sum) {
  if (static_cast<int>(sum.size()) != dim_) throw DimensionMismatch("sum size != featureDim");
  if (count == 0) throw InvalidArgument("cell count must be >= 1");
  const std::size_t s = slot_for(v);
  counts_[s] += count;
  double* dst = sums_.data() + s * dim_;
  for (int i = 0; i < dim_; ++i) dst[i] += sum[i];
}

std::uint32_t FeatureGrid::count(const Voxel& v) const {
  if (!in_bounds(v, spec_)) return 0;
  auto it = slots_.find(linear(v));
  return it == slots_.end() ? 0 : counts_[it->second];
}

std::vector<double> FeatureGrid::mean_at(std::size_t slot) const {
  std::vector<double> m(dim_);
  const double n = counts_[slot];
  const double* src = sums_.data() + slot * dim_;
  for (int i = 0; i < dim_; ++i) m[i] = src[i] / n;
  return m;
}

std::optional<std::vector<double>> FeatureGrid::cell_mean(const Voxel& v) const {
  if (!in_bounds(v, spec_)) return std::nullopt;
  auto it = slots_.find(linear(v));
  if (it == slots_.end()) return std::nullopt;
  return mean_at(it->second);
}

std::vector<std::size_t> FeatureGrid::sorted_slots() const {
  std::vector<std::size_t> order(keys_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys_[a] < keys_[b]; });
  return order;
}

bool FeatureGrid::operator==(const FeatureGrid& other) const {
  if (spec_ != other.spec_ || dim_ != other.dim_ || size() != other.size()) return false;
  for (std::size_t s = 0; s < keys_.size(); ++s) {
    auto it = other.slots_.find(linear(keys_[s]));
    if (it == other.slots_.end()) return false;
    const std::size_t o = it->second;
    if (counts_[s] != other.counts_[o]) return false;
    if (!std::equal(sums_.begin() + s * dim_, sums_.begin() + (s + 1) * dim_,
                    other.sums_.begin() + o * dim_)) {
      return false;
    }
  }
  return true;
}

FuseStats fuse_frame(FeatureGrid& grid, const PosedFrame& frame, const FuseOptions& opts) {
  if (frame.feature_dim != grid.feature_dim()) {
    throw DimensionMismatch("frame featureDim " + std::to_string(frame.feature_dim) +
                            " != grid featureDim " + std::to_string(grid.feature_dim()));
  }
  const auto npix = static_cast<std::size_t>(frame.width) * frame.height;
  if (frame.depth.size() != npix || frame.features.size() != npix * frame.feature_dim) {
    throw DimensionMismatch("frame feature/depth buffers do not match frame size");
  }
  const GridSpec& spec = grid.spec();
  FuseStats stats;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const double d = frame.depth_at(u, v);
      if (!(d > 0.0) || !std::isfinite(d)) {
        ++stats.invalid_depth;
        continue;
      }
      const Vec3 pw = to_world(back_project(Vec2(u, v), d, frame.intrinsics), frame.pose);
      if (pw.y() < opts.band_low || pw.y() > opts.band_high) {
        ++stats.out_of_band;
        continue;
      }
      auto hit = voxel_index(pw, spec);
      if (opts.top_down) {
        hit.index.pz = 0;
        hit.in_bounds = in_bounds(hit.index, spec);
      }
      if (!hit.in_bounds) {
        ++stats.out_of_bounds;
        continue;
      }
      grid.accumulate(hit.index, frame.feature_at(u, v));
      ++stats.fused;
    }
  }
  return stats;
}

std::optional<std::vector<double>> cell_mean(const FeatureGrid& grid, const Voxel& v) {
  return grid.cell_mean(v);
}

FeatureGrid merge(const FeatureGrid& a, const FeatureGrid& b) {
  if (a.spec() != b.spec() || a.feature_dim() != b.feature_dim()) {
    throw DimensionMismatch("cannot merge grids with different spec or featureDim");
  }
  FeatureGrid out = a;
  for (std::size_t s = 0; s < b.size(); ++s) out.accumulate_sum(b.key(s), b.count_at(s), b.sum_at(s));
  return out;
}

FeatureGrid collapse_z(const FeatureGrid& grid) {
  GridSpec flat = grid.spec();
  flat.z = 1;
  FeatureGrid out(flat, grid.feature_dim());
  for (std::size_t s : grid.sorted_slots()) {
    Voxel v = grid.key(s);
    v.pz = 0;
    out.accumulate_sum(v, grid.count_at(s), grid.sum_at(s));
  }
  return out;
}

void save(const FeatureGrid& grid, const std::filesystem::path& path) {
  binio::Writer w;
  w.put_bytes(std::string_view(kMapMagic, 4));
  w.put(kMapVersion);
  const GridSpec& spec = grid.spec();
  w.put(static_cast<std::uint32_t>(spec.h));
  w.put(static_cast<std::uint32_t>(spec.w));
  w.put(static_cast<std::uint32_t>(spec.z));
  w.put(spec.scale);
  w.put(static_cast<std::uint32_t>(grid.feature_dim()));
  w.put(static_cast<std::uint64_t>(grid.size()));
  for (std::size_t s : grid.sorted_slots()) {
    const Voxel& v = grid.key(s);
    w.put(static_cast<std::uint32_t>(v.px));
    w.put(static_cast<std::uint32_t>(v.py));
    w.put(static_cast<std::uint32_t>(v.pz));
    w.put(grid.count_at(s));
    w.put_span(grid.sum_at(s));
  }
  w.save(path);
}

FeatureGrid load_feature_grid(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  if (r.get_bytes(4) != std::string_view(kMapMagic, 4)) throw FormatError("bad map magic", 0);
  const std::uint64_t version_at = r.offset();
  const auto version = r.get<std::uint16_t>();
  if (version != kMapVersion) throw UnsupportedVersion(version, version_at);
  GridSpec spec;
  const std::uint64_t spec_at = r.offset();
  spec.h = static_cast<std::int32_t>(r.get<std::uint32_t>());
  spec.w = static_cast<std::int32_t>(r.get<std::uint32_t>());
  spec.z = static_cast<std::int32_t>(r.get<std::uint32_t>());
  spec.scale = r.get<double>();
  if (!spec.valid()) throw FormatError("invalid grid spec", spec_at);
  const auto dim = r.get<std::uint32_t>();
  if (dim == 0) throw FormatError("featureDim is zero", r.offset() - 4);
  const auto cells = r.get<std::uint64_t>();
  const std::uint64_t record = 16 + std::uint64_t{dim} * 8;
  if (cells > r.remaining() / record) throw FormatError("truncated cell records", r.offset());
  FeatureGrid grid(spec, static_cast<int>(dim));
  std::vector<double> sum(dim);
  for (std::uint64_t i = 0; i < cells; ++i) {
    const std::uint64_t at = r.offset();
    Voxel v{static_cast<std::int32_t>(r.get<std::uint32_t>()),
            static_cast<std::int32_t>(r.get<std::uint32_t>()),
            static_cast<std::int32_t>(r.get<std::uint32_t>())};
    const auto count = r.get<std::uint32_t>();
    r.get_into(std::span<double>(sum));
    if (!in_bounds(v, spec) || count == 0) throw FormatError("invalid cell record", at);
    if (grid.count(v) != 0) throw FormatError("duplicate cell record", at);
    grid.accumulate_sum(v, count, sum);
  }
  if (!r.at_end()) throw FormatError("trailing bytes after cell records", r.offset());
  return grid;
}

}  // namespace mslm
