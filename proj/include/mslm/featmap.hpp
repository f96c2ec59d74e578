#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mslm/geometry.hpp"

namespace mslm {

/// One posed RGB-D observation with dense per-pixel embeddings.
struct PosedFrame {
  int width = 0;
  int height = 0;
  int feature_dim = 0;
  std::vector<float> features;  // height × width × feature_dim, row-major
  std::vector<float> depth;     // height × width meters, 0 = invalid
  Intrinsics intrinsics;
  Pose pose;

  std::span<const float> feature_at(int u, int v) const {
    return {features.data() + (static_cast<std::size_t>(v) * width + u) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
  }
  float depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
};

struct FuseOptions {
  // Points with world height outside [band_low, band_high] are skipped.
  double band_low = -std::numeric_limits<double>::infinity();
  double band_high = std::numeric_limits<double>::infinity();
  // Collapse every point onto pz = 0, i.e. a 2D top-down map.
  bool top_down = false;
};

struct FuseStats {
  std::uint64_t fused = 0;
  std::uint64_t invalid_depth = 0;
  std::uint64_t out_of_bounds = 0;
  std::uint64_t out_of_band = 0;

  std::uint64_t dropped() const { return invalid_depth + out_of_bounds + out_of_band; }
  FuseStats& operator+=(const FuseStats& o);
};

/// Sparse voxel grid of (count, sum) embedding accumulators. The cell mean is
/// sum / count; storing the sum keeps grids exactly mergeable.
class FeatureGrid {
 public:
  FeatureGrid(GridSpec spec, int feature_dim);

  const GridSpec& spec() const { return spec_; }
  int feature_dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  /// Adds one embedding to an in-bounds voxel.
  void accumulate(const Voxel& v, std::span<const float> q);
  void accumulate_sum(const Voxel& v, std::uint32_t count, std::span<const double> sum);

  std::optional<std::vector<double>> cell_mean(const Voxel& v) const;
  std::uint32_t count(const Voxel& v) const;

  // Slot-level access, in insertion order.
  const Voxel& key(std::size_t slot) const { return keys_[slot]; }
  std::uint32_t count_at(std::size_t slot) const { return counts_[slot]; }
  std::span<const double> sum_at(std::size_t slot) const {
    return {sums_.data() + slot * dim_, static_cast<std::size_t>(dim_)};
  }
  std::vector<double> mean_at(std::size_t slot) const;

  /// Slots ordered by (px, py, pz).
  std::vector<std::size_t> sorted_slots() const;

  /// Same cell set with bit-identical counts and sums, irrespective of
  /// insertion order.
  bool operator==(const FeatureGrid& other) const;

 private:
  std::uint64_t linear(const Voxel& v) const;
  std::size_t slot_for(const Voxel& v);

  GridSpec spec_;
  int dim_;
  std::unordered_map<std::uint64_t, std::uint32_t> slots_;
  std::vector<Voxel> keys_;
  std::vector<std::uint32_t> counts_;
  std::vector<double> sums_;
};

FuseStats fuse_frame(FeatureGrid& grid, const PosedFrame& frame, const FuseOptions& opts = {});

std::optional<std::vector<double>> cell_mean(const FeatureGrid& grid, const Voxel& v);

/// Per-cell counts and sums added. Throws DimensionMismatch on spec/dim mismatch.
FeatureGrid merge(const FeatureGrid& a, const FeatureGrid& b);

/// Sums every column onto pz = 0 of a spec with z = 1.
FeatureGrid collapse_z(const FeatureGrid& grid);

void save(const FeatureGrid& grid, const std::filesystem::path& path);
FeatureGrid load_feature_grid(const std::filesystem::path& path);

inline constexpr char kMapMagic[4] = {'M', 'S', 'L', 'M'};
inline constexpr std::uint16_t kMapVersion = 1;

}  // namespace mslm
