#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mslm/geometry.hpp"

namespace mslm {

/// Heat lost per meter by primary (target) and auxiliary (constraint)
/// heatmaps: 0.1 and 0.01 per cell at 0.05 m voxels.
inline constexpr double kPrimaryDecayPerMeter = 2.0;
inline constexpr double kAuxiliaryDecayPerMeter = 0.2;

/// Converts a per-meter decay rate to the per-cell rate used by the generators.
inline double decay_per_cell(double per_meter, const GridSpec& spec) { return per_meter * spec.scale; }

/// Dense [0,1] score volume over a voxel grid, indexed ((px * w) + py) * z + pz.
class Heatmap {
 public:
  Heatmap(GridSpec spec, double decay, double fill = 0.0);

  const GridSpec& spec() const { return spec_; }
  double decay() const { return decay_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double at(const Voxel& v) const { return values_[index(v)]; }
  double& at(const Voxel& v) { return values_[index(v)]; }
  std::size_t index(const Voxel& v) const {
    return (static_cast<std::size_t>(v.px) * spec_.w + v.py) * spec_.z + v.pz;
  }
  Voxel voxel(std::size_t index) const;

  double max_value() const;
  /// Heat of a ground-plane cell: max over height.
  double column_max(const Cell& c) const;

 private:
  GridSpec spec_;
  double decay_;
  std::vector<double> values_;
};

struct ScoredPosition {
  Voxel position;
  double score = 0.0;
};

struct Peak {
  Voxel position;
  double score = 0.0;
};

/// Ground-plane (px, py) distance between voxels.
double dist_xy(const Voxel& a, const Voxel& b);
/// Full 3D voxel-index distance.
double dist_3d(const Voxel& a, const Voxel& b);

/// H(q) = max(1 − eps·dist_xy(q, p), 0). Throws if p is outside the grid or eps <= 0.
Heatmap point_heatmap(const Voxel& p, double eps, const GridSpec& spec);

/// H(q) = max(1 − eps·d_min(q), 0), d_min the 3D distance to the nearest
/// object voxel. Throws on an empty point list.
Heatmap object_heatmap(std::span<const Voxel> points, double eps, const GridSpec& spec);

/// H(q) = max(0, maxᵢ sᵢ − eps·dist_xy(q, pᵢ)). Throws on empty input.
Heatmap scored_heatmap(std::span<const ScoredPosition> entries, double eps, const GridSpec& spec);

/// Element-wise product. Throws on an empty list or mismatched specs. The
/// result keeps the first map's decay.
Heatmap fuse(std::span<const Heatmap> maps);
Heatmap operator*(const Heatmap& a, const Heatmap& b);

/// Lexicographically smallest voxel among the global maxima; nullopt when the
/// map is all zero (no target).
std::optional<Peak> argmax_position(const Heatmap& h);

/// 12-byte header (u32 h, w, z) + little-endian float32 values.
void save_raw(const Heatmap& h, const std::filesystem::path& path);
Heatmap load_raw(const std::filesystem::path& path, double scale, double decay = 0.0);
/// Max-over-height projection scaled to 0..255.
void write_projection_pgm(const Heatmap& h, const std::filesystem::path& path);

}  // namespace mslm
