#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mslm/embedding.hpp"
#include "mslm/featmap.hpp"
#include "mslm/geometry.hpp"

namespace mslm {

/// Per occupied voxel: best label and its similarity, sorted by voxel index.
struct SegmentationGrid {
  GridSpec spec;
  int label_count = 0;
  std::vector<Voxel> voxels;
  std::vector<int> labels;
  std::vector<double> scores;

  std::size_t size() const { return voxels.size(); }
  bool empty() const { return voxels.empty(); }
};

/// Binary top-down occupancy, indexed [px * w + py].
class ObstacleGrid {
 public:
  ObstacleGrid() = default;
  ObstacleGrid(std::int32_t h, std::int32_t w, double t1 = 0.0, double t2 = 0.0);

  std::int32_t h() const { return h_; }
  std::int32_t w() const { return w_; }
  double band_low() const { return t1_; }
  double band_high() const { return t2_; }

  bool contains(const Cell& c) const { return c.px >= 0 && c.px < h_ && c.py >= 0 && c.py < w_; }
  bool occupied(const Cell& c) const { return cells_[index(c)] != 0; }
  /// Out-of-grid cells count as blocked.
  bool blocked(const Cell& c) const { return !contains(c) || occupied(c); }
  void set(const Cell& c, bool value) { cells_[index(c)] = value ? 1 : 0; }

  std::size_t occupied_count() const;
  const std::vector<std::uint8_t>& cells() const { return cells_; }
  bool subset_of(const ObstacleGrid& other) const;
  bool operator==(const ObstacleGrid&) const = default;

 private:
  std::size_t index(const Cell& c) const {
    return static_cast<std::size_t>(c.px) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(c.py);
  }

  std::int32_t h_ = 0;
  std::int32_t w_ = 0;
  double t1_ = 0.0;
  double t2_ = 0.0;
  std::vector<std::uint8_t> cells_;
};

/// Cosine (normalize_features) or raw dot-product argmax per occupied voxel.
/// Ties resolve to the lowest label index.
SegmentationGrid segment_grid(const FeatureGrid& grid, const LabelSet& labels,
                              bool normalize_features = true);

/// Height-band occupancy: a cell is occupied if any point in [t1, t2] lands on it. Throws InvalidArgument if t1 > t2.
ObstacleGrid obstacle_mask(std::span<const Vec3> points, const GridSpec& spec, double t1, double t2);

/// Marks free 4-connected regions that do not reach the grid border and
/// hold at most `max_cells` cells as occupied (unobserved object interiors).
ObstacleGrid fill_enclosed(const ObstacleGrid& grid, std::size_t max_cells);

/// World-frame centers of every occupied voxel in the grid.
std::vector<Vec3> occupied_points(const FeatureGrid& grid);

/// Top-down union of the voxels whose label is flagged in `selected`
/// (size = label_count).
ObstacleGrid top_down_mask(const SegmentationGrid& seg, const std::vector<bool>& selected);

/// Union of the subset labels' top-down masks, intersected with `base`.
ObstacleGrid embodiment_obstacle_map(const FeatureGrid& grid, const ObstacleGrid& base,
                                     const LabelSet& potential, std::span<const int> obstacle_subset,
                                     bool normalize_features = true);

/// Same as above for an existing segmentation of the potential-obstacle list.
ObstacleGrid embodiment_obstacle_map(const SegmentationGrid& seg, const ObstacleGrid& base,
                                     std::span<const int> obstacle_subset);

/// Voxels carrying `label`.
std::vector<Voxel> label_voxels(const SegmentationGrid& seg, int label);

/// 8-connected top-down component of one label.
struct ObjectInstance {
  std::vector<Cell> cells;
  Vec2 centroid;  // continuous map coordinates (px, py)
  std::int32_t min_pz = 0;
  std::int32_t max_pz = 0;
};

/// Connected components of a label's top-down footprint, largest first
/// (ties by lowest first cell). Components smaller than min_cells are
/// discarded unless nothing larger exists.
std::vector<ObjectInstance> find_instances(const SegmentationGrid& seg, int label, std::size_t min_cells = 1);

/// 8-bit binary PGM (P5), `rows` lines of `cols` bytes.
void write_pgm(const std::filesystem::path& path, std::int32_t rows, std::int32_t cols,
               std::span<const std::uint8_t> pixels);
/// Obstacle export: 0 free, 255 occupied.
void write_pgm(const std::filesystem::path& path, const ObstacleGrid& grid);
/// Segmentation export: top-down label index per cell (max-height voxel wins),
/// 255 where empty.
void write_segmentation_pgm(const std::filesystem::path& path, const SegmentationGrid& seg);

struct PgmImage {
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};
PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace mslm
