#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>

namespace mslm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Image size is carried along so pixel bounds can be
/// checked without a separate image handle.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  bool valid() const;
  Mat3 matrix() const;
  /// K * p / p.z
  Vec2 project(const Vec3& p_cam) const;
  bool contains(const Vec2& pixel) const;
};

/// Rigid camera-to-world transform (x_world = R * x_cam + t).
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  /// Row-major 4x4 homogeneous matrix, 16 values.
  static Pose from_row_major(const double* m16);
  void to_row_major(double* m16) const;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  /// (*this) ∘ other: apply `other` first.
  Pose compose(const Pose& other) const;
  /// RᵀR = I and det(R) = 1 within tol.
  bool valid(double tol = 1e-9) const;
};

struct GridSpec {
  std::int32_t h = 1;  // cells along world x (map rows)
  std::int32_t w = 1;  // cells along world -z (map columns)
  std::int32_t z = 1;  // cells along height
  double scale = 0.05; // meters per cell

  bool valid() const { return h >= 1 && w >= 1 && z >= 1 && scale > 0.0; }
  std::int64_t cells2d() const { return std::int64_t{h} * w; }
  std::int64_t voxels() const { return cells2d() * z; }
  bool operator==(const GridSpec&) const = default;
};

struct Cell {
  std::int32_t px = 0;
  std::int32_t py = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct Voxel {
  std::int32_t px = 0;
  std::int32_t py = 0;
  std::int32_t pz = 0;
  bool operator==(const Voxel&) const = default;
  auto operator<=>(const Voxel&) const = default;
  Cell cell() const { return {px, py}; }
};

/// Grid projection result. Indices are reported as computed; `in_bounds`
/// tells whether they address a real cell.
template <class Index>
struct GridHit {
  Index index;
  bool in_bounds = false;
};

/// P = depth * K⁻¹ [u v 1]ᵀ. Throws InvalidArgument for depth <= 0 or a pixel
/// outside the image.
Vec3 back_project(const Vec2& pixel, double depth, const Intrinsics& k);

inline Vec3 to_world(const Vec3& p_cam, const Pose& pose) { return pose.apply(p_cam); }

/// px = ⌊h/2 + x/s + 0.5⌋, py = ⌊w/2 − z/s + 0.5⌋
GridHit<Cell> project_to_grid(const Vec3& p_world, const GridSpec& spec);

/// Ground-plane indices as project_to_grid; pz = ⌊y/s + 0.5⌋ with the floor
/// (y = 0) at index 0.
GridHit<Voxel> voxel_index(const Vec3& p_world, const GridSpec& spec);

bool in_bounds(const Cell& c, const GridSpec& spec);
bool in_bounds(const Voxel& v, const GridSpec& spec);

/// World-frame center of a voxel (inverse of voxel_index on cell centers).
Vec3 voxel_center(const Voxel& v, const GridSpec& spec);
/// World (x, z) of a 2D cell center; y is 0.
Vec3 cell_center(const Cell& c, const GridSpec& spec);
/// Continuous map coordinates (px, py) of a world point, unfloored.
Vec2 world_to_map(const Vec3& p_world, const GridSpec& spec);
Vec3 map_to_world(const Vec2& map_xy, double height, const GridSpec& spec);

}  // namespace mslm
