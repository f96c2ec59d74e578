#include "mslm/geometry.hpp"

#include <cmath>

#include "mslm/error.hpp"

namespace mslm {

bool Intrinsics::valid() const {
  return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cy >= 0.0 &&
         cx <= width && cy <= height;
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Vec2 Intrinsics::project(const Vec3& p) const {
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

bool Intrinsics::contains(const Vec2& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width && pixel.y() <= height;
}

Pose Pose::from_row_major(const double* m) {
  Pose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = m[r * 4 + c];
    p.translation[r] = m[r * 4 + 3];
  }
  return p;
}

void Pose::to_row_major(double* m) const {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r * 4 + c] = rotation(r, c);
    m[r * 4 + 3] = translation[r];
  }
  m[12] = m[13] = m[14] = 0.0;
  m[15] = 1.0;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::compose(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool Pose::valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Vec3 back_project(const Vec2& pixel, double depth, const Intrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw InvalidArgument("invalid depth " + std::to_string(depth));
  }
  if (!k.contains(pixel)) throw InvalidArgument("pixel outside image bounds");
  return {depth * (pixel.x() - k.cx) / k.fx, depth * (pixel.y() - k.cy) / k.fy, depth};
}

namespace {

std::int32_t floor_index(double v) {
  return static_cast<std::int32_t>(std::floor(v));
}

}  // namespace

GridHit<Cell> project_to_grid(const Vec3& p, const GridSpec& spec) {
  Cell c{floor_index(spec.h / 2.0 + p.x() / spec.scale + 0.5),
         floor_index(spec.w / 2.0 - p.z() / spec.scale + 0.5)};
  return {c, in_bounds(c, spec)};
}

GridHit<Voxel> voxel_index(const Vec3& p, const GridSpec& spec) {
  const auto ground = project_to_grid(p, spec);
  Voxel v{ground.index.px, ground.index.py, floor_index(p.y() / spec.scale + 0.5)};
  return {v, in_bounds(v, spec)};
}

bool in_bounds(const Cell& c, const GridSpec& spec) {
  return c.px >= 0 && c.px < spec.h && c.py >= 0 && c.py < spec.w;
}

bool in_bounds(const Voxel& v, const GridSpec& spec) {
  return in_bounds(v.cell(), spec) && v.pz >= 0 && v.pz < spec.z;
}

Vec2 world_to_map(const Vec3& p, const GridSpec& spec) {
  return {spec.h / 2.0 + p.x() / spec.scale, spec.w / 2.0 - p.z() / spec.scale};
}

Vec3 map_to_world(const Vec2& m, double height, const GridSpec& spec) {
  return {(m.x() - spec.h / 2.0) * spec.scale, height, (spec.w / 2.0 - m.y()) * spec.scale};
}

Vec3 voxel_center(const Voxel& v, const GridSpec& spec) {
  return map_to_world(Vec2(v.px, v.py), v.pz * spec.scale, spec);
}

Vec3 cell_center(const Cell& c, const GridSpec& spec) {
  return map_to_world(Vec2(c.px, c.py), 0.0, spec);
}

}  // namespace mslm
