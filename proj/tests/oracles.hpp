#pragma once

// Independent brute-force oracles and random generators for the test suites.
// Nothing here calls into the implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mslm/geometry.hpp"

namespace oracle {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline mslm::Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  q.normalize();
  return q.toRotationMatrix();
}

inline mslm::Pose random_pose(Rng& rng, double extent = 5.0) {
  mslm::Pose p;
  p.rotation = random_rotation(rng);
  p.translation = mslm::Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                             uniform(rng, -extent, extent));
  return p;
}

inline std::vector<double> random_vector(Rng& rng, int dim, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(dim);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

inline std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

/// Direct evaluation of the grid projection formula.
inline std::pair<long, long> grid_index(double x, double z, long h, long w, double s) {
  return {static_cast<long>(std::floor(h / 2.0 + x / s + 0.5)),
          static_cast<long>(std::floor(w / 2.0 - z / s + 0.5))};
}

inline double dxy(const mslm::Voxel& a, const mslm::Voxel& b) {
  return std::hypot(double(a.px - b.px), double(a.py - b.py));
}

inline double d3(const mslm::Voxel& a, const mslm::Voxel& b) {
  const double dx = a.px - b.px, dy = a.py - b.py, dz = a.pz - b.pz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Visits every voxel in lexicographic (px, py, pz) order.
template <class F>
void for_each_voxel(const mslm::GridSpec& s, F&& f) {
  for (int x = 0; x < s.h; ++x)
    for (int y = 0; y < s.w; ++y)
      for (int z = 0; z < s.z; ++z) f(mslm::Voxel{x, y, z});
}

inline double point_heat(const mslm::Voxel& q, const mslm::Voxel& p, double eps) {
  return std::max(1.0 - eps * dxy(q, p), 0.0);
}

inline double object_heat(const mslm::Voxel& q, const std::vector<mslm::Voxel>& pts, double eps) {
  double dmin = INFINITY;
  for (const auto& p : pts) dmin = std::min(dmin, d3(q, p));
  return std::max(1.0 - eps * dmin, 0.0);
}

struct Scored {
  mslm::Voxel p;
  double s;
};

inline double scored_heat(const mslm::Voxel& q, const std::vector<Scored>& es, double eps) {
  double best = -INFINITY;
  for (const auto& e : es) best = std::max(best, e.s - eps * dxy(q, e.p));
  return std::max(best, 0.0);
}

/// Octile-cost Dijkstra on an 8-connected grid without corner cutting.
/// blocked(x, y) → bool. Returns +inf when unreachable.
template <class Blocked>
double dijkstra_cost(int h, int w, Blocked&& blocked, int sx, int sy, int gx, int gy) {
  std::vector<double> dist(static_cast<std::size_t>(h) * w, INFINITY);
  using Item = std::pair<double, int>;
  std::vector<Item> heap;
  auto push = [&](double d, int i) {
    heap.push_back({d, i});
    std::push_heap(heap.begin(), heap.end(), std::greater<>());
  };
  dist[sx * w + sy] = 0.0;
  push(0.0, sx * w + sy);
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), std::greater<>());
    auto [d, i] = heap.back();
    heap.pop_back();
    if (d > dist[i]) continue;
    const int x = i / w, y = i % w;
    if (x == gx && y == gy) return d;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        if (!dx && !dy) continue;
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= h || ny >= w || blocked(nx, ny)) continue;
        if (dx && dy && (blocked(x + dx, y) || blocked(x, y + dy))) continue;
        const double nd = d + ((dx && dy) ? std::sqrt(2.0) : 1.0);
        if (nd < dist[nx * w + ny]) {
          dist[nx * w + ny] = nd;
          push(nd, nx * w + ny);
        }
      }
    }
  }
  return INFINITY;
}

}  // namespace oracle
