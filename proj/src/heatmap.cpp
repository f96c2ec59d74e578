#include "mslm/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mslm/binio.hpp"
#include "mslm/error.hpp"
#include "mslm/query.hpp"

namespace mslm {

Heatmap::Heatmap(GridSpec spec, double decay, double fill)
    : spec_(spec), decay_(decay) {
  if (!spec.valid()) throw InvalidArgument("invalid grid spec");
  values_.assign(static_cast<std::size_t>(spec.voxels()), fill);
}

Voxel Heatmap::voxel(std::size_t index) const {
  const auto pz = static_cast<std::int32_t>(index % spec_.z);
  index /= spec_.z;
  const auto py = static_cast<std::int32_t>(index % spec_.w);
  const auto px = static_cast<std::int32_t>(index / spec_.w);
  return {px, py, pz};
}

double Heatmap::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

double Heatmap::column_max(const Cell& c) const {
  const std::size_t base = index({c.px, c.py, 0});
  return *std::max_element(values_.begin() + base, values_.begin() + base + spec_.z);
}

double dist_xy(const Voxel& a, const Voxel& b) {
  const double dx = a.px - b.px;
  const double dy = a.py - b.py;
  return std::sqrt(dx * dx + dy * dy);
}

double dist_3d(const Voxel& a, const Voxel& b) {
  const double dx = a.px - b.px;
  const double dy = a.py - b.py;
  const double dz = a.pz - b.pz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

namespace {

void check_decay(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("decay rate must be > 0");
}

// Fills every height level from one ground-plane layer.
void broadcast_plane(Heatmap& h, const std::vector<double>& plane) {
  const GridSpec& s = h.spec();
  auto& vals = h.values();
  for (std::size_t c = 0; c < plane.size(); ++c) {
    std::fill_n(vals.begin() + static_cast<std::ptrdiff_t>(c * s.z), s.z, plane[c]);
  }
}

constexpr double kFar = 1e20;

// 1D squared distance transform of sampled function f (lower envelope of
// parabolas). f and out have length n with unit stride.
void edt_1d(const double* f, double* out, int n, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  auto meet = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
  };
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = meet(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

// Exact squared Euclidean distance (in voxel units) to the nearest site.
std::vector<double> squared_edt(const GridSpec& s, std::span<const Voxel> sites) {
  const std::size_t n = static_cast<std::size_t>(s.voxels());
  std::vector<double> d(n, kFar);
  for (const Voxel& p : sites) d[(static_cast<std::size_t>(p.px) * s.w + p.py) * s.z + p.pz] = 0.0;

  std::vector<int> v;
  std::vector<double> z;
  const int maxlen = std::max({s.h, s.w, s.z});
  std::vector<double> in(maxlen), out(maxlen);
  auto pass = [&](int len, auto&& addr, int outer_a, int outer_b) {
    for (int a = 0; a < outer_a; ++a) {
      for (int b = 0; b < outer_b; ++b) {
        for (int i = 0; i < len; ++i) in[i] = d[addr(a, b, i)];
        edt_1d(in.data(), out.data(), len, v, z);
        for (int i = 0; i < len; ++i) d[addr(a, b, i)] = out[i];
      }
    }
  };
  const std::size_t W = s.w, Z = s.z;
  pass(s.z, [&](int px, int py, int pz) { return (px * W + py) * Z + pz; }, s.h, s.w);
  pass(s.w, [&](int px, int pz, int py) { return (px * W + py) * Z + pz; }, s.h, s.z);
  pass(s.h, [&](int py, int pz, int px) { return (px * W + py) * Z + pz; }, s.w, s.z);
  return d;
}

}  // namespace

Heatmap point_heatmap(const Voxel& p, double eps, const GridSpec& spec) {
  check_decay(eps);
  if (!in_bounds(p, spec)) throw InvalidArgument("heatmap source voxel outside grid");
  Heatmap h(spec, eps);
  std::vector<double> plane(static_cast<std::size_t>(spec.cells2d()));
  for (std::int32_t px = 0; px < spec.h; ++px) {
    for (std::int32_t py = 0; py < spec.w; ++py) {
      plane[static_cast<std::size_t>(px) * spec.w + py] =
          std::max(1.0 - eps * dist_xy({px, py, 0}, p), 0.0);
    }
  }
  broadcast_plane(h, plane);
  return h;
}

Heatmap object_heatmap(std::span<const Voxel> points, double eps, const GridSpec& spec) {
  check_decay(eps);
  if (points.empty()) throw InvalidArgument("object heatmap needs at least one point");
  for (const Voxel& p : points) {
    if (!in_bounds(p, spec)) throw InvalidArgument("object voxel outside grid");
  }
  Heatmap h(spec, eps);
  const auto d2 = squared_edt(spec, points);
  auto& vals = h.values();
  for (std::size_t i = 0; i < d2.size(); ++i) vals[i] = std::max(1.0 - eps * std::sqrt(d2[i]), 0.0);
  return h;
}

Heatmap scored_heatmap(std::span<const ScoredPosition> entries, double eps, const GridSpec& spec) {
  check_decay(eps);
  if (entries.empty()) throw InvalidArgument("scored heatmap needs at least one entry");
  Heatmap h(spec, eps);
  std::vector<double> plane(static_cast<std::size_t>(spec.cells2d()), 0.0);
  for (const ScoredPosition& e : entries) {
    if (!(e.score > 0.0)) continue;  // never lifts any cell above zero
    const double reach = e.score / eps;
    const auto lo_x = std::max<std::int32_t>(0, static_cast<std::int32_t>(std::floor(e.position.px - reach)));
    const auto hi_x = std::min<std::int32_t>(spec.h - 1, static_cast<std::int32_t>(std::ceil(e.position.px + reach)));
    const auto lo_y = std::max<std::int32_t>(0, static_cast<std::int32_t>(std::floor(e.position.py - reach)));
    const auto hi_y = std::min<std::int32_t>(spec.w - 1, static_cast<std::int32_t>(std::ceil(e.position.py + reach)));
    for (std::int32_t px = lo_x; px <= hi_x; ++px) {
      for (std::int32_t py = lo_y; py <= hi_y; ++py) {
        double& cell = plane[static_cast<std::size_t>(px) * spec.w + py];
        cell = std::max(cell, e.score - eps * dist_xy({px, py, 0}, e.position));
      }
    }
  }
  broadcast_plane(h, plane);
  return h;
}

Heatmap fuse(std::span<const Heatmap> maps) {
  if (maps.empty()) throw InvalidArgument("fuse needs at least one heatmap");
  Heatmap out = maps.front();
  for (std::size_t m = 1; m < maps.size(); ++m) {
    if (maps[m].spec() != out.spec()) throw DimensionMismatch("cannot fuse heatmaps with different specs");
    auto& dst = out.values();
    const auto& src = maps[m].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  }
  return out;
}

Heatmap operator*(const Heatmap& a, const Heatmap& b) {
  const Heatmap pair[] = {a, b};
  return fuse(pair);
}

std::optional<Peak> argmax_position(const Heatmap& h) {
  const auto& vals = h.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (vals[i] > vals[best]) best = i;
  }
  if (!(vals[best] > 0.0)) return std::nullopt;
  return Peak{h.voxel(best), vals[best]};
}

void save_raw(const Heatmap& h, const std::filesystem::path& path) {
  binio::Writer w;
  w.put(static_cast<std::uint32_t>(h.spec().h));
  w.put(static_cast<std::uint32_t>(h.spec().w));
  w.put(static_cast<std::uint32_t>(h.spec().z));
  std::vector<float> f(h.values().begin(), h.values().end());
  w.put_span(std::span<const float>(f));
  w.save(path);
}

Heatmap load_raw(const std::filesystem::path& path, double scale, double decay) {
  auto r = binio::Reader::open(path);
  GridSpec spec;
  spec.h = static_cast<std::int32_t>(r.get<std::uint32_t>());
  spec.w = static_cast<std::int32_t>(r.get<std::uint32_t>());
  spec.z = static_cast<std::int32_t>(r.get<std::uint32_t>());
  spec.scale = scale;
  if (!spec.valid()) throw FormatError("invalid heatmap dims", 0);
  Heatmap h(spec, decay);
  std::vector<float> f(h.values().size());
  r.get_into(std::span<float>(f));
  if (!r.at_end()) throw FormatError("trailing bytes after heatmap payload", r.offset());
  std::copy(f.begin(), f.end(), h.values().begin());
  return h;
}

void write_projection_pgm(const Heatmap& h, const std::filesystem::path& path) {
  const GridSpec& s = h.spec();
  std::vector<std::uint8_t> px(static_cast<std::size_t>(s.cells2d()));
  for (std::int32_t x = 0; x < s.h; ++x) {
    for (std::int32_t y = 0; y < s.w; ++y) {
      const double v = std::clamp(h.column_max({x, y}), 0.0, 1.0);
      px[static_cast<std::size_t>(x) * s.w + y] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  write_pgm(path, s.h, s.w, px);
}

}  // namespace mslm
