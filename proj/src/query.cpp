#include "mslm/query.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mslm/error.hpp"

namespace mslm {

ObstacleGrid::ObstacleGrid(std::int32_t h, std::int32_t w, double t1, double t2)
    : h_(h), w_(w), t1_(t1), t2_(t2), cells_(static_cast<std::size_t>(h) * w, 0) {
  if (h < 1 || w < 1) throw InvalidArgument("obstacle grid dims must be >= 1");
}

std::size_t ObstacleGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

bool ObstacleGrid::subset_of(const ObstacleGrid& other) const {
  if (h_ != other.h_ || w_ != other.w_) return false;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i] && !other.cells_[i]) return false;
  }
  return true;
}

SegmentationGrid segment_grid(const FeatureGrid& grid, const LabelSet& labels, bool normalize_features) {
  if (labels.dim() != grid.feature_dim()) {
    throw DimensionMismatch("label embedding dim " + std::to_string(labels.dim()) +
                            " != featureDim " + std::to_string(grid.feature_dim()));
  }
  if (static_cast<std::size_t>(labels.embeddings.rows()) != labels.labels.size()) {
    throw InvalidArgument("label count does not match embedding rows");
  }
  SegmentationGrid seg;
  seg.spec = grid.spec();
  seg.label_count = labels.size();
  if (labels.size() == 0) return seg;

  const auto order = grid.sorted_slots();
  seg.voxels.reserve(order.size());
  seg.labels.reserve(order.size());
  seg.scores.reserve(order.size());
  const int dim = grid.feature_dim();
  for (std::size_t slot : order) {
    std::vector<double> q = grid.mean_at(slot);
    if (normalize_features) normalize_in_place(q);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < labels.size(); ++m) {
      const double* e = labels.embeddings.row(m).data();
      double s = 0.0;
      for (int c = 0; c < dim; ++c) s += q[c] * e[c];
      if (s > best_score) {
        best_score = s;
        best = m;
      }
    }
    seg.voxels.push_back(grid.key(slot));
    seg.labels.push_back(best);
    seg.scores.push_back(best_score);
  }
  return seg;
}

ObstacleGrid obstacle_mask(std::span<const Vec3> points, const GridSpec& spec, double t1, double t2) {
  if (t1 > t2) throw InvalidArgument("obstacle band lower threshold exceeds upper threshold");
  ObstacleGrid out(spec.h, spec.w, t1, t2);
  for (const Vec3& p : points) {
    if (p.y() < t1 || p.y() > t2) continue;
    const auto hit = project_to_grid(p, spec);
    if (hit.in_bounds) out.set(hit.index, true);
  }
  return out;
}

ObstacleGrid fill_enclosed(const ObstacleGrid& grid, std::size_t max_cells) {
  ObstacleGrid out = grid;
  const std::int32_t h = grid.h(), w = grid.w();
  std::vector<std::uint8_t> seen(grid.cells().size(), 0);
  std::vector<Cell> component, stack;
  for (std::int32_t px = 0; px < h; ++px) {
    for (std::int32_t py = 0; py < w; ++py) {
      const std::size_t i = static_cast<std::size_t>(px) * w + py;
      if (seen[i] || grid.occupied({px, py})) continue;
      component.clear();
      stack.assign(1, {px, py});
      seen[i] = 1;
      bool touches_border = false;
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        component.push_back(c);
        touches_border = touches_border || c.px == 0 || c.py == 0 || c.px == h - 1 || c.py == w - 1;
        const Cell next[4] = {{c.px + 1, c.py}, {c.px - 1, c.py}, {c.px, c.py + 1}, {c.px, c.py - 1}};
        for (const Cell& n : next) {
          if (grid.blocked(n)) continue;
          auto& s = seen[static_cast<std::size_t>(n.px) * w + n.py];
          if (!s) {
            s = 1;
            stack.push_back(n);
          }
        }
      }
      if (!touches_border && component.size() <= max_cells)
        for (const Cell& c : component) out.set(c, true);
    }
  }
  return out;
}

std::vector<Vec3> occupied_points(const FeatureGrid& grid) {
  std::vector<Vec3> pts;
  pts.reserve(grid.size());
  for (std::size_t s : grid.sorted_slots()) pts.push_back(voxel_center(grid.key(s), grid.spec()));
  return pts;
}

ObstacleGrid top_down_mask(const SegmentationGrid& seg, const std::vector<bool>& selected) {
  ObstacleGrid out(seg.spec.h, seg.spec.w);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const int l = seg.labels[i];
    if (l >= 0 && static_cast<std::size_t>(l) < selected.size() && selected[l]) {
      out.set(seg.voxels[i].cell(), true);
    }
  }
  return out;
}

ObstacleGrid embodiment_obstacle_map(const SegmentationGrid& seg, const ObstacleGrid& base,
                                     std::span<const int> subset) {
  if (base.h() != seg.spec.h || base.w() != seg.spec.w) {
    throw DimensionMismatch("base obstacle grid does not match map dims");
  }
  std::vector<bool> selected(seg.label_count, false);
  for (int idx : subset) {
    if (idx < 0 || idx >= seg.label_count) {
      throw InvalidArgument("obstacle subset index " + std::to_string(idx) + " out of range");
    }
    selected[idx] = true;
  }
  ObstacleGrid mask = top_down_mask(seg, selected);
  ObstacleGrid out(base.h(), base.w(), base.band_low(), base.band_high());
  for (std::int32_t px = 0; px < base.h(); ++px) {
    for (std::int32_t py = 0; py < base.w(); ++py) {
      const Cell c{px, py};
      if (mask.occupied(c) && base.occupied(c)) out.set(c, true);
    }
  }
  return out;
}

ObstacleGrid embodiment_obstacle_map(const FeatureGrid& grid, const ObstacleGrid& base,
                                     const LabelSet& potential, std::span<const int> subset,
                                     bool normalize_features) {
  for (int idx : subset) {
    if (idx < 0 || idx >= potential.size()) {
      throw InvalidArgument("obstacle subset index " + std::to_string(idx) + " out of range");
    }
  }
  return embodiment_obstacle_map(segment_grid(grid, potential, normalize_features), base, subset);
}

std::vector<Voxel> label_voxels(const SegmentationGrid& seg, int label) {
  std::vector<Voxel> out;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg.labels[i] == label) out.push_back(seg.voxels[i]);
  }
  return out;
}

std::vector<ObjectInstance> find_instances(const SegmentationGrid& seg, int label, std::size_t min_cells) {
  // Footprint with vertical extent per cell.
  std::map<Cell, std::pair<std::int32_t, std::int32_t>> footprint;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg.labels[i] != label) continue;
    const Voxel& v = seg.voxels[i];
    auto [it, inserted] = footprint.try_emplace(v.cell(), v.pz, v.pz);
    if (!inserted) {
      it->second.first = std::min(it->second.first, v.pz);
      it->second.second = std::max(it->second.second, v.pz);
    }
  }
  std::vector<ObjectInstance> out;
  std::map<Cell, bool> visited;
  for (const auto& [start, _] : footprint) {
    if (visited[start]) continue;
    ObjectInstance inst;
    inst.min_pz = std::numeric_limits<std::int32_t>::max();
    inst.max_pz = std::numeric_limits<std::int32_t>::min();
    std::vector<Cell> stack{start};
    visited[start] = true;
    while (!stack.empty()) {
      const Cell c = stack.back();
      stack.pop_back();
      inst.cells.push_back(c);
      const auto& ext = footprint.at(c);
      inst.min_pz = std::min(inst.min_pz, ext.first);
      inst.max_pz = std::max(inst.max_pz, ext.second);
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          const Cell n{c.px + dx, c.py + dy};
          if ((dx || dy) && footprint.count(n) && !visited[n]) {
            visited[n] = true;
            stack.push_back(n);
          }
        }
      }
    }
    std::sort(inst.cells.begin(), inst.cells.end());
    Vec2 sum = Vec2::Zero();
    for (const Cell& c : inst.cells) sum += Vec2(c.px, c.py);
    inst.centroid = sum / static_cast<double>(inst.cells.size());
    out.push_back(std::move(inst));
  }
  std::stable_sort(out.begin(), out.end(), [](const ObjectInstance& a, const ObjectInstance& b) {
    return a.cells.size() > b.cells.size();
  });
  if (!out.empty() && out.front().cells.size() >= min_cells) {
    std::erase_if(out, [&](const ObjectInstance& o) { return o.cells.size() < min_cells; });
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, std::int32_t rows, std::int32_t cols,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionMismatch("pgm pixel count does not match dims");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "P5\n" << cols << " " << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_pgm(const std::filesystem::path& path, const ObstacleGrid& grid) {
  std::vector<std::uint8_t> px(grid.cells().size());
  std::transform(grid.cells().begin(), grid.cells().end(), px.begin(),
                 [](std::uint8_t v) { return v ? std::uint8_t{255} : std::uint8_t{0}; });
  write_pgm(path, grid.h(), grid.w(), px);
}

void write_segmentation_pgm(const std::filesystem::path& path, const SegmentationGrid& seg) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(seg.spec.cells2d()), 255);
  std::vector<std::int32_t> top(px.size(), -1);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const Voxel& v = seg.voxels[i];
    const auto at = static_cast<std::size_t>(v.px) * seg.spec.w + v.py;
    if (v.pz > top[at]) {
      top[at] = v.pz;
      px[at] = static_cast<std::uint8_t>(std::min(seg.labels[i], 254));
    }
  }
  write_pgm(path, seg.spec.h, seg.spec.w, px);
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path.string());
  std::string magic;
  int cols = 0, rows = 0, maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  if (magic != "P5" || cols < 1 || rows < 1 || maxval != 255) {
    throw FormatError("unsupported PGM header", 0);
  }
  in.get();
  PgmImage img{rows, cols, std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols)};
  const auto at = static_cast<std::uint64_t>(in.tellg());
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw FormatError("truncated PGM payload", at);
  }
  return img;
}

}  // namespace mslm
