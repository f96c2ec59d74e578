#include <doctest.h>

#include <filesystem>
#include <set>

#include "mslm/error.hpp"
#include "mslm/query.hpp"
#include "oracles.hpp"

using namespace mslm;

namespace {

LabelSet random_labels(oracle::Rng& rng, int m, int dim) {
  LabelSet ls;
  ls.embeddings.resize(m, dim);
  for (int i = 0; i < m; ++i) {
    ls.labels.push_back("label" + std::to_string(i));
    const auto e = oracle::unit(oracle::random_vector(rng, dim));
    for (int c = 0; c < dim; ++c) ls.embeddings(i, c) = e[c];
  }
  return ls;
}

LabelSet basis_labels(const std::vector<std::string>& names, int dim) {
  LabelSet ls;
  ls.labels = names;
  ls.embeddings = EmbeddingMatrix::Zero(static_cast<int>(names.size()), dim);
  for (int i = 0; i < static_cast<int>(names.size()); ++i) ls.embeddings(i, i) = 1.0;
  return ls;
}

void put(FeatureGrid& g, const Voxel& v, const std::vector<double>& q) {
  std::vector<float> f(q.begin(), q.end());
  g.accumulate(v, f);
}

// Floor everywhere at pz 0 on an 8×8 patch; a 2×3 table block at pz 10..14.
struct FloorTable {
  GridSpec spec{20, 20, 20, 0.05};
  FeatureGrid grid{spec, 3};
  ObstacleGrid base{20, 20, 0.0, 2.0};
  std::set<Cell> table;

  FloorTable() {
    for (int x = 4; x < 12; ++x)
      for (int y = 4; y < 12; ++y) put(grid, {x, y, 0}, {1, 0, 0});
    for (int x = 6; x < 8; ++x)
      for (int y = 6; y < 9; ++y) {
        table.insert({x, y});
        for (int z = 10; z < 15; ++z) put(grid, {x, y, z}, {0, 1, 0});
      }
    // Base map sees everything the sensor hit in band, floor included.
    for (int x = 0; x < 20; ++x)
      for (int y = 0; y < 20; ++y) base.set({x, y}, x >= 4 && x < 12 && y >= 4 && y < 12);
  }
};

}  // namespace

TEST_CASE("segment_grid: exact label embedding yields that label with score 1") {
  const auto labels = basis_labels({"a", "b", "c", "d"}, 4);
  FeatureGrid g(GridSpec{4, 4, 4, 0.05}, 4);
  put(g, {1, 2, 3}, {0, 0, 1, 0});
  const auto seg = segment_grid(g, labels);
  REQUIRE(seg.size() == 1);
  CHECK(seg.labels[0] == 2);
  CHECK(seg.scores[0] == doctest::Approx(1.0));
  CHECK(seg.voxels[0] == Voxel{1, 2, 3});
}

TEST_CASE("segment_grid: empty grid, dim mismatch, ties") {
  const auto labels = basis_labels({"a", "b"}, 2);
  CHECK(segment_grid(FeatureGrid(GridSpec{4, 4, 4, 0.05}, 2), labels).empty());
  CHECK_THROWS_AS(segment_grid(FeatureGrid(GridSpec{4, 4, 4, 0.05}, 3), labels), DimensionMismatch);

  LabelSet dup;
  dup.labels = {"x", "y"};
  dup.embeddings = EmbeddingMatrix::Zero(2, 2);
  dup.embeddings(0, 0) = dup.embeddings(1, 0) = 1.0;
  FeatureGrid g(GridSpec{4, 4, 4, 0.05}, 2);
  put(g, {0, 0, 0}, {1, 0});
  CHECK(segment_grid(g, dup).labels[0] == 0);
}

TEST_CASE("segment_grid matches brute-force argmax on a random 32^3 grid") {
  oracle::Rng rng(31);
  const GridSpec spec{32, 32, 32, 0.05};
  const int dim = 12, m = 5;
  const auto labels = random_labels(rng, m, dim);
  FeatureGrid g(spec, dim);
  for (int i = 0; i < 3000; ++i) {
    const Voxel v{oracle::uniform_int(rng, 0, 31), oracle::uniform_int(rng, 0, 31), oracle::uniform_int(rng, 0, 31)};
    put(g, v, oracle::random_vector(rng, dim));
  }
  for (bool normalize : {true, false}) {
    const auto seg = segment_grid(g, labels, normalize);
    REQUIRE(seg.size() == g.size());
    for (std::size_t i = 0; i < seg.size(); ++i) {
      const auto mean = *g.cell_mean(seg.voxels[i]);
      double qn = 0;
      for (double x : mean) qn += x * x;
      qn = normalize ? std::sqrt(qn) : 1.0;
      int best = -1;
      double best_s = -1e300;
      for (int k = 0; k < m; ++k) {
        double s = 0;
        for (int c = 0; c < dim; ++c) s += mean[c] / qn * labels.embeddings(k, c);
        if (s > best_s) best_s = s, best = k;
      }
      CHECK(seg.labels[i] == best);
      CHECK(std::abs(seg.scores[i] - best_s) < 1e-9);
    }
  }
}

TEST_CASE("segment labels are invariant under positive scaling of cell means") {
  oracle::Rng rng(32);
  const auto labels = random_labels(rng, 6, 8);
  const GridSpec spec{10, 10, 10, 0.05};
  FeatureGrid a(spec, 8), b(spec, 8);
  for (int i = 0; i < 200; ++i) {
    put(a, {oracle::uniform_int(rng, 0, 9), oracle::uniform_int(rng, 0, 9), oracle::uniform_int(rng, 0, 9)},
        oracle::random_vector(rng, 8));
  }
  for (std::size_t s = 0; s < a.size(); ++s) {
    const double k = oracle::uniform(rng, 0.1, 10.0);
    std::vector<double> sum(a.sum_at(s).begin(), a.sum_at(s).end());
    for (double& x : sum) x *= k;
    b.accumulate_sum(a.key(s), a.count_at(s), sum);
  }
  const auto sa = segment_grid(a, labels, false), sb = segment_grid(b, labels, false);
  CHECK(sa.voxels == sb.voxels);
  CHECK(sa.labels == sb.labels);
}

TEST_CASE("segment_grid is deterministic across insertion orders") {
  oracle::Rng rng(33);
  const auto labels = random_labels(rng, 4, 6);
  std::vector<std::pair<Voxel, std::vector<double>>> items;
  for (int i = 0; i < 300; ++i) {
    items.push_back({{oracle::uniform_int(rng, 0, 9), oracle::uniform_int(rng, 0, 9), oracle::uniform_int(rng, 0, 9)},
                     oracle::random_vector(rng, 6)});
  }
  FeatureGrid a(GridSpec{10, 10, 10, 0.05}, 6), b(GridSpec{10, 10, 10, 0.05}, 6);
  for (const auto& [v, q] : items) put(a, v, q);
  std::reverse(items.begin(), items.end());
  for (const auto& [v, q] : items) put(b, v, q);
  const auto sa = segment_grid(a, labels), sb = segment_grid(b, labels);
  CHECK(sa.voxels == sb.voxels);
  CHECK(sa.labels == sb.labels);
}

TEST_CASE("obstacle_mask: band membership and errors") {
  const GridSpec spec{40, 40, 1, 0.05};
  const std::vector<Vec3> inside{{0.2, 0.5, -0.3}};
  const auto m = obstacle_mask(inside, spec, 0.1, 1.0);
  CHECK(m.occupied_count() == 1);
  CHECK(m.occupied(project_to_grid(inside[0], spec).index));

  const std::vector<Vec3> above{{0.2, 1.0 + 1e-9, -0.3}};
  CHECK(obstacle_mask(above, spec, 0.1, 1.0).occupied_count() == 0);
  const std::vector<Vec3> edge{{0.2, 1.0, -0.3}};
  CHECK(obstacle_mask(edge, spec, 0.1, 1.0).occupied_count() == 1);
  CHECK_THROWS_AS(obstacle_mask(inside, spec, 1.0, 0.1), InvalidArgument);
  CHECK(obstacle_mask({}, spec, 0.0, 1.0).occupied_count() == 0);
}

TEST_CASE("obstacle_mask equals per-point recomputation on a random cloud") {
  oracle::Rng rng(34);
  const GridSpec spec{60, 50, 1, 0.05};
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) {
    pts.emplace_back(oracle::uniform(rng, -1.8, 1.8), oracle::uniform(rng, -0.5, 2.5), oracle::uniform(rng, -1.6, 1.6));
  }
  const auto m = obstacle_mask(pts, spec, 0.2, 1.5);
  std::vector<std::uint8_t> expect(static_cast<std::size_t>(spec.h) * spec.w, 0);
  for (const auto& p : pts) {
    if (p.y() < 0.2 || p.y() > 1.5) continue;
    const auto [px, py] = oracle::grid_index(p.x(), p.z(), spec.h, spec.w, spec.scale);
    if (px < 0 || py < 0 || px >= spec.h || py >= spec.w) continue;
    expect[px * spec.w + py] = 1;
  }
  CHECK(m.cells() == expect);
}

TEST_CASE("embodiment_obstacle_map: floor/table scene") {
  FloorTable s;
  const auto labels = basis_labels({"floor", "table", "other"}, 3);

  const std::vector<int> no_floor{1, 2};
  const auto ground = embodiment_obstacle_map(s.grid, s.base, labels, no_floor);
  CHECK(ground.occupied_count() == s.table.size());
  for (const auto& c : s.table) CHECK(ground.occupied(c));
  CHECK(ground.subset_of(s.base));

  CHECK(embodiment_obstacle_map(s.grid, s.base, labels, std::vector<int>{}).occupied_count() == 0);

  const std::vector<int> drone{2};
  const auto flying = embodiment_obstacle_map(s.grid, s.base, labels, drone);
  CHECK(flying.subset_of(ground));
  CHECK(flying.occupied_count() == 0);

  CHECK_THROWS_AS(embodiment_obstacle_map(s.grid, s.base, labels, std::vector<int>{3}), InvalidArgument);
  CHECK_THROWS_AS(embodiment_obstacle_map(s.grid, s.base, labels, std::vector<int>{-1}), InvalidArgument);
}

TEST_CASE("embodiment map is a subset of base for random subsets") {
  oracle::Rng rng(35);
  const GridSpec spec{24, 24, 8, 0.05};
  const auto labels = random_labels(rng, 5, 6);
  FeatureGrid g(spec, 6);
  for (int i = 0; i < 800; ++i) {
    put(g, {oracle::uniform_int(rng, 0, 23), oracle::uniform_int(rng, 0, 23), oracle::uniform_int(rng, 0, 7)},
        oracle::random_vector(rng, 6));
  }
  for (int t = 0; t < 20; ++t) {
    ObstacleGrid base(24, 24);
    for (int x = 0; x < 24; ++x)
      for (int y = 0; y < 24; ++y) base.set({x, y}, oracle::uniform(rng, 0, 1) < 0.5);
    std::vector<int> subset;
    for (int k = 0; k < 5; ++k)
      if (oracle::uniform(rng, 0, 1) < 0.5) subset.push_back(k);
    CHECK(embodiment_obstacle_map(g, base, labels, subset).subset_of(base));
  }
}

TEST_CASE("find_instances separates two blobs, largest first") {
  SegmentationGrid seg;
  seg.spec = GridSpec{20, 20, 4, 0.05};
  seg.label_count = 2;
  auto add = [&](Voxel v, int l) {
    seg.voxels.push_back(v);
    seg.labels.push_back(l);
    seg.scores.push_back(1.0);
  };
  add({2, 2, 1}, 1);
  add({2, 3, 2}, 1);
  for (int x = 10; x < 13; ++x)
    for (int y = 10; y < 13; ++y) add({x, y, 0}, 1);
  add({5, 5, 0}, 0);
  std::sort(seg.voxels.begin(), seg.voxels.end());  // labels all 1 except (5,5,0) which sorts between
  seg.labels.assign(seg.voxels.size(), 1);
  for (std::size_t i = 0; i < seg.size(); ++i)
    if (seg.voxels[i] == Voxel{5, 5, 0}) seg.labels[i] = 0;

  const auto inst = find_instances(seg, 1);
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].cells.size() == 9);
  CHECK(inst[0].centroid.x() == doctest::Approx(11.0));
  CHECK(inst[0].centroid.y() == doctest::Approx(11.0));
  CHECK(inst[1].cells.size() == 2);
  CHECK(inst[1].min_pz == 1);
  CHECK(inst[1].max_pz == 2);
  CHECK(find_instances(seg, 1, 5).size() == 1);
}

TEST_CASE("PGM exports round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mslm_query_test";
  std::filesystem::create_directories(dir);
  ObstacleGrid g(3, 5);
  g.set({1, 4}, true);
  write_pgm(dir / "o.pgm", g);
  const auto img = read_pgm(dir / "o.pgm");
  CHECK(img.rows == 3);
  CHECK(img.cols == 5);
  CHECK(img.pixels[1 * 5 + 4] == 255);
  CHECK(img.pixels[0] == 0);

  FloorTable s;
  const auto seg = segment_grid(s.grid, basis_labels({"floor", "table", "other"}, 3));
  write_segmentation_pgm(dir / "s.pgm", seg);
  const auto simg = read_pgm(dir / "s.pgm");
  CHECK(simg.pixels[6 * 20 + 6] == 1);
  CHECK(simg.pixels[4 * 20 + 4] == 0);
  CHECK(simg.pixels[0] == 255);
}
