#include <doctest.h>

#include <filesystem>

#include "mslm/error.hpp"
#include "mslm/heatmap.hpp"
#include "oracles.hpp"

using namespace mslm;

namespace {

Heatmap random_map(oracle::Rng& rng, const GridSpec& spec) {
  Heatmap h(spec, 0.1);
  for (double& v : h.values()) v = oracle::uniform(rng, 0, 1);
  return h;
}

Voxel random_voxel(oracle::Rng& rng, const GridSpec& s) {
  return {oracle::uniform_int(rng, 0, s.h - 1), oracle::uniform_int(rng, 0, s.w - 1), oracle::uniform_int(rng, 0, s.z - 1)};
}

bool in_unit_range(const Heatmap& h) {
  for (double v : h.values())
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

}  // namespace

TEST_CASE("decay conversion: 2/m and 0.2/m at 5 cm cells") {
  const GridSpec spec{10, 10, 10, 0.05};
  CHECK(decay_per_cell(kPrimaryDecayPerMeter, spec) == doctest::Approx(0.1));
  CHECK(decay_per_cell(kAuxiliaryDecayPerMeter, spec) == doctest::Approx(0.01));
}

TEST_CASE("point_heatmap: peak, linear decay, clamp, errors") {
  const GridSpec spec{30, 30, 4, 0.05};
  const Voxel p{10, 10, 2};
  const auto h = point_heatmap(p, 0.1, spec);
  CHECK(h.at(p) == 1.0);
  CHECK(h.at({13, 10, 0}) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(h.at({10, 7, 3}) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(h.at({20, 10, 2}) == 0.0);
  CHECK(h.at({29, 29, 0}) == 0.0);
  CHECK(in_unit_range(h));
  CHECK_THROWS_AS(point_heatmap({30, 0, 0}, 0.1, spec), InvalidArgument);
  CHECK_THROWS_AS(point_heatmap(p, 0.0, spec), InvalidArgument);

  oracle::for_each_voxel(spec, [&](const Voxel& q) { CHECK(std::abs(h.at(q) - oracle::point_heat(q, p, 0.1)) < 1e-12); });
}

TEST_CASE("object_heatmap: single point vs point_heatmap on its slice") {
  const GridSpec spec{20, 20, 6, 0.05};
  const Voxel p{7, 12, 3};
  const std::vector<Voxel> pts{p};
  const auto o = object_heatmap(pts, 0.05, spec);
  const auto q = point_heatmap(p, 0.05, spec);
  for (int x = 0; x < 20; ++x)
    for (int y = 0; y < 20; ++y) CHECK(std::abs(o.at({x, y, 3}) - q.at({x, y, 3})) < 1e-12);
  CHECK(o.at({7, 12, 0}) == doctest::Approx(1 - 0.05 * 3));
  CHECK(q.at({7, 12, 0}) == 1.0);
  CHECK_THROWS_AS(object_heatmap(std::vector<Voxel>{}, 0.1, spec), InvalidArgument);
}

TEST_CASE("object_heatmap: two points give the max of single maps") {
  const GridSpec spec{16, 16, 8, 0.05};
  const Voxel a{2, 3, 1}, b{12, 9, 6};
  const std::vector<Voxel> ab{a, b}, va{a}, vb{b};
  const auto hab = object_heatmap(ab, 0.08, spec);
  const auto ha = object_heatmap(va, 0.08, spec), hb = object_heatmap(vb, 0.08, spec);
  for (std::size_t i = 0; i < hab.values().size(); ++i) {
    CHECK(std::abs(hab.values()[i] - std::max(ha.values()[i], hb.values()[i])) < 1e-12);
  }
}

TEST_CASE("object_heatmap matches brute force on random 16^3 grids") {
  oracle::Rng rng(41);
  const GridSpec spec{16, 16, 16, 0.05};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Voxel> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(random_voxel(rng, spec));
    const double eps = oracle::uniform(rng, 0.01, 0.2);
    const auto h = object_heatmap(pts, eps, spec);
    double worst = 0;
    oracle::for_each_voxel(spec, [&](const Voxel& q) {
      worst = std::max(worst, std::abs(h.at(q) - oracle::object_heat(q, pts, eps)));
    });
    CHECK(worst < 1e-9);
    for (const auto& p : pts) CHECK(h.at(p) == 1.0);
    CHECK(in_unit_range(h));
  }
}

TEST_CASE("scored_heatmap: unit score equals point map, partial score, brute force") {
  const GridSpec spec{24, 24, 3, 0.05};
  const Voxel p{5, 17, 1};
  const std::vector<ScoredPosition> one{{p, 1.0}};
  const auto s = scored_heatmap(one, 0.1, spec);
  const auto pt = point_heatmap(p, 0.1, spec);
  for (std::size_t i = 0; i < s.values().size(); ++i) CHECK(std::abs(s.values()[i] - pt.values()[i]) < 1e-12);

  const std::vector<ScoredPosition> half{{p, 0.5}};
  CHECK(scored_heatmap(half, 0.1, spec).at(p) == 0.5);
  CHECK_THROWS_AS(scored_heatmap(std::vector<ScoredPosition>{}, 0.1, spec), InvalidArgument);

  oracle::Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ScoredPosition> es;
    std::vector<oracle::Scored> os;
    for (int i = 0; i < 10; ++i) {
      const Voxel v = random_voxel(rng, spec);
      const double sc = oracle::uniform(rng, 0, 1);
      es.push_back({v, sc});
      os.push_back({v, sc});
    }
    const double eps = oracle::uniform(rng, 0.01, 0.3);
    const auto h = scored_heatmap(es, eps, spec);
    oracle::for_each_voxel(spec, [&](const Voxel& q) { CHECK(std::abs(h.at(q) - oracle::scored_heat(q, os, eps)) < 1e-9); });
    CHECK(in_unit_range(h));
  }
}

TEST_CASE("fuse: identity, annihilator, mismatch, commutativity and associativity") {
  oracle::Rng rng(43);
  const GridSpec spec{8, 9, 5, 0.05};
  const auto a = random_map(rng, spec), b = random_map(rng, spec), c = random_map(rng, spec);
  const Heatmap ones(spec, 0.1, 1.0), zeros(spec, 0.1, 0.0);
  CHECK((a * ones).values() == a.values());
  CHECK((a * zeros).values() == zeros.values());
  const std::vector<Heatmap> single{a};
  CHECK(fuse(single).values() == a.values());
  CHECK_THROWS(fuse(std::vector<Heatmap>{}));
  CHECK_THROWS(a * Heatmap(GridSpec{8, 9, 4, 0.05}, 0.1));

  CHECK((a * b).values() == (b * a).values());
  const auto l = (a * b) * c, r = a * (b * c);
  const std::vector<Heatmap> abc{a, b, c}, cab{c, a, b};
  const auto f1 = fuse(abc), f2 = fuse(cab);
  for (std::size_t i = 0; i < l.values().size(); ++i) {
    CHECK(std::abs(l.values()[i] - r.values()[i]) < 1e-12);
    CHECK(std::abs(f1.values()[i] - f2.values()[i]) < 1e-12);
  }
}

TEST_CASE("fused point maps peak at the midpoint") {
  oracle::Rng rng(44);
  const GridSpec spec{40, 40, 1, 0.05};
  for (int trial = 0; trial < 100; ++trial) {
    const double eps = trial % 2 ? 0.01 : 0.05;
    Voxel p1 = random_voxel(rng, spec), p2 = random_voxel(rng, spec);
    // Keep the midpoint on the lattice.
    if ((p1.px + p2.px) % 2) p2.px = p2.px > 0 ? p2.px - 1 : 1;
    if ((p1.py + p2.py) % 2) p2.py = p2.py > 0 ? p2.py - 1 : 1;
    if (eps * oracle::dxy(p1, p2) / 2 >= 1.0) continue;
    const auto f = point_heatmap(p1, eps, spec) * point_heatmap(p2, eps, spec);
    const Voxel mid{(p1.px + p2.px) / 2, (p1.py + p2.py) / 2, 0};
    double mx = 0;
    for (double v : f.values()) mx = std::max(mx, v);
    CHECK(f.at(mid) == doctest::Approx(mx).epsilon(1e-12));
  }
}

TEST_CASE("argmax_position: single peak, tie rule, zero map, linear scan") {
  const GridSpec spec{10, 10, 3, 0.05};
  Heatmap h(spec, 0.1);
  CHECK_FALSE(argmax_position(h));
  h.at({4, 5, 1}) = 0.7;
  auto p = argmax_position(h);
  REQUIRE(p);
  CHECK(p->position == Voxel{4, 5, 1});
  CHECK(p->score == 0.7);
  h.at({2, 8, 0}) = 0.7;
  CHECK(argmax_position(h)->position == Voxel{2, 8, 0});

  oracle::Rng rng(45);
  for (int t = 0; t < 20; ++t) {
    auto r = random_map(rng, spec);
    for (double& v : r.values()) v = std::round(v * 10) / 10;  // force ties
    Voxel best{};
    double bv = -1;
    oracle::for_each_voxel(spec, [&](const Voxel& q) {
      if (r.at(q) > bv) bv = r.at(q), best = q;
    });
    CHECK(argmax_position(r)->position == best);
  }
}

TEST_CASE("duplicate objects disambiguated by an auxiliary cue") {
  const GridSpec spec{60, 60, 4, 0.05};
  for (int sep = 12; sep <= 40; sep += 4) {
    const std::vector<Voxel> objs{{20, 10, 1}, {20, 10 + sep, 1}};
    const auto target = object_heatmap(objs, 0.1, spec);
    for (int which = 0; which < 2; ++which) {
      const Voxel cue{objs[which].px + 5, objs[which].py, 0};
      const auto fused = target * point_heatmap(cue, 0.01, spec);
      const auto peak = argmax_position(fused);
      REQUIRE(peak);
      CHECK(peak->position.cell() == objs[which].cell());
    }
  }
}

TEST_CASE("raw export round trip and projection") {
  oracle::Rng rng(46);
  const GridSpec spec{6, 7, 3, 0.05};
  const auto h = random_map(rng, spec);
  const auto dir = std::filesystem::temp_directory_path() / "mslm_heatmap_test";
  std::filesystem::create_directories(dir);
  save_raw(h, dir / "h.raw");
  CHECK(std::filesystem::file_size(dir / "h.raw") == 12 + 4 * 6 * 7 * 3);
  const auto back = load_raw(dir / "h.raw", 0.05);
  CHECK(back.spec() == spec);
  for (std::size_t i = 0; i < h.values().size(); ++i) {
    CHECK(back.values()[i] == static_cast<double>(static_cast<float>(h.values()[i])));
  }
  write_projection_pgm(h, dir / "h.pgm");
  CHECK(std::filesystem::exists(dir / "h.pgm"));
}
