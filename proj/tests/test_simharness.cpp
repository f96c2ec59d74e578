#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mslm/error.hpp"
#include "mslm/simharness.hpp"
#include "oracles.hpp"

using namespace mslm;
namespace fs = std::filesystem;

namespace {

std::string scene_text(const SyntheticScene& s) {
  const auto p = fs::temp_directory_path() / "mslm_scene_text.txt";
  save_scene(s, p);
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

double footprint_gap(const Box3& a, const Box3& b) {
  const double dx = std::max({a.min.x() - b.max.x(), b.min.x() - a.max.x(), 0.0});
  const double dz = std::max({a.min.z() - b.max.z(), b.min.z() - a.max.z(), 0.0});
  return std::hypot(dx, dz);
}

// Marches along the ray in small steps; the first sample inside a box or
// below the floor brackets the hit.
double march(const SyntheticScene& s, const Vec3& o, const Vec3& d, double t_max) {
  const double step = 1e-3;
  for (double t = step; t < t_max; t += step) {
    const Vec3 p = o + t * d;
    if (p.y() <= 0.0 && s.inside_room(p.x(), p.z())) return t;
    for (const auto& obj : s.objects)
      if (obj.box.contains(p)) return t;
  }
  return -1.0;
}

SyntheticScene single_box_scene() {
  SyntheticScene s;
  s.extent = 6.0;
  s.spec = scene_grid(6.0, 2.0, 0.05);
  s.objects.push_back({"cabinet", {Vec3(1.0, 0.0, -0.5), Vec3(1.5, 1.5, 0.5)}});
  s.free_space = scene_free_space(s);
  return s;
}

}  // namespace

TEST_CASE("scenes are deterministic per seed") {
  const auto a = generate_scene(7), b = generate_scene(7), c = generate_scene(8);
  CHECK(scene_text(a) == scene_text(b));
  CHECK(scene_text(a) != scene_text(c));
  CHECK(a.free_space == b.free_space);
}

TEST_CASE("scene layout invariants") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    SceneOptions o;
    o.size = seed % 3 == 0 ? SizeProfile::Medium : SizeProfile::Small;
    o.sounds = 3;
    const auto s = generate_scene(seed, o);
    REQUIRE(s.objects.size() == 6u);
    REQUIRE(s.sounds.size() == 3u);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const Box3& b = s.objects[i].box;
      CHECK(std::abs(b.min.x()) <= s.extent / 2 - o.clearance + 1e-9);
      CHECK(std::abs(b.max.x()) <= s.extent / 2 - o.clearance + 1e-9);
      CHECK(std::abs(b.min.z()) <= s.extent / 2 - o.clearance + 1e-9);
      CHECK(std::abs(b.max.z()) <= s.extent / 2 - o.clearance + 1e-9);
      for (std::size_t j = i + 1; j < s.objects.size(); ++j)
        CHECK(footprint_gap(b, s.objects[j].box) >= o.clearance - 1e-9);
    }
    for (const auto& src : s.sounds) {
      CHECK(s.inside_room(src.position.x(), src.position.z()));
      AgentState at;
      at.position = world_to_map(src.position, s.spec);
      CHECK_FALSE(s.free_space.blocked(at.cell()));
    }
    // Every free cell is reachable from every other.
    const auto& g = s.free_space;
    Cell first{-1, -1};
    std::size_t free_cells = 0;
    for (int px = 0; px < g.h(); ++px)
      for (int py = 0; py < g.w(); ++py)
        if (!g.occupied({px, py})) {
          if (first.px < 0) first = {px, py};
          ++free_cells;
        }
    std::vector<Cell> stack{first};
    std::vector<std::uint8_t> seen(g.cells().size());
    seen[first.px * g.w() + first.py] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
      const Cell c = stack.back();
      stack.pop_back();
      ++reached;
      for (const Cell n : {Cell{c.px + 1, c.py}, Cell{c.px - 1, c.py}, Cell{c.px, c.py + 1}, Cell{c.px, c.py - 1}}) {
        if (g.blocked(n) || seen[n.px * g.w() + n.py]) continue;
        seen[n.px * g.w() + n.py] = 1;
        stack.push_back(n);
      }
    }
    CHECK(reached == free_cells);
  }
}

TEST_CASE("duplicate mode plants exactly k separated instances") {
  for (int k : {2, 3}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SceneOptions o;
      o.duplicates = k;
      o.objects = k + 2;
      o.size = k == 3 ? SizeProfile::Medium : SizeProfile::Small;
      o.cue_rank = static_cast<int>(seed % 2);
      const auto s = generate_scene(seed, o);
      const auto dups = s.instances_of(s.objects.front().cls);
      REQUIRE(dups.size() == static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < dups.size(); ++i)
        for (std::size_t j = i + 1; j < dups.size(); ++j)
          CHECK(footprint_gap(s.objects[dups[i]].box, s.objects[dups[j]].box) >= 2.0 - 1e-9);
      REQUIRE(s.cue_object >= 0);
      // The cue sound is closer to its instance than to any other copy.
      const Vec3 p = s.sounds[0].position;
      for (int d : dups) {
        if (d == s.cue_object) continue;
        CHECK(s.objects[s.cue_object].box.floor_distance(p.x(), p.z()) <
              s.objects[d].box.floor_distance(p.x(), p.z()));
      }
    }
  }
  SceneOptions bad;
  bad.duplicates = 1;
  CHECK_THROWS_AS(generate_scene(0, bad), InvalidArgument);
}

TEST_CASE("scene file round trip") {
  SceneOptions o;
  o.duplicates = 2;
  o.sounds = 2;
  const auto s = generate_scene(3, o);
  const auto p = fs::temp_directory_path() / "mslm_scene_rt.txt";
  save_scene(s, p);
  const auto back = load_scene(p);
  CHECK(scene_text(back) == scene_text(s));
  CHECK(back.free_space == s.free_space);
  CHECK(back.spec == s.spec);
  {
    std::ofstream out(p);
    out << "mslm-scene 2\n";
  }
  CHECK_THROWS_AS(load_scene(p), UnsupportedVersion);
}

TEST_CASE("camera pose conventions") {
  CameraModel cam;
  for (double h : {0.0, 90.0, 180.0, -90.0, 37.0}) {
    const Pose p = camera_pose(0.5, -1.0, h, cam);
    CHECK(p.valid());
    CHECK(pose_heading(p) == doctest::Approx(normalize_heading(h)));
    // Looking along the heading: a point ahead projects in front of the camera.
    const Vec2 step = heading_vector(h);
    const Vec3 ahead = p.translation + Vec3(step.x(), -0.2, -step.y());
    CHECK(p.inverse().apply(ahead).z() > 0);
  }
}

TEST_CASE("box face depth equals the ray distance") {
  const auto s = single_box_scene();
  CameraModel cam;
  cam.pitch_deg = 0.0;
  // Heading 180 looks along +x towards the face at x = 1.0.
  const Pose p = camera_pose(-0.5, 0.0, 180.0, cam);
  Intrinsics k{50, 50, 40, 30, 81, 61};
  const auto view = render_view(s, p, k);
  CHECK(view.depth[30 * 81 + 40] == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(view.raster.classes[view.raster.at(40, 30)] == "cabinet");
  // Off-centre pixels on the face: depth along the optical axis is constant.
  CHECK(view.depth[25 * 81 + 38] == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("ray casting agrees with a marching oracle") {
  oracle::Rng rng(5);
  SceneOptions o;
  o.objects = 5;
  const auto s = generate_scene(11, o);
  int hits = 0;
  for (int i = 0; i < 300; ++i) {
    const Vec3 origin(oracle::uniform(rng, -2.5, 2.5), oracle::uniform(rng, 0.3, 1.8), oracle::uniform(rng, -2.5, 2.5));
    bool inside = false;
    for (const auto& obj : s.objects) inside = inside || obj.box.contains(origin);
    if (inside) continue;
    Vec3 d(oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 0.2), oracle::uniform(rng, -1, 1));
    d.normalize();
    const auto hit = cast_ray(s, origin, d);
    const double t = march(s, origin, d, 12.0);
    if (t < 0) {
      CHECK_FALSE(hit);
      continue;
    }
    REQUIRE(hit);
    ++hits;
    CHECK(hit->t <= t + 1e-9);
    CHECK(hit->t >= t - 1e-3 - 1e-9);
  }
  CHECK(hits > 150);
}

TEST_CASE("rendered depth back-projects onto scene surfaces") {
  const auto s = generate_scene(2);
  CameraModel cam;
  const auto traj = boustrophedon(s, cam);
  REQUIRE(traj.size() > 20);
  for (std::size_t f = 0; f < traj.size(); f += 9) {
    const auto view = render_view(s, traj[f].pose, cam.intrinsics);
    for (int v = 0; v < cam.intrinsics.height; v += 7) {
      for (int u = 0; u < cam.intrinsics.width; u += 7) {
        const float d = view.depth[v * cam.intrinsics.width + u];
        const auto id = view.raster.at(u, v);
        if (d == 0.0f) {
          CHECK(id == 0xFFFF);
          continue;
        }
        const Vec3 w = to_world(back_project(Vec2(u, v), d, cam.intrinsics), traj[f].pose);
        if (id == 0) {
          CHECK(std::abs(w.y()) < 1e-4);
        } else {
          bool on_surface = false;
          for (const auto& obj : s.objects) {
            if (obj.cls != view.raster.classes[id]) continue;
            const Vec3 lo = obj.box.min.array() - 1e-4, hi = obj.box.max.array() + 1e-4;
            on_surface = on_surface || ((w.array() >= lo.array()).all() && (w.array() <= hi.array()).all());
          }
          CHECK(on_surface);
        }
      }
    }
  }
}

TEST_CASE("empty scene renders floor only") {
  SceneOptions o;
  o.objects = 0;
  o.sounds = 0;
  const auto s = generate_scene(1, o);
  CHECK(s.classes() == std::vector<std::string>{"floor"});
  const auto traj = boustrophedon(s, CameraModel{});
  CHECK(traj.size() == 36u * 4u);
  const auto data = synth_stream(s, traj);
  for (const auto& f : data.frames)
    for (auto id : f.raster.ids) CHECK((id == 0 || id == 0xFFFF));
  CHECK(data.events.empty());
}

TEST_CASE("boustrophedon covers free space and sees every object") {
  const auto s = generate_scene(4);
  CameraModel cam;
  const auto traj = boustrophedon(s, cam);
  for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i].time > traj[i - 1].time);
  for (const auto& sample : traj) {
    AgentState at;
    at.position = world_to_map(sample.pose.translation, s.spec);
    CHECK_FALSE(s.free_space.blocked(at.cell()));
    CHECK(sample.pose.translation.y() == doctest::Approx(cam.height));
  }
  std::vector<bool> seen(s.classes().size(), false);
  for (std::size_t f = 0; f < traj.size(); ++f) {
    const auto view = render_view(s, traj[f].pose, cam.intrinsics);
    for (auto id : view.raster.ids)
      if (id != 0xFFFF) seen[id] = true;
  }
  for (bool b : seen) CHECK(b);
}

TEST_CASE("audio events are recoverable by silence splitting") {
  SceneOptions o;
  o.sounds = 3;
  const auto s = generate_scene(6, o);
  const auto traj = boustrophedon(s, CameraModel{});
  const auto data = synth_stream(s, traj);
  REQUIRE(data.events.size() == 3u);
  const auto segments = split_on_silence(data.audio);
  REQUIRE(segments.size() == data.events.size());
  for (const auto& e : data.events) {
    const auto* found = event_for(data, e.span);
    REQUIRE(found);
    CHECK(found->label == e.label);
    bool recovered = false;
    for (const auto& seg : segments)
      recovered = recovered || (std::abs(seg.start - e.span.start) < 0.02 && std::abs(seg.end - e.span.end) < 0.03);
    CHECK(recovered);
    // Inserted where the trajectory passes closest to the source.
    const auto pose = pose_at(data.odometry, e.span.start);
    REQUIRE(pose);
    const Vec3 src = s.sounds[e.source].position;
    const double d_event = std::hypot(pose->translation.x() - src.x(), pose->translation.z() - src.z());
    double best = 1e9;
    for (const auto& t : traj) best = std::min(best, std::hypot(t.pose.translation.x() - src.x(), t.pose.translation.z() - src.z()));
    CHECK(d_event <= best + 2.5);
  }
}

TEST_CASE("landmark keypoints reproject and localize a novel view") {
  const auto s = generate_scene(9);
  CameraModel cam;
  StreamOptions so;
  so.landmarks_per_face = 10;
  so.floor_landmarks = 200;
  const auto data = synth_stream(s, boustrophedon(s, cam), so);
  std::size_t total = 0;
  for (const auto& f : data.frames) {
    for (const auto& kp : f.keypoints) {
      // The keypoint depth matches the rendered depth up to pixel rounding.
      const Vec3 w = to_world(back_project(kp.pixel, kp.depth, cam.intrinsics), f.pose);
      double best = 1e9;
      for (const auto& l : data.landmarks) best = std::min(best, (l.position - w).norm());
      CHECK(best < 1e-6);
    }
    total += f.keypoints.size();
  }
  CHECK(total > data.frames.size() * 5);

  MockProvider p(32);
  BuiltMap built = build_map(data, s.spec, p);
  // A pose just off a mapped view; the mock global descriptor is a class
  // histogram, so retrieval needs a view with nearly the same content.
  const Pose& ref = data.frames[40].pose;
  const double h = pose_heading(ref) + 4.0;
  const Pose q_pose = camera_pose(ref.translation.x() + 0.1, ref.translation.z() - 0.05, h, cam);
  QueryFrame q;
  q.intrinsics = cam.intrinsics;
  q.keypoints = observe_landmarks(s, data.landmarks, q_pose, cam.intrinsics, 0.01, 3);
  q.global = p.embed_global(render_view(s, q_pose, cam.intrinsics).raster, 99999);
  std::mt19937_64 rng(1);
  LocalizeParams lp;
  const auto loc = localize_image(q, built.references, 0.1, s.spec, lp, rng);
  INFO("ref " << loc.reference << " inliers " << loc.inliers << " query kps " << q.keypoints.size()
       << " ref kps " << built.references[loc.reference].keypoints.size());
  REQUIRE(loc.success);
  CHECK((loc.pose->translation - q_pose.translation).norm() < 0.05);
}

TEST_CASE("dataset manifest round trip") {
  SceneOptions o;
  o.sounds = 2;
  const auto s = generate_scene(12, o);
  StreamOptions so;
  so.landmarks_per_face = 4;
  so.floor_landmarks = 40;
  const auto data = synth_stream(s, boustrophedon(s, CameraModel{}), so);
  const auto dir = fresh_dir("mslm_dataset_rt");
  save_dataset(data, dir);
  const auto back = load_dataset(dir / "manifest.txt");
  CHECK(back.classes == data.classes);
  CHECK(back.intrinsics.fx == data.intrinsics.fx);
  CHECK(back.intrinsics.width == data.intrinsics.width);
  REQUIRE(back.frames.size() == data.frames.size());
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    CHECK(back.frames[i].raster.ids == data.frames[i].raster.ids);
    CHECK(back.frames[i].depth == data.frames[i].depth);
    CHECK(back.frames[i].time == data.frames[i].time);
    CHECK((back.frames[i].pose.rotation - data.frames[i].pose.rotation).norm() == 0.0);
    CHECK((back.frames[i].pose.translation - data.frames[i].pose.translation).norm() == 0.0);
    REQUIRE(back.frames[i].keypoints.size() == data.frames[i].keypoints.size());
    for (std::size_t k = 0; k < data.frames[i].keypoints.size(); ++k) {
      CHECK((back.frames[i].keypoints[k].pixel - data.frames[i].keypoints[k].pixel).norm() < 1e-4);
    }
  }
  CHECK(back.odometry.size() == data.odometry.size());
  REQUIRE(back.events.size() == data.events.size());
  for (std::size_t i = 0; i < data.events.size(); ++i) {
    CHECK(back.events[i].label == data.events[i].label);
    CHECK(back.events[i].span == data.events[i].span);
  }
  CHECK(back.audio.samples == data.audio.samples);

  {
    std::ofstream out(dir / "manifest.txt");
    out << "mslm-dataset 1\nbogus 1\n";
  }
  CHECK_THROWS_AS(load_dataset(dir / "manifest.txt"), FormatError);
}

TEST_CASE("16-bit raster PGM round trip") {
  ClassRaster r;
  r.width = 3;
  r.height = 2;
  r.ids = {0, 1, 0xFFFF, 300, 65534, 2};
  const auto p = fs::temp_directory_path() / "mslm_raster.pgm";
  write_raster_pgm(p, r);
  const auto back = read_raster_pgm(p, {"a", "b"});
  CHECK(back.ids == r.ids);
  CHECK(back.classes.size() == 2u);
  CHECK(fs::file_size(p) == std::string("P5\n3 2\n65535\n").size() + 12);
}

TEST_CASE("map built from a stream locates objects and sounds") {
  SceneOptions o;
  o.sounds = 2;
  const auto s = generate_scene(21, o);
  const auto data = synth_stream(s, boustrophedon(s, CameraModel{}));
  MockProvider p(64);
  const BuiltMap m = build_map(data, s.spec, p);
  CHECK(m.grid.size() > 1000u);
  CHECK(m.references.size() == data.frames.size());
  CHECK(m.audio_db.size() == 2u);
  MapBackend backend(m.grid, scene_vocabulary(), p);
  for (const auto& obj : s.objects) {
    const auto found = backend.locate(obj.cls);
    REQUIRE_FALSE(found.empty());
    const Vec3 w = map_to_world(found.front(), 0.0, s.spec);
    CHECK(std::hypot(w.x() - obj.box.center().x(), w.z() - obj.box.center().z()) < 0.3);
    // Mapped footprint cells are obstacles.
    AgentState at;
    at.position = world_to_map(obj.box.center(), s.spec);
    CHECK(m.obstacles.blocked(at.cell()));
  }
  // Audio entries sit at the pose where each event was inserted.
  for (const auto& e : m.audio_db.entries) {
    const auto* ev = event_for(data, {e.time, e.time + 0.1});
    REQUIRE(ev);
    CHECK(std::abs(e.time - ev->span.start) < 0.1);
  }
}

TEST_CASE("fill_enclosed closes pockets but not open space") {
  ObstacleGrid g(20, 20);
  for (int i = 5; i <= 10; ++i) {
    g.set({5, i}, true);
    g.set({10, i}, true);
    g.set({i, 5}, true);
    g.set({i, 10}, true);
  }
  const auto filled = fill_enclosed(g, 100);
  CHECK(filled.occupied({7, 7}));
  CHECK_FALSE(filled.occupied({2, 2}));
  CHECK(g.subset_of(filled));
  CHECK(filled.occupied_count() == g.occupied_count() + 16);
  CHECK(fill_enclosed(g, 15) == g);
}

TEST_CASE("ground-truth backend") {
  SceneOptions o;
  o.sounds = 1;
  const auto s = generate_scene(13, o);
  SceneBackend b(s);
  const auto& obj = s.objects[0];
  const auto centers = b.locate(obj.cls);
  REQUIRE(centers.size() == 1u);
  CHECK((map_to_world(centers[0], 0, s.spec) - Vec3(obj.box.center().x(), 0, obj.box.center().z())).norm() < 1e-9);
  const auto voxels = b.object_voxels(obj.cls);
  CHECK_FALSE(voxels.empty());
  for (const auto& v : voxels) {
    const Vec3 c = voxel_center(v, s.spec);
    CHECK(obj.box.floor_distance(c.x(), c.z()) <= 0.025 + 1e-9);
  }
  const auto h = b.sound_heatmap(s.sounds[0].cls, 0.01);
  REQUIRE(h);
  const auto peak = argmax_position(*h);
  REQUIRE(peak);
  CHECK((map_to_world(Vec2(peak->position.px, peak->position.py), 0, s.spec) - s.sounds[0].position).norm() < 0.05);
  CHECK_FALSE(b.sound_heatmap("silence", 0.01));
  CHECK(b.locate("unicorn").empty());
}

TEST_CASE("SPL unit cases") {
  auto one = [](bool s, double p, double l) {
    EpisodeResult e{{s}, {p}, {l}};
    return eval_sr_spl(std::span<const EpisodeResult>(&e, 1));
  };
  CHECK(one(true, 3.0, 3.0).spl == 1.0);
  CHECK(one(true, 4.0, 2.0).spl == 0.5);
  CHECK(one(false, 2.0, 2.0).spl == 0.0);
  CHECK(one(false, 0.5, 20.0).spl == 0.0);
  CHECK(one(true, 1.0, 2.0).spl == 1.0);  // shorter than shortest: capped
  CHECK(one(true, 0.0, 0.0).spl == 1.0);
  CHECK(one(true, 3.0, 3.0).sr == 100.0);
  CHECK_THROWS_AS(one(true, -1.0, 2.0), InvalidArgument);
  EpisodeResult ragged{{true, false}, {1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(eval_sr_spl(std::span<const EpisodeResult>(&ragged, 1)), InvalidArgument);
}

TEST_CASE("SR, SPL and in-a-row against a direct recount") {
  oracle::Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EpisodeResult> eps(oracle::uniform_int(rng, 1, 12));
    const int k = oracle::uniform_int(rng, 1, 5);
    for (auto& e : eps) {
      for (int i = 0; i < k; ++i) {
        e.success.push_back(oracle::uniform(rng, 0, 1) < 0.7);
        const double l = oracle::uniform(rng, 0.5, 5.0);
        e.shortest_length.push_back(l);
        e.path_length.push_back(l * oracle::uniform(rng, 0.8, 3.0));
      }
    }
    const auto m = eval_sr_spl(eps);
    double succ = 0, spl = 0, n = 0;
    for (const auto& e : eps)
      for (int i = 0; i < k; ++i) {
        n += 1;
        if (e.success[i]) {
          succ += 1;
          spl += e.shortest_length[i] / std::max(e.shortest_length[i], e.path_length[i]);
        }
      }
    CHECK(m.sr == doctest::Approx(100 * succ / n));
    CHECK(m.spl == doctest::Approx(spl / n));
    CHECK(m.spl <= m.sr / 100 + 1e-12);
    REQUIRE(m.in_a_row.size() == static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
      double rows = 0;
      for (const auto& e : eps) {
        bool all = true;
        for (int i = 0; i < j; ++i) all = all && e.success[i];
        rows += all;
      }
      CHECK(m.in_a_row[j - 1] == doctest::Approx(100 * rows / eps.size()));
      if (j > 1) CHECK(m.in_a_row[j - 1] <= m.in_a_row[j - 2]);
    }
  }
  // A failure ends the row even if later subgoals succeed.
  EpisodeResult e{{true, false, true}, {1, 1, 1}, {1, 1, 1}};
  const auto m = eval_sr_spl(std::span<const EpisodeResult>(&e, 1));
  CHECK(m.in_a_row == std::vector<double>{100.0, 0.0, 0.0});
}

TEST_CASE("Recall@1 thresholds and brute-force recount") {
  const std::vector<Vec3> exact{Vec3(1, 0, 1), Vec3(-2, 0, 0.5)};
  const std::vector<std::vector<Vec3>> truth{{Vec3(1, 0, 1)}, {Vec3(3, 0, 3), Vec3(-2, 0, 0.5)}};
  const auto all = eval_recall(exact, truth);
  CHECK(all.recall == std::vector<double>{100, 100, 100, 100});
  CHECK(all.average_min_distance == 0.0);

  const std::vector<double> off{0.7};
  const auto r = eval_recall(off);
  CHECK(r.recall[0] == 0.0);
  CHECK(r.recall[1] == 100.0);
  CHECK(r.average_min_distance == doctest::Approx(0.7));

  oracle::Rng rng(23);
  std::vector<Vec3> preds;
  std::vector<std::vector<Vec3>> truths;
  for (int i = 0; i < 200; ++i) {
    preds.emplace_back(oracle::uniform(rng, -3, 3), 0, oracle::uniform(rng, -3, 3));
    std::vector<Vec3> t;
    for (int j = oracle::uniform_int(rng, 1, 3); j > 0; --j)
      t.emplace_back(oracle::uniform(rng, -3, 3), 0, oracle::uniform(rng, -3, 3));
    truths.push_back(t);
  }
  const auto rr = eval_recall(preds, truths);
  double sum = 0;
  for (std::size_t th = 0; th < kRecallThresholds.size(); ++th) {
    int hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      bool hit = false;
      for (const auto& t : truths[i]) hit = hit || (preds[i] - t).norm() < kRecallThresholds[th];
      hits += hit;
    }
    CHECK(rr.recall[th] == doctest::Approx(100.0 * hits / preds.size()));
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double best = 1e9;
    for (const auto& t : truths[i]) best = std::min(best, (preds[i] - t).norm());
    sum += best;
  }
  CHECK(rr.average_min_distance == doctest::Approx(sum / preds.size()));
}

TEST_CASE("suites run on a few scenes and write CSV") {
  SuiteOptions o;
  o.scenes = 2;
  const auto spatial = run_spatial_suite(o);
  REQUIRE(spatial.size() == 2u);
  CHECK(spatial[0].instructions.size() == 4u);
  std::ostringstream csv;
  write_sr_csv(csv, "spatial", spatial);
  const std::string text = csv.str();
  CHECK(text.rfind("suite,episodes,subgoals,sr,spl,sr_1_in_a_row", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);

  const auto dis = run_disambiguation_suite(o);
  CHECK(dis.fused_distances.size() == 2u);
  std::ostringstream rcsv;
  write_recall_csv(rcsv, "disambiguation", dis);
  CHECK(rcsv.str().find("fused") != std::string::npos);

  const auto emb = run_embodiment_suite(o);
  REQUIRE(emb.size() == 2u);
  for (const auto& c : emb) CHECK(c.cost_excluding <= c.cost_including);
}
