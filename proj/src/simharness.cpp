#include "mslm/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>

#include "mslm/binio.hpp"
#include "mslm/error.hpp"

namespace mslm {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

constexpr std::uint16_t kNoHit = 0xFFFF;
constexpr double kDeg = std::numbers::pi / 180.0;

// Gap between two footprints on the floor (0 when they overlap).
double footprint_gap(const Box3& a, const Box3& b) {
  const double dx = std::max({a.min.x() - b.max.x(), b.min.x() - a.max.x(), 0.0});
  const double dz = std::max({a.min.z() - b.max.z(), b.min.z() - a.max.z(), 0.0});
  return std::hypot(dx, dz);
}

Box3 make_box(double cx, double cz, double sx, double sz, double height) {
  return {Vec3(cx - sx / 2, 0.0, cz - sz / 2), Vec3(cx + sx / 2, height, cz + sz / 2)};
}

bool ray_box(const Vec3& o, const Vec3& d, const Box3& b, double& t_hit) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < b.min[i] || o[i] > b.max[i]) return false;
      continue;
    }
    double a = (b.min[i] - o[i]) / d[i];
    double c = (b.max[i] - o[i]) / d[i];
    if (a > c) std::swap(a, c);
    t0 = std::max(t0, a);
    t1 = std::min(t1, c);
    if (t0 > t1) return false;
  }
  if (t0 <= 1e-9) return false;  // origin inside or touching
  t_hit = t0;
  return true;
}

// Free cells reachable from the first free cell, 4-connected.
bool free_space_connected(const ObstacleGrid& g) {
  std::vector<std::uint8_t> seen(g.cells().size(), 0);
  std::size_t free_total = 0;
  std::optional<Cell> first;
  for (std::int32_t px = 0; px < g.h(); ++px)
    for (std::int32_t py = 0; py < g.w(); ++py)
      if (!g.occupied({px, py})) {
        ++free_total;
        if (!first) first = Cell{px, py};
      }
  if (!first) return false;
  std::queue<Cell> q;
  q.push(*first);
  seen[static_cast<std::size_t>(first->px) * g.w() + first->py] = 1;
  std::size_t reached = 0;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    ++reached;
    const Cell next[4] = {{c.px + 1, c.py}, {c.px - 1, c.py}, {c.px, c.py + 1}, {c.px, c.py - 1}};
    for (const Cell& n : next) {
      if (g.blocked(n)) continue;
      auto& s = seen[static_cast<std::size_t>(n.px) * g.w() + n.py];
      if (!s) {
        s = 1;
        q.push(n);
      }
    }
  }
  return reached == free_total;
}

double min_gap(const std::vector<SceneObject>& objects, double x, double z) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : objects) best = std::min(best, o.box.floor_distance(x, z));
  return best;
}

std::string rest_of_line(std::istream& in) {
  std::string s;
  std::getline(in, s);
  const auto b = s.find_first_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b);
}

Embedding random_unit(Rng& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Embedding v(dim);
  for (auto& x : v) x = n(rng);
  normalize_in_place(v);
  return v;
}

Vec2 map_xy(const Vec3& world, const GridSpec& spec) { return world_to_map(world, spec); }

double geodesic(const ObstacleGrid& g, const Vec2& a, const Vec2& b, double scale) {
  AgentState sa, sb;
  sa.position = a;
  sb.position = b;
  if (sa.cell() == sb.cell()) return 0.0;
  if (g.blocked(sa.cell()) || g.blocked(sb.cell())) return (a - b).norm() * scale;
  const auto path = plan_path(g, sa.cell(), sb.cell());
  if (!path) return (a - b).norm() * scale;
  return path_cost(*path) * scale;
}

}  // namespace

// Scene.

bool Box3::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

double Box3::floor_distance(double x, double z) const {
  const double dx = std::max({min.x() - x, 0.0, x - max.x()});
  const double dz = std::max({min.z() - z, 0.0, z - max.z()});
  return std::hypot(dx, dz);
}

SizeProfile size_profile_from_name(std::string_view name) {
  if (name == "small") return SizeProfile::Small;
  if (name == "medium") return SizeProfile::Medium;
  if (name == "large") return SizeProfile::Large;
  throw InvalidArgument("unknown size profile '" + std::string(name) + "'");
}

double room_extent(SizeProfile p) {
  switch (p) {
    case SizeProfile::Small: return 6.0;
    case SizeProfile::Medium: return 8.0;
    case SizeProfile::Large: return 10.0;
  }
  return 6.0;
}

const std::vector<ObjectClass>& object_catalog() {
  static const std::vector<ObjectClass> catalog{
      {"chair", 0.5, 0.5, 0.9},    {"table", 1.2, 0.8, 0.75},   {"sofa", 1.8, 0.9, 0.8},
      {"counter", 1.4, 0.6, 0.9},  {"sink", 0.6, 0.5, 0.9},     {"oven", 0.6, 0.6, 0.9},
      {"fridge", 0.7, 0.7, 1.8},   {"cabinet", 1.0, 0.5, 1.2},  {"bed", 2.0, 1.4, 0.6},
      {"toilet", 0.5, 0.7, 0.8},   {"plant", 0.4, 0.4, 1.0},    {"television", 1.0, 0.3, 1.1},
      {"bookshelf", 0.9, 0.35, 1.6}, {"stool", 0.4, 0.4, 0.6},
  };
  return catalog;
}

const std::vector<std::string>& sound_catalog() {
  static const std::vector<std::string> sounds{"dog barking", "glass breaking", "crying baby", "door knock",
                                               "cat meowing", "alarm clock",    "water running", "footsteps"};
  return sounds;
}

std::vector<std::string> scene_vocabulary() {
  std::vector<std::string> v{"floor"};
  for (const auto& c : object_catalog()) v.push_back(c.name);
  return v;
}

std::vector<std::string> SyntheticScene::classes() const {
  std::vector<std::string> out{"floor"};
  for (const auto& o : objects)
    if (std::find(out.begin(), out.end(), o.cls) == out.end()) out.push_back(o.cls);
  return out;
}

std::vector<int> SyntheticScene::instances_of(const std::string& cls) const {
  std::vector<int> out;
  for (int i = 0; i < std::ssize(objects); ++i)
    if (objects[i].cls == cls) out.push_back(i);
  return out;
}

bool SyntheticScene::inside_room(double x, double z) const {
  return std::abs(x) <= extent / 2 && std::abs(z) <= extent / 2;
}

GridSpec scene_grid(double extent, double height, double scale) {
  auto cells = static_cast<std::int32_t>(std::ceil(extent / scale - 1e-9)) + 8;
  cells += cells % 2;
  return {cells, cells, static_cast<std::int32_t>(std::ceil(height / scale - 1e-9)) + 1, scale};
}

ObstacleGrid scene_free_space(const SyntheticScene& scene) {
  const GridSpec& spec = scene.spec;
  ObstacleGrid g(spec.h, spec.w);
  const double half = spec.scale / 2;
  for (std::int32_t px = 0; px < spec.h; ++px) {
    for (std::int32_t py = 0; py < spec.w; ++py) {
      const Vec3 c = cell_center({px, py}, spec);
      bool blocked = !scene.inside_room(c.x(), c.z());
      for (const auto& o : scene.objects) {
        if (blocked) break;
        blocked = c.x() + half > o.box.min.x() && c.x() - half < o.box.max.x() && c.z() + half > o.box.min.z() &&
                  c.z() - half < o.box.max.z();
      }
      g.set({px, py}, blocked);
    }
  }
  return g;
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneOptions& opt) {
  if (opt.objects < 0 || opt.sounds < 0 || opt.duplicates < 0 || opt.duplicates == 1) {
    throw InvalidArgument("scene needs non-negative counts and duplicates of 0 or >= 2");
  }
  if (opt.duplicates > opt.objects) throw InvalidArgument("more duplicates than objects");
  if (opt.sounds > std::ssize(sound_catalog())) throw InvalidArgument("not enough sound classes");
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x5CE7E);
  const double extent = room_extent(opt.size);
  const auto& catalog = object_catalog();

  for (int attempt = 0; attempt < 200; ++attempt) {
    SyntheticScene s;
    s.extent = extent;
    s.spec = scene_grid(extent, s.height, opt.scale);

    std::vector<int> order(catalog.size());
    for (int i = 0; i < std::ssize(order); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> picks;
    if (opt.duplicates > 0) {
      // Compact classes keep two separated copies placeable in a small room.
      auto it = std::find_if(order.begin(), order.end(), [&](int c) {
        return catalog[c].sx * catalog[c].sz <= 1.0;
      });
      const int dup = *it;
      order.erase(it);
      picks.assign(opt.duplicates, dup);
    }
    for (int i = 0; std::ssize(picks) < opt.objects && i < std::ssize(order); ++i) picks.push_back(order[i]);
    if (std::ssize(picks) < opt.objects) throw InvalidArgument("not enough object classes");

    bool ok = true;
    for (std::size_t n = 0; n < picks.size() && ok; ++n) {
      const ObjectClass& c = catalog[picks[n]];
      const bool rotate = uniform(rng, 0, 1) < 0.5;
      const double sx = rotate ? c.sz : c.sx;
      const double sz = rotate ? c.sx : c.sz;
      bool placed = false;
      for (int tries = 0; tries < 400 && !placed; ++tries) {
        const double lim_x = extent / 2 - opt.clearance - sx / 2;
        const double lim_z = extent / 2 - opt.clearance - sz / 2;
        if (lim_x <= 0 || lim_z <= 0) break;
        const Box3 b = make_box(uniform(rng, -lim_x, lim_x), uniform(rng, -lim_z, lim_z), sx, sz, c.height);
        placed = true;
        for (const auto& o : s.objects) {
          const double need = (opt.duplicates > 0 && o.cls == c.name && n < static_cast<std::size_t>(opt.duplicates))
                                  ? std::max(opt.clearance, opt.min_duplicate_separation)
                                  : opt.clearance;
          if (footprint_gap(o.box, b) < need) {
            placed = false;
            break;
          }
        }
        if (placed) s.objects.push_back({c.name, b});
      }
      ok = placed;
    }
    if (!ok) continue;

    s.free_space = scene_free_space(s);
    if (!free_space_connected(s.free_space)) continue;

    std::vector<std::string> sounds = sound_catalog();
    std::shuffle(sounds.begin(), sounds.end(), rng);
    for (int i = 0; i < opt.sounds && ok; ++i) {
      SoundSource src{sounds[i], Vec3::Zero()};
      bool placed = false;
      if (i == 0 && opt.duplicates > 0) {
        std::vector<int> dups = s.instances_of(s.objects.front().cls);
        std::sort(dups.begin(), dups.end(), [&](int a, int b) {
          const Vec3 ca = s.objects[a].box.center(), cb = s.objects[b].box.center();
          return std::pair(ca.x(), ca.z()) < std::pair(cb.x(), cb.z());
        });
        const int rank = opt.cue_rank >= 0 ? opt.cue_rank % static_cast<int>(dups.size())
                                           : uniform_int(rng, 0, static_cast<int>(dups.size()) - 1);
        s.cue_object = dups[rank];
        const Box3& cue = s.objects[s.cue_object].box;
        // Away from the nearest other copy.
        Vec2 away(1.0, 0.0);
        double nearest = std::numeric_limits<double>::infinity();
        for (int d : dups) {
          if (d == s.cue_object) continue;
          const Vec3 diff = cue.center() - s.objects[d].box.center();
          if (diff.norm() < nearest) {
            nearest = diff.norm();
            away = Vec2(diff.x(), diff.z()).normalized();
          }
        }
        for (double turn : {0.0, 30.0, -30.0, 60.0, -60.0, 90.0, -90.0, 120.0, -120.0}) {
          const double a = std::atan2(away.y(), away.x()) + turn * kDeg;
          const Vec2 dir(std::cos(a), std::sin(a));
          // Step out from the centre until 0.5 m clear of the footprint.
          for (double r = 0.0; r < extent; r += 0.05) {
            const double x = cue.center().x() + dir.x() * r, z = cue.center().z() + dir.y() * r;
            if (cue.floor_distance(x, z) < 0.5) continue;
            if (std::abs(x) <= extent / 2 - 0.4 && std::abs(z) <= extent / 2 - 0.4 && min_gap(s.objects, x, z) >= 0.4) {
              src.position = Vec3(x, 0.0, z);
              placed = true;
            }
            break;
          }
          if (placed) break;
        }
      } else {
        for (int tries = 0; tries < 400 && !placed; ++tries) {
          const double x = uniform(rng, -extent / 2 + 0.5, extent / 2 - 0.5);
          const double z = uniform(rng, -extent / 2 + 0.5, extent / 2 - 0.5);
          if (min_gap(s.objects, x, z) < 0.4) continue;
          src.position = Vec3(x, 0.0, z);
          placed = true;
        }
      }
      if (placed) s.sounds.push_back(src);
      ok = placed;
    }
    if (ok) return s;
  }
  throw InvalidArgument("could not lay out scene for seed " + std::to_string(seed));
}

void save_scene(const SyntheticScene& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << std::setprecision(17);
  out << "mslm-scene 1\n";
  out << "extent " << s.extent << " height " << s.height << " scale " << s.spec.scale << "\n";
  for (const auto& o : s.objects) {
    out << "object " << o.box.min.x() << ' ' << o.box.min.y() << ' ' << o.box.min.z() << ' ' << o.box.max.x() << ' '
        << o.box.max.y() << ' ' << o.box.max.z() << ' ' << o.cls << "\n";
  }
  for (const auto& src : s.sounds) {
    out << "sound " << src.position.x() << ' ' << src.position.y() << ' ' << src.position.z() << ' ' << src.cls
        << "\n";
  }
  out << "cue " << s.cue_object << "\n";
}

SyntheticScene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scene " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mslm-scene") throw FormatError("not a scene file: " + path.string(), 0);
  if (version != 1) throw UnsupportedVersion(static_cast<unsigned>(version), 0);
  SyntheticScene s;
  double scale = 0.05;
  std::string key;
  while (in >> key) {
    if (key == "extent") {
      std::string h, sc;
      in >> s.extent >> h >> s.height >> sc >> scale;
    } else if (key == "object") {
      SceneObject o;
      in >> o.box.min.x() >> o.box.min.y() >> o.box.min.z() >> o.box.max.x() >> o.box.max.y() >> o.box.max.z();
      o.cls = rest_of_line(in);
      s.objects.push_back(o);
    } else if (key == "sound") {
      SoundSource src;
      in >> src.position.x() >> src.position.y() >> src.position.z();
      src.cls = rest_of_line(in);
      s.sounds.push_back(src);
    } else if (key == "cue") {
      in >> s.cue_object;
    } else {
      throw FormatError("unknown scene record '" + key + "'", 0);
    }
    if (in.fail()) throw FormatError("malformed scene record '" + key + "'", 0);
  }
  s.spec = scene_grid(s.extent, s.height, scale);
  s.free_space = scene_free_space(s);
  return s;
}

// Rendering.

Pose camera_pose(double x, double z, double heading, const CameraModel& camera) {
  const double th = heading * kDeg, p = camera.pitch_deg * kDeg;
  const Vec3 f(std::cos(p) * -std::cos(th), -std::sin(p), std::cos(p) * -std::sin(th));
  const Vec3 r(std::sin(th), 0.0, -std::cos(th));
  const Vec3 d = f.cross(r);
  Pose pose;
  pose.rotation.col(0) = r;
  pose.rotation.col(1) = d;
  pose.rotation.col(2) = f;
  pose.translation = Vec3(x, camera.height, z);
  return pose;
}

double pose_heading(const Pose& pose) {
  const Vec3 f = pose.rotation.col(2);
  return normalize_heading(std::atan2(-f.z(), -f.x()) / kDeg);
}

std::optional<RayHit> cast_ray(const SyntheticScene& scene, const Vec3& o, const Vec3& d) {
  std::optional<RayHit> best;
  if (d.y() < 0.0 && o.y() > 0.0) {
    const double t = -o.y() / d.y();
    const Vec3 p = o + t * d;
    if (scene.inside_room(p.x(), p.z())) best = RayHit{t, -1};
  }
  for (int i = 0; i < std::ssize(scene.objects); ++i) {
    double t = 0.0;
    if (ray_box(o, d, scene.objects[i].box, t) && (!best || t < best->t)) best = RayHit{t, i};
  }
  return best;
}

RenderedView render_view(const SyntheticScene& scene, const Pose& camera, const Intrinsics& k) {
  RenderedView view;
  const auto classes = scene.classes();
  std::vector<std::uint16_t> object_id(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    object_id[i] = static_cast<std::uint16_t>(std::find(classes.begin(), classes.end(), scene.objects[i].cls) -
                                              classes.begin());
  }
  view.raster.width = k.width;
  view.raster.height = k.height;
  view.raster.classes = classes;
  view.raster.ids.assign(static_cast<std::size_t>(k.width) * k.height, kNoHit);
  view.depth.assign(view.raster.ids.size(), 0.0f);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir = camera.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const auto hit = cast_ray(scene, camera.translation, dir);
      if (!hit) continue;
      const std::size_t i = static_cast<std::size_t>(v) * k.width + u;
      view.depth[i] = static_cast<float>(hit->t);
      view.raster.ids[i] = hit->object < 0 ? 0 : object_id[hit->object];
    }
  }
  return view;
}

// Streams.

Odometry boustrophedon(const SyntheticScene& scene, const CameraModel& camera, const TrajectoryOptions& opt) {
  if (!(opt.spacing > 0) || opt.views < 1 || !(opt.dt > 0)) throw InvalidArgument("invalid trajectory options");
  const double half = scene.extent / 2;
  std::vector<double> lanes;
  for (double c = -half + opt.spacing / 2; c <= half - opt.spacing / 2 + 1e-9; c += opt.spacing) lanes.push_back(c);
  Odometry odom;
  double t = 0.0;
  for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
    const bool forward = lane % 2 == 0;
    // Moving +x is heading 180 (south), −x heading 0.
    const double travel = forward ? 180.0 : 0.0;
    for (std::size_t k = 0; k < lanes.size(); ++k) {
      const double x = lanes[forward ? k : lanes.size() - 1 - k];
      const double z = lanes[lane];
      if (std::abs(x) > half - opt.wall_margin || std::abs(z) > half - opt.wall_margin) continue;
      if (min_gap(scene.objects, x, z) < opt.wall_margin) continue;
      for (int view = 0; view < opt.views; ++view) {
        odom.push_back({t, camera_pose(x, z, normalize_heading(travel + 360.0 * view / opt.views), camera)});
        t += opt.dt;
      }
    }
  }
  return odom;
}

std::vector<Keypoint> observe_landmarks(const SyntheticScene& scene, std::span<const Landmark> landmarks,
                                        const Pose& pose, const Intrinsics& k, double sigma, std::uint64_t seed) {
  Rng rng(seed ^ 0x1A4D);
  std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
  const Pose world_to_cam = pose.inverse();
  std::vector<Keypoint> out;
  for (const Landmark& l : landmarks) {
    const Vec3 pc = world_to_cam.apply(l.position);
    if (pc.z() <= 1e-6) continue;
    const Vec2 px = k.project(pc);
    if (!k.contains(px)) continue;
    const auto hit = cast_ray(scene, pose.translation, l.position - pose.translation);
    if (!hit || hit->t < 1.0 - 1e-6) continue;
    Keypoint kp{px, pc.z(), l.descriptor};
    if (sigma > 0)
      for (auto& x : kp.descriptor) x += noise(rng);
    out.push_back(std::move(kp));
  }
  return out;
}

SynthDataset synth_stream(const SyntheticScene& scene, const Odometry& trajectory, const StreamOptions& opt) {
  SynthDataset data;
  data.intrinsics = opt.camera.intrinsics;
  data.classes = scene.classes();
  data.odometry = trajectory;
  Rng rng(opt.seed * 0xBF58476D1CE4E5B9ULL + 0xDA7A);

  // Landmarks on every box face and across the floor.
  const int lpf = opt.landmarks_per_face;
  for (const auto& o : scene.objects) {
    const Box3& b = o.box;
    constexpr double kIn = 1e-4;
    for (int face = 0; face < 5; ++face) {
      for (int i = 0; i < lpf; ++i) {
        const double fx = uniform(rng, 0.05, 0.95), fy = uniform(rng, 0.05, 0.95);
        const double x = b.min.x() + fx * (b.max.x() - b.min.x());
        const double y = b.min.y() + fy * (b.max.y() - b.min.y());
        const double z = b.min.z() + fy * (b.max.z() - b.min.z());
        Vec3 p;
        switch (face) {
          case 0: p = Vec3(b.min.x() - kIn, y, b.min.z() + fx * (b.max.z() - b.min.z())); break;
          case 1: p = Vec3(b.max.x() + kIn, y, b.min.z() + fx * (b.max.z() - b.min.z())); break;
          case 2: p = Vec3(x, y, b.min.z() - kIn); break;
          case 3: p = Vec3(x, y, b.max.z() + kIn); break;
          default: p = Vec3(x, b.max.y() + kIn, z); break;
        }
        data.landmarks.push_back({p, random_unit(rng, opt.descriptor_dim)});
      }
    }
  }
  for (int i = 0; i < opt.floor_landmarks; ++i) {
    const double x = uniform(rng, -scene.extent / 2, scene.extent / 2);
    const double z = uniform(rng, -scene.extent / 2, scene.extent / 2);
    if (min_gap(scene.objects, x, z) <= 0.0) continue;
    data.landmarks.push_back({Vec3(x, 1e-4, z), random_unit(rng, opt.descriptor_dim)});
  }

  for (const auto& sample : trajectory) {
    auto view = render_view(scene, sample.pose, opt.camera.intrinsics);
    SynthFrame f;
    f.raster = std::move(view.raster);
    f.depth = std::move(view.depth);
    f.pose = sample.pose;
    f.time = sample.time;
    f.keypoints = observe_landmarks(scene, data.landmarks, sample.pose, opt.camera.intrinsics);
    data.frames.push_back(std::move(f));
  }

  const double end_time = trajectory.empty() ? 0.0 : trajectory.back().time;
  const double duration = end_time + opt.event_s + 2.0;
  AudioTrack& track = data.audio;
  track.sample_rate = opt.sample_rate;
  track.start_time = 0.0;
  track.samples.resize(static_cast<std::size_t>(std::ceil(duration * opt.sample_rate)));
  std::uniform_real_distribution<float> bg(static_cast<float>(-opt.noise_floor), static_cast<float>(opt.noise_floor));
  for (auto& x : track.samples) x = bg(rng);

  for (int i = 0; i < std::ssize(scene.sounds) && !trajectory.empty(); ++i) {
    const SoundSource& src = scene.sounds[i];
    std::vector<std::size_t> order(trajectory.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    auto dist = [&](std::size_t j) {
      const Vec3& p = trajectory[j].pose.translation;
      return std::hypot(p.x() - src.position.x(), p.z() - src.position.z());
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
    for (std::size_t j : order) {
      const double t = trajectory[j].time;
      const bool clash = std::any_of(data.events.begin(), data.events.end(), [&](const AudioEvent& e) {
        return std::abs(e.span.start - t) < opt.event_s + 1.0;
      });
      if (clash) continue;
      data.events.push_back({src.cls, {t, t + opt.event_s}, i});
      break;
    }
    const AudioEvent& ev = data.events.back();
    const double freq = 200.0 + static_cast<double>(fnv1a64(src.cls) % 800);
    const auto first = static_cast<std::size_t>(std::llround((ev.span.start - track.start_time) * opt.sample_rate));
    const auto n = static_cast<std::size_t>(std::llround(opt.event_s * opt.sample_rate));
    const double fade = 0.005 * opt.sample_rate;
    for (std::size_t s = 0; s < n && first + s < track.samples.size(); ++s) {
      const double env = std::min({1.0, (s + 1) / fade, (n - s) / fade});
      track.samples[first + s] += static_cast<float>(opt.event_amplitude * env *
                                                     std::sin(2 * std::numbers::pi * freq * s / opt.sample_rate));
    }
  }
  return data;
}

const AudioEvent* event_for(const SynthDataset& data, const TimeSpan& span) {
  const AudioEvent* best = nullptr;
  double best_overlap = 0.0;
  for (const auto& e : data.events) {
    const double overlap = std::min(e.span.end, span.end) - std::max(e.span.start, span.start);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = &e;
    }
  }
  return best;
}

void write_raster_pgm(const std::filesystem::path& path, const ClassRaster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "P5\n" << r.width << ' ' << r.height << "\n65535\n";
  for (std::uint16_t id : r.ids) {
    const char be[2] = {static_cast<char>(id >> 8), static_cast<char>(id & 0xFF)};
    out.write(be, 2);
  }
}

ClassRaster read_raster_pgm(const std::filesystem::path& path, std::vector<std::string> classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  ClassRaster r;
  in >> magic >> r.width >> r.height >> maxval;
  if (magic != "P5" || maxval != 65535 || r.width <= 0 || r.height <= 0) {
    throw FormatError("not a 16-bit PGM raster: " + path.string(), 0);
  }
  in.get();
  r.ids.resize(static_cast<std::size_t>(r.width) * r.height);
  for (auto& id : r.ids) {
    unsigned char be[2];
    if (!in.read(reinterpret_cast<char*>(be), 2)) throw FormatError("truncated raster " + path.string(), 0);
    id = static_cast<std::uint16_t>((be[0] << 8) | be[1]);
  }
  r.classes = std::move(classes);
  return r;
}

void save_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw InvalidArgument("cannot write manifest in " + dir.string());
  out << std::setprecision(17);
  const Intrinsics& k = data.intrinsics;
  out << "mslm-dataset 1\n";
  out << "intrinsics " << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width << ' ' << k.height
      << "\n";
  out << "classes " << data.classes.size() << "\n";
  for (const auto& c : data.classes) out << c << "\n";
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    const SynthFrame& f = data.frames[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "frames/%05zu", i);
    write_raster_pgm(dir / (std::string(stem) + ".pgm"), f.raster);
    binio::save_blob(dir / (std::string(stem) + ".depth"),
                     {static_cast<std::uint32_t>(f.raster.height), static_cast<std::uint32_t>(f.raster.width), f.depth});
    double m[16];
    f.pose.to_row_major(m);
    out << "frame " << stem << ".pgm " << stem << ".depth " << f.time;
    for (double v : m) out << ' ' << v;
    out << "\n";
    if (!f.keypoints.empty()) {
      const std::size_t dk = f.keypoints.front().descriptor.size();
      binio::FloatBlob blob{static_cast<std::uint32_t>(f.keypoints.size()), static_cast<std::uint32_t>(3 + dk), {}};
      for (const auto& kp : f.keypoints) {
        blob.data.push_back(static_cast<float>(kp.pixel.x()));
        blob.data.push_back(static_cast<float>(kp.pixel.y()));
        blob.data.push_back(static_cast<float>(kp.depth));
        for (double d : kp.descriptor) blob.data.push_back(static_cast<float>(d));
      }
      binio::save_blob(dir / (std::string(stem) + ".kp"), blob);
      out << "keypoints " << i << ' ' << stem << ".kp\n";
    }
  }
  if (!data.audio.samples.empty()) {
    write_wav(dir / "audio.wav", data.audio);
    out << "audio audio.wav " << data.audio.start_time << "\n";
  }
  for (const auto& e : data.events) out << "event " << e.span.start << ' ' << e.span.end << ' ' << e.source << ' ' << e.label << "\n";
}

SynthDataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw InvalidArgument("cannot open manifest " + manifest.string());
  const auto dir = manifest.parent_path();
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mslm-dataset") throw FormatError("not a dataset manifest: " + manifest.string(), 0);
  if (version != 1) throw UnsupportedVersion(static_cast<unsigned>(version), 0);
  SynthDataset data;
  std::string key;
  while (in >> key) {
    if (key == "intrinsics") {
      Intrinsics& k = data.intrinsics;
      in >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height;
    } else if (key == "classes") {
      std::size_t n = 0;
      in >> n;
      rest_of_line(in);
      for (std::size_t i = 0; i < n; ++i) {
        std::string c;
        std::getline(in, c);
        data.classes.push_back(c);
      }
    } else if (key == "frame") {
      std::string raster, depth;
      SynthFrame f;
      double m[16];
      in >> raster >> depth >> f.time;
      for (double& v : m) in >> v;
      if (in.fail()) throw FormatError("malformed frame record", 0);
      f.pose = Pose::from_row_major(m);
      f.raster = read_raster_pgm(dir / raster, data.classes);
      auto blob = binio::load_blob(dir / depth);
      if (blob.rows != static_cast<std::uint32_t>(f.raster.height) ||
          blob.cols != static_cast<std::uint32_t>(f.raster.width)) {
        throw DimensionMismatch("depth " + depth + " does not match its raster");
      }
      f.depth = std::move(blob.data);
      data.odometry.push_back({f.time, f.pose});
      data.frames.push_back(std::move(f));
    } else if (key == "keypoints") {
      std::size_t index = 0;
      std::string file;
      in >> index >> file;
      if (index >= data.frames.size()) throw FormatError("keypoints for unknown frame", 0);
      const auto blob = binio::load_blob(dir / file);
      if (blob.cols < 3) throw FormatError("keypoint blob needs at least 3 columns", 0);
      for (std::uint32_t r = 0; r < blob.rows; ++r) {
        const float* row = blob.data.data() + static_cast<std::size_t>(r) * blob.cols;
        Keypoint kp{Vec2(row[0], row[1]), row[2], Embedding(row + 3, row + blob.cols)};
        data.frames[index].keypoints.push_back(std::move(kp));
      }
    } else if (key == "audio") {
      std::string file;
      double start = 0.0;
      in >> file >> start;
      data.audio = read_wav(dir / file);
      data.audio.start_time = start;
    } else if (key == "event") {
      AudioEvent e;
      in >> e.span.start >> e.span.end >> e.source;
      e.label = rest_of_line(in);
      data.events.push_back(e);
    } else {
      throw FormatError("unknown manifest record '" + key + "'", 0);
    }
    if (in.fail()) throw FormatError("malformed manifest record '" + key + "'", 0);
  }
  std::stable_sort(data.odometry.begin(), data.odometry.end(),
                   [](const OdometrySample& a, const OdometrySample& b) { return a.time < b.time; });
  return data;
}

// Map building.

BuiltMap build_map(const SynthDataset& data, const GridSpec& spec, Provider& provider, const BuildOptions& opt) {
  BuiltMap out{FeatureGrid(spec, provider.dim()), {}, {}, {}};
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    const SynthFrame& f = data.frames[i];
    PosedFrame pf;
    pf.width = f.raster.width;
    pf.height = f.raster.height;
    pf.feature_dim = provider.dim();
    pf.features = provider.embed_pixels(f.raster, i);
    pf.depth = f.depth;
    pf.intrinsics = data.intrinsics;
    pf.pose = f.pose;
    fuse_frame(out.grid, pf, opt.fuse);
    out.references.push_back({provider.embed_global(f.raster, i), f.keypoints, data.intrinsics, f.pose});
  }
  const auto points = occupied_points(out.grid);
  out.obstacles = obstacle_mask(points, spec, opt.obstacle_low, opt.obstacle_high);
  if (opt.fill_enclosed_m2 > 0) {
    out.obstacles = fill_enclosed(
        out.obstacles, static_cast<std::size_t>(opt.fill_enclosed_m2 / (spec.scale * spec.scale)));
  }

  out.audio_db.dim = provider.dim();
  if (!data.audio.samples.empty() && !data.odometry.empty()) {
    const AudioTrack track = opt.gate ? noise_gate(data.audio) : data.audio;
    const auto segments = split_on_silence(track, opt.silence);
    std::uint64_t clip_id = 0;
    const AudioEmbedder embed = [&](const TimeSpan& span, std::span<const float> samples) {
      const AudioEvent* ev = event_for(data, span);
      return provider.embed_audio({samples, track.sample_rate, ev ? ev->label : ""}, clip_id++);
    };
    out.audio_db = build_audio_db(track, segments, embed, data.odometry);
  }
  return out;
}

// Ground-truth backend.

std::vector<Vec2> SceneBackend::locate(const std::string& name) const {
  std::vector<Vec2> out;
  for (const auto& o : scene_.objects)
    if (o.cls == name) out.push_back(map_xy(o.box.center(), scene_.spec));
  return out;
}

std::vector<Voxel> SceneBackend::object_voxels(const std::string& name) const {
  std::vector<Voxel> out;
  const GridSpec& spec = scene_.spec;
  const double half = spec.scale / 2;
  for (const auto& o : scene_.objects) {
    if (o.cls != name) continue;
    const Voxel lo = voxel_index(o.box.min, spec).index;
    const Voxel hi = voxel_index(o.box.max, spec).index;
    for (int px = std::min(lo.px, hi.px); px <= std::max(lo.px, hi.px); ++px)
      for (int py = std::min(lo.py, hi.py); py <= std::max(lo.py, hi.py); ++py)
        for (int pz = std::min(lo.pz, hi.pz); pz <= std::max(lo.pz, hi.pz); ++pz) {
          const Voxel v{px, py, pz};
          if (!in_bounds(v, spec)) continue;
          const Vec3 c = voxel_center(v, spec);
          if ((c.array() >= o.box.min.array() - half).all() && (c.array() <= o.box.max.array() + half).all())
            out.push_back(v);
        }
  }
  return out;
}

std::optional<Heatmap> SceneBackend::sound_heatmap(const std::string& sound, double eps) {
  std::vector<ScoredPosition> entries;
  for (const auto& s : scene_.sounds) {
    if (s.cls != sound) continue;
    const auto hit = voxel_index(s.position, scene_.spec);
    if (hit.in_bounds) entries.push_back({hit.index, 1.0});
  }
  if (entries.empty()) return std::nullopt;
  return scored_heatmap(entries, eps, scene_.spec);
}

QueryFrame SceneBackend::load_image(const std::string& path) {
  throw InvalidArgument("ground-truth scene has no image '" + path + "'");
}

std::optional<Heatmap> SceneBackend::image_heatmap(const QueryFrame&, double) { return std::nullopt; }

// Metrics.

SrSpl eval_sr_spl(std::span<const EpisodeResult> episodes) {
  SrSpl out;
  std::size_t longest = 0;
  double successes = 0.0, spl = 0.0;
  for (const auto& e : episodes) {
    if (e.path_length.size() != e.success.size() || e.shortest_length.size() != e.success.size()) {
      throw InvalidArgument("episode result vectors differ in length");
    }
    for (std::size_t i = 0; i < e.success.size(); ++i) {
      const double p = e.path_length[i], l = e.shortest_length[i];
      if (p < 0 || l < 0 || !std::isfinite(p) || !std::isfinite(l)) throw InvalidArgument("negative path length");
      ++out.subgoals;
      if (!e.success[i]) continue;
      successes += 1.0;
      const double denom = std::max(p, l);
      spl += denom > 0 ? l / denom : 1.0;
    }
    longest = std::max(longest, e.success.size());
  }
  if (out.subgoals > 0) {
    out.sr = 100.0 * successes / static_cast<double>(out.subgoals);
    out.spl = spl / static_cast<double>(out.subgoals);
  }
  for (std::size_t k = 1; k <= longest; ++k) {
    std::size_t rows = 0;
    for (const auto& e : episodes) {
      std::size_t run = 0;
      while (run < e.success.size() && e.success[run]) ++run;
      rows += run >= k;
    }
    out.in_a_row.push_back(episodes.empty() ? 0.0 : 100.0 * static_cast<double>(rows) / std::ssize(episodes));
  }
  return out;
}

RecallResult eval_recall(std::span<const double> distances, std::span<const double> thresholds) {
  RecallResult r;
  r.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    const auto hits = std::count_if(distances.begin(), distances.end(), [&](double d) { return d < t; });
    r.recall.push_back(distances.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / std::ssize(distances));
  }
  double sum = 0.0;
  for (double d : distances) sum += d;
  r.average_min_distance = distances.empty() ? 0.0 : sum / static_cast<double>(distances.size());
  return r;
}

RecallResult eval_recall(std::span<const Vec3> predictions, std::span<const std::vector<Vec3>> truths,
                         std::span<const double> thresholds) {
  if (predictions.size() != truths.size()) throw InvalidArgument("predictions and truths differ in count");
  std::vector<double> d;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (truths[i].empty()) throw InvalidArgument("query without ground truth");
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& t : truths[i]) best = std::min(best, (predictions[i] - t).norm());
    d.push_back(best);
  }
  return eval_recall(d, thresholds);
}

// Suites.

namespace {

struct MappedScene {
  SyntheticScene scene;
  SynthDataset data;
  std::unique_ptr<MockProvider> provider;
  BuiltMap built;
};

MappedScene map_scene(SyntheticScene scene, const SuiteOptions& opt, std::uint64_t seed) {
  MappedScene m{std::move(scene), {}, std::make_unique<MockProvider>(opt.dim, 0, opt.sigma), {FeatureGrid({}, 1), {}, {}, {}}};
  StreamOptions stream;
  stream.seed = seed;
  stream.landmarks_per_face = 0;
  stream.floor_landmarks = 0;
  m.data = synth_stream(m.scene, boustrophedon(m.scene, stream.camera), stream);
  BuildOptions build;
  m.built = build_map(m.data, m.scene.spec, *m.provider, build);
  return m;
}

AgentState random_start(const SyntheticScene& s, const ObstacleGrid& mapped, Rng& rng) {
  for (int tries = 0; tries < 1000; ++tries) {
    const double x = uniform(rng, -s.extent / 2 + 0.5, s.extent / 2 - 0.5);
    const double z = uniform(rng, -s.extent / 2 + 0.5, s.extent / 2 - 0.5);
    if (min_gap(s.objects, x, z) < 0.6) continue;
    AgentState st;
    st.position = map_xy(Vec3(x, 0, z), s.spec);
    st.heading = 90.0 * uniform_int(rng, -1, 2);
    if (s.free_space.blocked(st.cell()) || mapped.blocked(st.cell())) continue;
    return st;
  }
  throw InvalidArgument("no free start cell");
}

std::string spatial_instruction(int pattern, const std::vector<std::string>& names, Rng& rng) {
  auto pick = [&] { return names[uniform_int(rng, 0, static_cast<int>(names.size()) - 1)]; };
  auto pick_two = [&] {
    std::string a = pick(), b = pick();
    while (b == a) b = pick();
    return std::pair(a, b);
  };
  switch (pattern) {
    case 0: return std::string("move to the ") + (uniform_int(rng, 0, 1) ? "left" : "right") + " side of the " + pick();
    case 1: {
      auto [a, b] = pick_two();
      return "move in between the " + a + " and the " + b;
    }
    case 2: {
      static const char* kDirs[] = {"north", "south", "east", "west"};
      return "move " + std::to_string(uniform_int(rng, 1, 2)) + " meters " + kDirs[uniform_int(rng, 0, 3)] +
             " of the " + pick();
    }
    default: {
      auto [a, b] = pick_two();
      return "move back and forth to the " + a + " and the " + b + " twice";
    }
  }
}

double shortest_length(const ExecutionTrace& gt, const AgentState& start, const ObstacleGrid& free_space,
                       double scale) {
  double l = 0.0;
  Vec2 at = start.position;
  for (const auto& s : gt.subgoals) {
    l += geodesic(free_space, at, s.end_state.position, scale);
    at = s.end_state.position;
  }
  return l;
}

}  // namespace

std::vector<SpatialEpisode> run_spatial_suite(const SuiteOptions& opt) {
  std::vector<SpatialEpisode> episodes;
  SceneOptions so;
  so.size = opt.size;
  so.sounds = 0;
  for (int i = 0; i < opt.scenes; ++i) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
    MappedScene m = map_scene(generate_scene(seed, so), opt, seed);
    const SyntheticScene& scene = m.scene;
    MapBackend mapped(m.built.grid, scene_vocabulary(), *m.provider);
    SceneBackend truth(scene);

    std::vector<std::string> names;
    for (const auto& o : scene.objects) names.push_back(o.cls);

    Rng rng(seed ^ 0xE915);
    SpatialEpisode ep;
    ep.seed = seed;
    AgentState state = random_start(scene, m.built.obstacles, rng);
    std::vector<int> patterns{0, 1, 2, 3};
    std::shuffle(patterns.begin(), patterns.end(), rng);
    for (int k = 0; k < opt.subgoals; ++k) {
      // Draw until the instruction is feasible on the true scene.
      std::string instruction;
      PlanProgram program;
      ExecutionTrace gt;
      for (int tries = 0; tries < 50; ++tries) {
        instruction = spatial_instruction(patterns[k % patterns.size()], names, rng);
        program = parse_program(rule_based_plan(instruction));
        gt = execute_program(program, truth, scene.free_space, state, opt.exec);
        if (gt.all_reached()) break;
      }
      const ExecutionTrace pred = execute_program(program, mapped, m.built.obstacles, state, opt.exec);
      const double err = (pred.final_state.position - gt.final_state.position).norm() * scene.spec.scale;
      ep.instructions.push_back(instruction);
      ep.result.success.push_back(gt.all_reached() && pred.all_reached() && err <= opt.success_radius_m);
      ep.result.path_length.push_back(pred.path_length);
      ep.result.shortest_length.push_back(shortest_length(gt, state, scene.free_space, scene.spec.scale));
      state = pred.final_state;
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

DisambiguationResult run_disambiguation_suite(const SuiteOptions& opt) {
  DisambiguationResult r;
  SceneOptions so;
  so.size = opt.size;
  so.objects = 4;
  so.sounds = 1;
  so.duplicates = 2;
  for (int i = 0; i < opt.scenes; ++i) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
    so.cue_rank = i % 2;
    MappedScene m = map_scene(generate_scene(seed, so), opt, seed);
    const SyntheticScene& scene = m.scene;
    MapBackend mapped(m.built.grid, scene_vocabulary(), *m.provider);
    mapped.set_audio_db(m.built.audio_db);
    const SceneObject& cue = scene.objects[scene.cue_object];
    Rng rng(seed ^ 0xD15A);
    const AgentState start = random_start(scene, m.built.obstacles, rng);

    auto distance_of = [&](const std::string& instruction) {
      const auto program = parse_program(rule_based_plan(instruction, ApiSurface::Multimodal));
      const auto trace = execute_program(program, mapped, m.built.obstacles, start, opt.exec);
      if (trace.subgoals.empty() || !trace.subgoals.back().goal) return scene.extent * std::sqrt(2.0);
      const Vec3 w = map_to_world(*trace.subgoals.back().goal, 0.0, scene.spec);
      return cue.box.floor_distance(w.x(), w.z());
    };
    r.primary_distances.push_back(distance_of("move to the " + cue.cls));
    r.fused_distances.push_back(distance_of("move to the " + cue.cls + " next to the sound of " + scene.sounds[0].cls));
  }
  r.primary = eval_recall(r.primary_distances);
  r.fused = eval_recall(r.fused_distances);
  return r;
}

SyntheticScene blocking_table_scene(std::uint64_t seed, Vec2& start_xz, Vec2& goal_xz, double scale) {
  Rng rng(seed * 0x94D049BB133111EBULL + 0x7AB1E);
  SyntheticScene s;
  s.extent = 6.0;
  s.spec = scene_grid(s.extent, s.height, scale);
  const double span = uniform(rng, 2.0, 3.5);
  const double cz = uniform(rng, -0.5, 0.5);
  s.objects.push_back({"table", make_box(uniform(rng, -0.3, 0.3), cz, 0.8, span, 0.75)});
  const double route_z = cz + uniform(rng, -0.3, 0.3);
  start_xz = Vec2(-2.4, route_z);
  goal_xz = Vec2(2.4, route_z);
  // A couple of other pieces away from the route.
  const auto& catalog = object_catalog();
  for (int n = 0; n < 2; ++n) {
    for (int tries = 0; tries < 400; ++tries) {
      const ObjectClass& c = catalog[uniform_int(rng, 0, static_cast<int>(catalog.size()) - 1)];
      if (c.name == "table") continue;
      const double lim_x = s.extent / 2 - 0.5 - c.sx / 2, lim_z = s.extent / 2 - 0.5 - c.sz / 2;
      const Box3 b = make_box(uniform(rng, -lim_x, lim_x), uniform(rng, -lim_z, lim_z), c.sx, c.sz, c.height);
      bool ok = b.min.z() > route_z + 0.8 || b.max.z() < route_z - 0.8;
      for (const auto& o : s.objects) ok = ok && footprint_gap(o.box, b) >= 0.6;
      if (ok) {
        s.objects.push_back({c.name, b});
        break;
      }
    }
  }
  s.free_space = scene_free_space(s);
  return s;
}

std::vector<EmbodimentCase> run_embodiment_suite(const SuiteOptions& opt) {
  std::vector<EmbodimentCase> out;
  const auto vocab = scene_vocabulary();
  for (int i = 0; i < opt.scenes; ++i) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
    Vec2 start_xz, goal_xz;
    MappedScene m = map_scene(blocking_table_scene(seed, start_xz, goal_xz), opt, seed);
    LabelSet potential{vocab, m.provider->embed_text(vocab)};
    std::vector<int> with_table, without_table;
    for (int l = 1; l < std::ssize(vocab); ++l) {
      with_table.push_back(l);
      if (vocab[l] != "table") without_table.push_back(l);
    }
    const SegmentationGrid seg = segment_grid(m.built.grid, potential);
    const ObstacleGrid incl = embodiment_obstacle_map(seg, m.built.obstacles, with_table);
    const ObstacleGrid excl = embodiment_obstacle_map(seg, m.built.obstacles, without_table);
    AgentState a, b;
    a.position = map_xy(Vec3(start_xz.x(), 0, start_xz.y()), m.scene.spec);
    b.position = map_xy(Vec3(goal_xz.x(), 0, goal_xz.y()), m.scene.spec);
    auto cost = [&](const ObstacleGrid& g) {
      if (g.blocked(a.cell())) return std::numeric_limits<double>::infinity();
      const auto path = plan_path(g, a.cell(), b.cell());
      return path ? path_cost(*path) * m.scene.spec.scale : std::numeric_limits<double>::infinity();
    };
    out.push_back({cost(incl), cost(excl)});
  }
  return out;
}

void write_sr_csv(std::ostream& out, const std::string& suite, std::span<const SpatialEpisode> episodes) {
  std::vector<EpisodeResult> results;
  for (const auto& e : episodes) results.push_back(e.result);
  const SrSpl m = eval_sr_spl(results);
  out << "suite,episodes,subgoals,sr,spl";
  for (std::size_t k = 1; k <= m.in_a_row.size(); ++k) out << ",sr_" << k << "_in_a_row";
  out << "\n" << suite << ',' << episodes.size() << ',' << m.subgoals << ',' << m.sr << ',' << m.spl;
  for (double v : m.in_a_row) out << ',' << v;
  out << "\n";
}

void write_recall_csv(std::ostream& out, const std::string& suite, const DisambiguationResult& r) {
  out << "suite,method,queries";
  for (double t : r.primary.thresholds) out << ",recall_lt_" << t << "m";
  out << ",avg_min_distance_m\n";
  auto row = [&](const char* method, const RecallResult& rr, std::size_t n) {
    out << suite << ',' << method << ',' << n;
    for (double v : rr.recall) out << ',' << v;
    out << ',' << rr.average_min_distance << "\n";
  };
  row("primary", r.primary, r.primary_distances.size());
  row("fused", r.fused, r.fused_distances.size());
}

void write_embodiment_csv(std::ostream& out, std::span<const EmbodimentCase> cases) {
  out << "case,cost_including_m,cost_excluding_m,strict\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out << i << ',' << cases[i].cost_including << ',' << cases[i].cost_excluding << ','
        << (cases[i].cost_excluding < cases[i].cost_including ? 1 : 0) << "\n";
  }
}

}  // namespace mslm
