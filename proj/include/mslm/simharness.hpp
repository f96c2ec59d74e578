#pragma once

// Box-world scenes, synthetic RGB-D/audio streams and benchmark metrics.
//
// World frame: x and z span the floor, y is up, the room is a square of side
// `extent` centred at the origin. Map coordinates follow the grid conventions
// in geometry.hpp.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mslm/audio.hpp"
#include "mslm/featmap.hpp"
#include "mslm/geometry.hpp"
#include "mslm/instruct.hpp"
#include "mslm/plan.hpp"
#include "mslm/providers.hpp"
#include "mslm/query.hpp"
#include "mslm/visloc.hpp"

namespace mslm {

struct Box3 {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return (min + max) / 2; }
  bool contains(const Vec3& p) const;
  /// Distance on the floor plane from (x, z) to the footprint.
  double floor_distance(double x, double z) const;
};

struct SceneObject {
  std::string cls;
  Box3 box;
};

struct SoundSource {
  std::string cls;
  Vec3 position = Vec3::Zero();  // y = 0
};

enum class SizeProfile { Small, Medium, Large };  // 6, 8 and 10 m rooms

SizeProfile size_profile_from_name(std::string_view name);
double room_extent(SizeProfile p);

struct ObjectClass {
  std::string name;
  double sx, sz, height;  // footprint and height in meters
};

/// Furniture classes the generator draws from.
const std::vector<ObjectClass>& object_catalog();
const std::vector<std::string>& sound_catalog();
/// "floor" followed by every catalog class; the default mapping vocabulary.
std::vector<std::string> scene_vocabulary();

struct SceneOptions {
  SizeProfile size = SizeProfile::Small;
  int objects = 6;
  int sounds = 2;
  // Duplicate mode: plant this many instances of one class (0 = off).
  int duplicates = 0;
  double min_duplicate_separation = 2.0;  // footprint gap, meters
  // Which duplicate, in (x, z) order, the first sound is placed next to;
  // -1 draws it at random.
  int cue_rank = -1;
  double clearance = 0.8;  // gap between boxes and to the walls
  double scale = 0.05;
};

struct SyntheticScene {
  double extent = 6.0;
  double height = 2.0;
  std::vector<SceneObject> objects;
  std::vector<SoundSource> sounds;
  GridSpec spec;
  ObstacleGrid free_space;  // occupied: box footprints and outside the room
  int cue_object = -1;      // duplicate mode: the instance next to sounds[0]

  /// "floor" first, then object classes in order of first appearance.
  std::vector<std::string> classes() const;
  std::vector<int> instances_of(const std::string& cls) const;
  bool inside_room(double x, double z) const;
};

/// Deterministic per (seed, options). Throws InvalidArgument when the layout
/// cannot be satisfied.
SyntheticScene generate_scene(std::uint64_t seed, const SceneOptions& options = {});

/// Grid covering the room plus a margin, floor to ceiling.
GridSpec scene_grid(double extent, double height, double scale);
/// Footprints (conservatively rasterised) and everything outside the room.
ObstacleGrid scene_free_space(const SyntheticScene& scene);

void save_scene(const SyntheticScene& scene, const std::filesystem::path& path);
SyntheticScene load_scene(const std::filesystem::path& path);

// Rendering.

struct CameraModel {
  Intrinsics intrinsics{50.0, 50.0, 39.5, 29.5, 80, 60};
  double height = 1.0;      // meters above the floor
  double pitch_deg = 15.0;  // downwards
};

/// Camera-to-world pose of a camera at world (x, z) looking along `heading`
/// (map convention: 0 = north = −x, 90 = east = −z).
Pose camera_pose(double x, double z, double heading, const CameraModel& camera);
/// Heading of a camera pose's optical axis projected on the floor.
double pose_heading(const Pose& pose);

struct RayHit {
  double t = 0.0;
  int object = -1;  // -1: floor
};

/// First hit along origin + t·dir, t > 0; the floor only counts inside the room.
std::optional<RayHit> cast_ray(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir);

struct RenderedView {
  ClassRaster raster;        // classes = scene.classes(); 0xFFFF where nothing is hit
  std::vector<float> depth;  // optical-axis depth, 0 where nothing is hit
};

RenderedView render_view(const SyntheticScene& scene, const Pose& camera, const Intrinsics& k);

// Streams.

struct TrajectoryOptions {
  double spacing = 1.0;   // meters between lanes and between waypoints
  int views = 4;          // headings per waypoint, evenly spaced
  double dt = 1.0;        // seconds per view
  double wall_margin = 0.4;
};

/// Lawnmower sweep over free space; each waypoint contributes `views`
/// camera poses one dt apart, starting along the travel direction.
Odometry boustrophedon(const SyntheticScene& scene, const CameraModel& camera, const TrajectoryOptions& options = {});

struct Landmark {
  Vec3 position = Vec3::Zero();
  Embedding descriptor;
};

struct StreamOptions {
  CameraModel camera;
  double sample_rate = 16000.0;
  double noise_floor = 0.005;   // uniform amplitude of the background
  double event_s = 1.0;
  double event_amplitude = 0.6;
  int landmarks_per_face = 6;
  int floor_landmarks = 80;
  int descriptor_dim = 32;
  std::uint64_t seed = 0;
};

struct SynthFrame {
  ClassRaster raster;
  std::vector<float> depth;
  Pose pose;
  double time = 0.0;
  std::vector<Keypoint> keypoints;
};

struct AudioEvent {
  std::string label;
  TimeSpan span;
  int source = -1;  // index into scene.sounds
};

struct SynthDataset {
  Intrinsics intrinsics;
  std::vector<std::string> classes;
  std::vector<SynthFrame> frames;
  Odometry odometry;
  AudioTrack audio;
  std::vector<AudioEvent> events;
  std::vector<Landmark> landmarks;
};

/// Renders every odometry pose and mixes each scene sound into the track at
/// the time the trajectory passes closest to it (at least 2 s apart).
SynthDataset synth_stream(const SyntheticScene& scene, const Odometry& trajectory, const StreamOptions& options = {});

/// Landmarks visible from `pose` as keypoints (pixel, depth, descriptor),
/// descriptors perturbed by Gaussian noise of `sigma`.
std::vector<Keypoint> observe_landmarks(const SyntheticScene& scene, std::span<const Landmark> landmarks,
                                        const Pose& pose, const Intrinsics& k, double sigma = 0.0,
                                        std::uint64_t seed = 0);

/// Event whose span overlaps `span` the most; nullptr if none.
const AudioEvent* event_for(const SynthDataset& data, const TimeSpan& span);

// Dataset manifest:
//   mslm-dataset 1
//   intrinsics fx fy cx cy width height
//   classes <n> then one class per line
//   frame <raster.pgm> <depth.bin> <time> <16 row-major pose values>
//   keypoints <frame index> <blob>     (optional; rows u, v, depth, descriptor…)
//   audio <track.wav> <start time>
//   event <start> <end> <source> <label…>
// Landmarks are not stored; the keypoints carry their descriptors.
void save_dataset(const SynthDataset& data, const std::filesystem::path& dir);
SynthDataset load_dataset(const std::filesystem::path& manifest);

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples) of class ids.
void write_raster_pgm(const std::filesystem::path& path, const ClassRaster& raster);
ClassRaster read_raster_pgm(const std::filesystem::path& path, std::vector<std::string> classes);

// Map building from a stream.

struct BuildOptions {
  FuseOptions fuse;
  double obstacle_low = 0.1;   // height band of the obstacle map, meters
  double obstacle_high = 1.5;
  double fill_enclosed_m2 = 4.0;  // enclosed free pockets up to this area become obstacles
  SilenceParams silence;
  bool gate = true;
};

struct BuiltMap {
  FeatureGrid grid;
  PoseFeatureDB audio_db;
  std::vector<ReferenceFrame> references;
  ObstacleGrid obstacles;
};

BuiltMap build_map(const SynthDataset& data, const GridSpec& spec, Provider& provider,
                   const BuildOptions& options = {});

/// Ground-truth backend: objects are their boxes, sounds their sources.
class SceneBackend : public QueryBackend {
 public:
  explicit SceneBackend(const SyntheticScene& scene) : scene_(scene) {}

  const GridSpec& spec() const override { return scene_.spec; }
  std::vector<Vec2> locate(const std::string& name) const override;
  std::vector<Voxel> object_voxels(const std::string& name) const override;
  std::optional<Heatmap> sound_heatmap(const std::string& sound, double eps) override;
  QueryFrame load_image(const std::string& path) override;
  std::optional<Heatmap> image_heatmap(const QueryFrame& image, double eps) override;

 private:
  const SyntheticScene& scene_;
};

// Metrics.

struct EpisodeResult {
  std::vector<bool> success;
  std::vector<double> path_length;      // p_i, meters
  std::vector<double> shortest_length;  // l_i, meters
};

struct SrSpl {
  std::size_t subgoals = 0;
  double sr = 0.0;   // percent
  double spl = 0.0;  // in [0, 1]
  // Percent of episodes whose first k subgoals all succeeded, k = 1..K;
  // the row stops at the first failure.
  std::vector<double> in_a_row;
};

/// SR over all subgoals and SPL = (1/N) Σ Sᵢ·lᵢ / max(pᵢ, lᵢ). A success with
/// lᵢ = pᵢ = 0 contributes 1. Throws InvalidArgument on negative lengths or
/// ragged episodes.
SrSpl eval_sr_spl(std::span<const EpisodeResult> episodes);

struct RecallResult {
  std::vector<double> thresholds;
  std::vector<double> recall;  // percent per threshold
  double average_min_distance = 0.0;
};

inline const std::vector<double> kRecallThresholds{0.5, 1.0, 1.5, 2.0};

/// Recall@1 from per-query distances between the top prediction and its
/// ground truth; a hit is a distance strictly below the threshold.
RecallResult eval_recall(std::span<const double> distances,
                         std::span<const double> thresholds = kRecallThresholds);
/// Same, with the distance to the nearest ground-truth point of each query.
RecallResult eval_recall(std::span<const Vec3> predictions, std::span<const std::vector<Vec3>> truths,
                         std::span<const double> thresholds = kRecallThresholds);

// Benchmark suites.

struct SuiteOptions {
  int scenes = 20;
  std::uint64_t seed = 0;
  int dim = 64;
  double sigma = 0.0;
  int subgoals = 4;
  SizeProfile size = SizeProfile::Small;
  ExecOptions exec;
  double success_radius_m = 1.0;
};

struct SpatialEpisode {
  std::uint64_t seed = 0;
  std::vector<std::string> instructions;
  EpisodeResult result;
};

/// Scenes with distinct objects; each episode chains instructions drawn from
/// the left/right-of, in-between, cardinal and back-and-forth patterns.
/// A subgoal succeeds when the agent ends within the success radius of
/// where the same code leads on the ground-truth scene from the same start.
std::vector<SpatialEpisode> run_spatial_suite(const SuiteOptions& options);

struct DisambiguationResult {
  RecallResult primary;  // object heatmap only
  RecallResult fused;    // object × sound heatmap
  std::vector<double> primary_distances;
  std::vector<double> fused_distances;
};

/// Two instances of one class at least 2 m apart, one sound next to one of
/// them (alternating which). Distances are to the cued instance's footprint.
DisambiguationResult run_disambiguation_suite(const SuiteOptions& options);

struct EmbodimentCase {
  double cost_including = 0.0;  // meters, infinity when unreachable
  double cost_excluding = 0.0;
};

/// Rooms where a table spans the straight route between start and goal;
/// paths on the mapped obstacle map with and without "table" as obstacle.
std::vector<EmbodimentCase> run_embodiment_suite(const SuiteOptions& options);

/// Blocking-table layout used by run_embodiment_suite, with start and goal
/// in world (x, z).
SyntheticScene blocking_table_scene(std::uint64_t seed, Vec2& start_xz, Vec2& goal_xz, double scale = 0.05);

void write_sr_csv(std::ostream& out, const std::string& suite, std::span<const SpatialEpisode> episodes);
void write_recall_csv(std::ostream& out, const std::string& suite, const DisambiguationResult& result);
void write_embodiment_csv(std::ostream& out, std::span<const EmbodimentCase> cases);

}  // namespace mslm
