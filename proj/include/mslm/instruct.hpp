#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mslm/audio.hpp"
#include "mslm/featmap.hpp"
#include "mslm/heatmap.hpp"
#include "mslm/plan.hpp"
#include "mslm/program.hpp"
#include "mslm/providers.hpp"
#include "mslm/query.hpp"
#include "mslm/visloc.hpp"

namespace mslm {

// Plan generation.

/// Which API the plan code may use: object-level spatial primitives, or
/// modality heatmaps (get_major_map / get_map / get_max_pos_3d).
enum class ApiSurface { Spatial, Multimodal };

/// Context prompts compiled in from assets/prompts.
std::string_view spatial_prompt();
std::string_view multimodal_prompt();

/// Multimodal when the prompt demonstrates heatmap calls.
ApiSurface surface_of(std::string_view context_prompt);

/// Deterministic template generator. Clauses are split on "then"; each must
/// match a template or UnsupportedInstruction names the clause.
std::string rule_based_plan(std::string_view instruction, ApiSurface surface = ApiSurface::Spatial);

/// Code for an instruction. A provider with a code generator receives the
/// context prompt followed by the instruction as a comment, and its text is
/// returned untouched; without one the rule-based generator is used.
std::string generate_plan(std::string_view instruction, std::string_view context_prompt, Provider* provider = nullptr);

// Execution.

/// Everything the interpreter needs to look up. Positions are continuous map
/// coordinates (px, py) or voxel coordinates (px, py, pz).
class QueryBackend : public ObjectLocator {
 public:
  virtual const GridSpec& spec() const = 0;
  /// Voxels labelled as the object; empty when it is not in the map.
  virtual std::vector<Voxel> object_voxels(const std::string& name) const = 0;
  /// nullopt when there is nothing to score (no audio database).
  virtual std::optional<Heatmap> sound_heatmap(const std::string& sound, double eps) = 0;
  virtual QueryFrame load_image(const std::string& path) = 0;
  virtual std::optional<Heatmap> image_heatmap(const QueryFrame& image, double eps) = 0;
};

struct MapBackendOptions {
  bool normalize_features = true;
  std::size_t min_instance_cells = 4;
  LocalizeParams localize;
  std::uint64_t seed = 0;
};

/// Backend over a fused feature map. Object names outside the vocabulary are
/// embedded and segmented on demand.
class MapBackend : public QueryBackend {
 public:
  MapBackend(const FeatureGrid& grid, std::vector<std::string> vocabulary, Provider& provider,
             MapBackendOptions options = {});

  void set_audio_db(PoseFeatureDB db) { audio_db_ = std::move(db); }
  void set_reference_db(std::vector<ReferenceFrame> db) { reference_db_ = std::move(db); }
  /// Defaults to load_query_frame on the path.
  void set_image_loader(std::function<QueryFrame(const std::string&)> loader) { image_loader_ = std::move(loader); }

  const GridSpec& spec() const override { return grid_.spec(); }
  std::vector<Vec2> locate(const std::string& name) const override;
  std::vector<Voxel> object_voxels(const std::string& name) const override;
  std::optional<Heatmap> sound_heatmap(const std::string& sound, double eps) override;
  QueryFrame load_image(const std::string& path) override;
  std::optional<Heatmap> image_heatmap(const QueryFrame& image, double eps) override;

  /// Segmentation over the vocabulary (plus `name` if it is new) and the
  /// label index of `name`.
  std::pair<const SegmentationGrid*, int> segmentation_for(const std::string& name) const;

 private:
  const FeatureGrid& grid_;
  std::vector<std::string> vocabulary_;
  Provider& provider_;
  MapBackendOptions options_;
  std::optional<PoseFeatureDB> audio_db_;
  std::vector<ReferenceFrame> reference_db_;
  std::function<QueryFrame(const std::string&)> image_loader_;
  mutable std::map<std::string, std::unique_ptr<SegmentationGrid>> segmentations_;
  std::mt19937_64 rng_;
};

struct ExecOptions {
  ActionSpec actions = ActionSpec::multimodal();
  double snap_radius_m = 1.5;
  double offset_m = kSpatialOffsetMeters;
  double primary_decay_per_m = kPrimaryDecayPerMeter;
  double auxiliary_decay_per_m = kAuxiliaryDecayPerMeter;
  long long max_loop_iterations = 10000;
};

/// One navigation or turning call.
struct SubgoalRecord {
  int line = 0;
  std::string call;                  // canonical source of the call
  bool reached = false;
  std::string message;               // why it failed
  std::optional<Vec2> goal;          // map coordinates
  std::optional<double> heading;
  AgentState end_state;
  std::size_t actions = 0;
  double path_length = 0.0;          // meters
};

struct ExecutionTrace {
  std::vector<SubgoalRecord> subgoals;
  std::vector<Action> actions;
  AgentState final_state;
  double path_length = 0.0;

  bool all_reached() const;
};

/// Runs statements in order. A missing target or a failed plan marks that
/// subgoal failed; later statements still run (those depending on a missing
/// value fail in turn), and so does misuse such as a wrong argument count.
/// Throws InvalidArgument only for an invalid action spec or a loop bound
/// above the iteration limit.
ExecutionTrace execute_program(const PlanProgram& program, QueryBackend& world, const ObstacleGrid& obstacles,
                               const AgentState& start, const ExecOptions& options = {});

/// One line per subgoal, then the action list.
void write_trace(std::ostream& out, const ExecutionTrace& trace);

}  // namespace mslm
