#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mslm/geometry.hpp"
#include "mslm/query.hpp"

namespace mslm {

/// Agent pose on the map. Position is in continuous map coordinates
/// (px, py); heading is degrees with 0 = north (−px) and 90 = east (+py).
struct AgentState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;

  Cell cell() const;
};

/// Wraps to (−180, 180].
double normalize_heading(double deg);
/// Unit step in (px, py) for a heading.
Vec2 heading_vector(double deg);
/// Heading pointing from `from` to `to`.
double bearing(const Vec2& from, const Vec2& to);

struct ActionSpec {
  double forward_step = 0.1;  // meters
  double turn_step = 5.0;     // degrees

  bool valid() const { return forward_step > 0.0 && turn_step > 0.0; }

  static ActionSpec fine() { return {0.05, 1.0}; }
  static ActionSpec multimodal() { return {0.1, 5.0}; }
  static ActionSpec coarse() { return {0.25, 5.0}; }
  /// "fine", "multimodal" or "coarse"; throws InvalidArgument otherwise.
  static ActionSpec named(std::string_view name);
};

enum class Action { TurnLeft, TurnRight, Forward, Stop };

std::string_view action_name(Action a);

/// Sum of step costs: 1 straight, √2 diagonal.
double path_cost(const std::vector<Cell>& path);

/// 8-connected A* with the octile heuristic. Diagonal moves may not cut a
/// blocked corner. Throws InvalidArgument when start is blocked or outside
/// the grid; nullopt when the goal is unreachable or blocked.
std::optional<std::vector<Cell>> plan_path(const ObstacleGrid& obstacles, const Cell& start, const Cell& goal);

/// Nearest free cell to `goal` within `radius` cells that is reachable from
/// `start`, ties to the smallest (px, py). nullopt if none.
std::optional<Cell> snap_goal(const ObstacleGrid& obstacles, const Cell& start, const Cell& goal, double radius);

/// Drops intermediate cells while a straight segment between the kept ones
/// stays clear of obstacles.
std::vector<Cell> smooth_path(const ObstacleGrid& obstacles, const std::vector<Cell>& path);

/// Whether the straight segment between two cell centers touches no blocked cell.
bool line_of_sight(const ObstacleGrid& obstacles, const Cell& a, const Cell& b);

/// Turn-then-drive actions through the path's corners on an ideal kinematic
/// agent, re-aiming every meter. `state` is advanced to the simulated end
/// pose. Always ends with Stop.
std::vector<Action> path_to_actions(const std::vector<Cell>& path, AgentState& state, const ActionSpec& spec,
                                    double scale);

/// Turns (no stop) that bring the heading as close as the turn step allows
/// to `target`. `state` is advanced.
std::vector<Action> turn_actions(double target, AgentState& state, const ActionSpec& spec);

/// Ideal kinematics: turns rotate by turn_step, forwards move forward_step.
void apply_action(Action a, AgentState& state, const ActionSpec& spec, double scale);

/// One action name per line.
void write_action_trace(const std::filesystem::path& path, const std::vector<Action>& actions);
std::vector<Action> read_action_trace(const std::filesystem::path& path);

// Spatial navigation primitives.

enum class Primitive {
  MoveTo,
  MoveToObject,
  MoveToLeft,
  MoveToRight,
  WithPosOnLeft,
  WithPosOnRight,
  MoveInBetween,
  Face,
  Turn,
  TurnAbsolute,
  MoveNorth,
  MoveSouth,
  MoveEast,
  MoveWest,
  MoveForward,
  GetPos,
};

/// Accepts the table names plus the prompt aliases move_to_object and
/// with_object_on_left/right.
std::optional<Primitive> primitive_from_name(std::string_view name);
std::string_view primitive_name(Primitive p);

/// Finds object instances by name; returns centroids in map coordinates.
class ObjectLocator {
 public:
  virtual ~ObjectLocator() = default;
  virtual std::vector<Vec2> locate(const std::string& name) const = 0;
};

struct PrimitiveArgs {
  std::vector<std::string> objects;
  double value = 0.0;       // angle (deg) or distance (m)
  Vec2 position = Vec2::Zero();  // map coordinates, for move_to
};

struct Resolution {
  bool found = true;                // false: some named object was not located
  std::string missing;              // the object that was not located
  std::optional<Vec2> goal;         // map coordinates to drive to
  std::optional<double> heading;    // heading to take after arriving
};

inline constexpr double kSpatialOffsetMeters = 1.0;

/// Instance whose centroid is closest among those within ±90° of the agent's
/// heading; the closest overall when none is in front.
std::optional<Vec2> nearest_front(const std::vector<Vec2>& centroids, const AgentState& state);

enum class Relation { Left, Right, North, South, East, West };

/// Offset goal beside an object centroid. Left/right are taken relative to
/// the approach direction from the agent; cardinal ones in the map frame.
Vec2 spatial_offset(const Vec2& centroid, Relation r, const AgentState& state, double offset_cells);

Resolution resolve_primitive(Primitive p, const PrimitiveArgs& args, const ObjectLocator& locator,
                             const AgentState& state, double scale,
                             double offset_m = kSpatialOffsetMeters);

// Execution of one navigation goal on an obstacle map.

struct NavOutcome {
  bool planned = false;          // a path was found
  std::vector<Action> actions;
  std::vector<Cell> path;
  double path_length = 0.0;      // meters driven
};

/// Plan, smooth and drive to `goal`, snapping a blocked goal to the nearest
/// reachable free cell within the radius. `state` ends at the simulated
/// pose. When no path exists the agent stays put and only Stop is emitted.
NavOutcome navigate_to(const ObstacleGrid& obstacles, AgentState& state, const Vec2& goal,
                       const ActionSpec& spec, double scale, double snap_radius_m = 1.0);

}  // namespace mslm
