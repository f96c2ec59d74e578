#include "mslm/plan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>

#include "mslm/error.hpp"

namespace mslm {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kDeg = std::numbers::pi / 180.0;

constexpr int kDx[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDy[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

// Move from c in direction k is legal: target free and, for diagonals, both
// orthogonal neighbours free.
bool can_step(const ObstacleGrid& g, const Cell& c, int k) {
  const Cell n{c.px + kDx[k], c.py + kDy[k]};
  if (g.blocked(n)) return false;
  if (kDx[k] != 0 && kDy[k] != 0) {
    if (g.blocked({c.px + kDx[k], c.py}) || g.blocked({c.px, c.py + kDy[k]})) return false;
  }
  return true;
}

double octile(const Cell& a, const Cell& b) {
  const double dx = std::abs(a.px - b.px), dy = std::abs(a.py - b.py);
  return (dx + dy) + (kSqrt2 - 2.0) * std::min(dx, dy);
}

std::vector<std::uint8_t> reachable_from(const ObstacleGrid& g, const Cell& start) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(g.h()) * g.w(), 0);
  if (g.blocked(start)) return seen;
  std::deque<Cell> queue{start};
  seen[static_cast<std::size_t>(start.px) * g.w() + start.py] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (int k = 0; k < 8; ++k) {
      if (!can_step(g, c, k)) continue;
      const Cell n{c.px + kDx[k], c.py + kDy[k]};
      auto& s = seen[static_cast<std::size_t>(n.px) * g.w() + n.py];
      if (!s) {
        s = 1;
        queue.push_back(n);
      }
    }
  }
  return seen;
}

// Nearest free cell to `target` within radius; `ok` filters candidates.
template <class Ok>
std::optional<Cell> nearest_free(const ObstacleGrid& g, const Cell& target, double radius, Ok&& ok) {
  const int r = static_cast<int>(std::floor(radius));
  std::optional<Cell> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int px = std::max(0, target.px - r); px <= std::min(g.h() - 1, target.px + r); ++px) {
    for (int py = std::max(0, target.py - r); py <= std::min(g.w() - 1, target.py + r); ++py) {
      const Cell c{px, py};
      const double d = std::hypot(double(px - target.px), double(py - target.py));
      if (d > radius || g.occupied(c) || !ok(c)) continue;
      if (d < best_d) {  // scan order already gives the (px, py) tie rule
        best_d = d;
        best = c;
      }
    }
  }
  return best;
}

}  // namespace

Cell AgentState::cell() const {
  return {static_cast<std::int32_t>(std::floor(position.x() + 0.5)),
          static_cast<std::int32_t>(std::floor(position.y() + 0.5))};
}

double normalize_heading(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h <= -180.0) h += 360.0;
  if (h > 180.0) h -= 360.0;
  return h;
}

Vec2 heading_vector(double deg) { return {-std::cos(deg * kDeg), std::sin(deg * kDeg)}; }

double bearing(const Vec2& from, const Vec2& to) {
  const Vec2 d = to - from;
  return normalize_heading(std::atan2(d.y(), -d.x()) / kDeg);
}

ActionSpec ActionSpec::named(std::string_view name) {
  if (name == "fine") return fine();
  if (name == "multimodal") return multimodal();
  if (name == "coarse") return coarse();
  throw InvalidArgument("unknown action profile '" + std::string(name) + "'");
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
    case Action::Forward: return "forward";
    case Action::Stop: return "stop";
  }
  return "?";
}

double path_cost(const std::vector<Cell>& path) {
  double c = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const bool diag = path[i].px != path[i - 1].px && path[i].py != path[i - 1].py;
    c += diag ? kSqrt2 : 1.0;
  }
  return c;
}

std::optional<std::vector<Cell>> plan_path(const ObstacleGrid& g, const Cell& start, const Cell& goal) {
  if (g.blocked(start)) throw InvalidArgument("plan start cell is blocked or outside the grid");
  if (g.blocked(goal)) return std::nullopt;
  const std::size_t n = static_cast<std::size_t>(g.h()) * g.w();
  auto idx = [&](const Cell& c) { return static_cast<std::size_t>(c.px) * g.w() + c.py; };
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  // (f, h, index): smaller h first among equal f, then smaller index.
  using Item = std::tuple<double, double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  cost[idx(start)] = 0.0;
  open.emplace(octile(start, goal), octile(start, goal), idx(start));
  const std::size_t target = idx(goal);
  while (!open.empty()) {
    const auto [f, h, i] = open.top();
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    if (i == target) break;
    const Cell c{static_cast<std::int32_t>(i / g.w()), static_cast<std::int32_t>(i % g.w())};
    for (int k = 0; k < 8; ++k) {
      if (!can_step(g, c, k)) continue;
      const Cell m{c.px + kDx[k], c.py + kDy[k]};
      const std::size_t j = idx(m);
      if (closed[j]) continue;
      const double nc = cost[i] + ((kDx[k] && kDy[k]) ? kSqrt2 : 1.0);
      if (nc < cost[j]) {
        cost[j] = nc;
        parent[j] = static_cast<std::int64_t>(i);
        const double hj = octile(m, goal);
        open.emplace(nc + hj, hj, j);
      }
    }
  }
  if (!closed[target]) return std::nullopt;
  std::vector<Cell> path;
  for (std::int64_t i = static_cast<std::int64_t>(target); i >= 0; i = parent[i]) {
    path.push_back({static_cast<std::int32_t>(i / g.w()), static_cast<std::int32_t>(i % g.w())});
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<Cell> snap_goal(const ObstacleGrid& g, const Cell& start, const Cell& goal, double radius) {
  const auto seen = reachable_from(g, start);
  return nearest_free(g, goal, radius, [&](const Cell& c) {
    return seen[static_cast<std::size_t>(c.px) * g.w() + c.py] != 0;
  });
}

bool line_of_sight(const ObstacleGrid& g, const Cell& a, const Cell& b) {
  // Exact traversal of the unit cells the segment passes through. Crossing
  // a cell corner also requires both side cells free, like a diagonal step.
  const std::int64_t dx = std::abs(b.px - a.px), dy = std::abs(b.py - a.py);
  const int sx = b.px > a.px ? 1 : -1, sy = b.py > a.py ? 1 : -1;
  Cell c = a;
  if (g.blocked(c)) return false;
  std::int64_t kx = 0, ky = 0;  // boundaries crossed along each axis
  while (c != b) {
    // Next crossing parameters are (2k+1)/(2d); compare without division.
    const std::int64_t lhs = dx ? (2 * kx + 1) * dy : 1;
    const std::int64_t rhs = dy ? (2 * ky + 1) * dx : 1;
    const bool step_x = dx && (!dy || lhs <= rhs);
    const bool step_y = dy && (!dx || rhs <= lhs);
    if (step_x && step_y) {
      if (g.blocked({c.px + sx, c.py}) || g.blocked({c.px, c.py + sy})) return false;
    }
    if (step_x) {
      c.px += sx;
      ++kx;
    }
    if (step_y) {
      c.py += sy;
      ++ky;
    }
    if (g.blocked(c)) return false;
  }
  return true;
}

std::vector<Cell> smooth_path(const ObstacleGrid& g, const std::vector<Cell>& path) {
  if (path.size() <= 2) return path;
  std::vector<Cell> out{path.front()};
  std::size_t anchor = 0;
  while (anchor + 1 < path.size()) {
    std::size_t next = anchor + 1;
    while (next + 1 < path.size() && line_of_sight(g, path[anchor], path[next + 1])) ++next;
    out.push_back(path[next]);
    anchor = next;
  }
  return out;
}

void apply_action(Action a, AgentState& s, const ActionSpec& spec, double scale) {
  switch (a) {
    case Action::TurnLeft: s.heading = normalize_heading(s.heading - spec.turn_step); break;
    case Action::TurnRight: s.heading = normalize_heading(s.heading + spec.turn_step); break;
    case Action::Forward: s.position += heading_vector(s.heading) * (spec.forward_step / scale); break;
    case Action::Stop: break;
  }
}

std::vector<Action> turn_actions(double target, AgentState& s, const ActionSpec& spec) {
  std::vector<Action> out;
  const double delta = normalize_heading(target - s.heading);
  const auto n = static_cast<long>(std::llround(std::abs(delta) / spec.turn_step));
  const Action a = delta > 0 ? Action::TurnRight : Action::TurnLeft;
  for (long i = 0; i < n; ++i) {
    out.push_back(a);
    apply_action(a, s, spec, 1.0);
  }
  return out;
}

std::vector<Action> path_to_actions(const std::vector<Cell>& path, AgentState& s, const ActionSpec& spec,
                                    double scale) {
  if (!spec.valid()) throw InvalidArgument("action spec steps must be > 0");
  std::vector<Action> out;
  // Corners only: collinear interior cells add nothing.
  std::vector<Vec2> waypoints;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && i + 1 < path.size()) {
      const Cell a = path[i - 1], b = path[i], c = path[i + 1];
      if ((b.px - a.px) * (c.py - b.py) == (b.py - a.py) * (c.px - b.px)) continue;
    }
    waypoints.emplace_back(path[i].px, path[i].py);
  }
  constexpr double kReaim = 1.0;  // meters per straight chunk
  const double half = spec.forward_step / 2.0;
  for (const Vec2& w : waypoints) {
    for (int guard = 0; guard < 100000; ++guard) {
      const double dist = (w - s.position).norm() * scale;
      if (dist < half) break;
      const double chunk = std::min(dist, kReaim);
      auto turns = turn_actions(bearing(s.position, w), s, spec);
      out.insert(out.end(), turns.begin(), turns.end());
      const auto n = std::max<long>(1, std::llround(chunk / spec.forward_step));
      for (long k = 0; k < n; ++k) {
        out.push_back(Action::Forward);
        apply_action(Action::Forward, s, spec, scale);
      }
      if (dist <= kReaim) break;
    }
  }
  out.push_back(Action::Stop);
  return out;
}

void write_action_trace(const std::filesystem::path& path, const std::vector<Action>& actions) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Action a : actions) out << action_name(a) << '\n';
}

std::vector<Action> read_action_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<Action> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    bool ok = false;
    for (Action a : {Action::TurnLeft, Action::TurnRight, Action::Forward, Action::Stop}) {
      if (line == action_name(a)) {
        out.push_back(a);
        ok = true;
      }
    }
    if (!ok) throw ParseError("unknown action '" + line + "'", lineno, 1);
  }
  return out;
}

namespace {

struct PrimitiveEntry {
  std::string_view name;
  Primitive p;
};

constexpr PrimitiveEntry kPrimitives[] = {
    {"move_to", Primitive::MoveTo},
    {"move_to_object", Primitive::MoveToObject},
    {"move_to_left", Primitive::MoveToLeft},
    {"move_to_right", Primitive::MoveToRight},
    {"with_pos_on_left", Primitive::WithPosOnLeft},
    {"with_pos_on_right", Primitive::WithPosOnRight},
    {"move_in_between", Primitive::MoveInBetween},
    {"face", Primitive::Face},
    {"turn", Primitive::Turn},
    {"turn_absolute", Primitive::TurnAbsolute},
    {"move_north", Primitive::MoveNorth},
    {"move_south", Primitive::MoveSouth},
    {"move_east", Primitive::MoveEast},
    {"move_west", Primitive::MoveWest},
    {"move_forward", Primitive::MoveForward},
    {"get_pos", Primitive::GetPos},
};

}  // namespace

std::optional<Primitive> primitive_from_name(std::string_view name) {
  if (name == "with_object_on_left") return Primitive::WithPosOnLeft;
  if (name == "with_object_on_right") return Primitive::WithPosOnRight;
  for (const auto& e : kPrimitives) {
    if (e.name == name) return e.p;
  }
  return std::nullopt;
}

std::string_view primitive_name(Primitive p) {
  for (const auto& e : kPrimitives) {
    if (e.p == p) return e.name;
  }
  return "?";
}

std::optional<Vec2> nearest_front(const std::vector<Vec2>& centroids, const AgentState& s) {
  std::optional<Vec2> front, any;
  double front_d = std::numeric_limits<double>::infinity(), any_d = front_d;
  for (const Vec2& c : centroids) {
    const double d = (c - s.position).norm();
    if (d < any_d) {
      any_d = d;
      any = c;
    }
    const bool ahead = d == 0.0 || std::abs(normalize_heading(bearing(s.position, c) - s.heading)) <= 90.0;
    if (ahead && d < front_d) {
      front_d = d;
      front = c;
    }
  }
  return front ? front : any;
}

Vec2 spatial_offset(const Vec2& centroid, Relation r, const AgentState& s, double offset_cells) {
  double dir = 0.0;
  switch (r) {
    case Relation::North: dir = 0.0; break;
    case Relation::East: dir = 90.0; break;
    case Relation::South: dir = 180.0; break;
    case Relation::West: dir = -90.0; break;
    case Relation::Left:
    case Relation::Right: {
      const double approach = (centroid - s.position).norm() > 0.0 ? bearing(s.position, centroid) : s.heading;
      dir = approach + (r == Relation::Left ? -90.0 : 90.0);
      break;
    }
  }
  return centroid + heading_vector(dir) * offset_cells;
}

Resolution resolve_primitive(Primitive p, const PrimitiveArgs& args, const ObjectLocator& locator,
                             const AgentState& s, double scale, double offset_m) {
  Resolution res;
  auto need_objects = [&](std::size_t n) {
    if (args.objects.size() != n) {
      throw InvalidArgument(std::string(primitive_name(p)) + " expects " + std::to_string(n) + " object name(s)");
    }
  };
  auto find = [&](const std::string& name) -> std::optional<Vec2> {
    auto c = nearest_front(locator.locate(name), s);
    if (!c) {
      res.found = false;
      res.missing = name;
    }
    return c;
  };
  const double offset_cells = offset_m / scale;
  switch (p) {
    case Primitive::MoveTo:
      res.goal = args.position;
      break;
    case Primitive::MoveToObject:
    case Primitive::GetPos:
      need_objects(1);
      if (auto c = find(args.objects[0])) res.goal = *c;
      break;
    case Primitive::MoveToLeft:
    case Primitive::MoveToRight:
      need_objects(1);
      if (auto c = find(args.objects[0])) {
        res.goal = spatial_offset(*c, p == Primitive::MoveToLeft ? Relation::Left : Relation::Right, s, offset_cells);
      }
      break;
    case Primitive::MoveNorth:
    case Primitive::MoveSouth:
    case Primitive::MoveEast:
    case Primitive::MoveWest: {
      need_objects(1);
      const Relation r = p == Primitive::MoveNorth   ? Relation::North
                         : p == Primitive::MoveSouth ? Relation::South
                         : p == Primitive::MoveEast  ? Relation::East
                                                     : Relation::West;
      if (auto c = find(args.objects[0])) res.goal = spatial_offset(*c, r, s, offset_cells);
      break;
    }
    case Primitive::MoveInBetween: {
      need_objects(2);
      const auto a = find(args.objects[0]);
      const auto b = a ? find(args.objects[1]) : std::nullopt;
      if (a && b) res.goal = (*a + *b) / 2.0;
      break;
    }
    case Primitive::Face:
    case Primitive::WithPosOnLeft:
    case Primitive::WithPosOnRight:
      need_objects(1);
      if (auto c = find(args.objects[0])) {
        const double b = bearing(s.position, *c);
        const double turn = p == Primitive::Face ? 0.0 : (p == Primitive::WithPosOnLeft ? 90.0 : -90.0);
        res.heading = normalize_heading(b + turn);
      }
      break;
    case Primitive::Turn:
      res.heading = normalize_heading(s.heading + args.value);
      break;
    case Primitive::TurnAbsolute:
      res.heading = normalize_heading(args.value);
      break;
    case Primitive::MoveForward:
      res.goal = s.position + heading_vector(s.heading) * (args.value / scale);
      break;
  }
  return res;
}

NavOutcome navigate_to(const ObstacleGrid& g, AgentState& s, const Vec2& goal, const ActionSpec& spec,
                       double scale, double snap_radius_m) {
  NavOutcome out;
  const double radius = snap_radius_m / scale;
  Cell start = s.cell();
  if (g.blocked(start)) {
    auto free = nearest_free(g, start, radius, [](const Cell&) { return true; });
    if (!free) {
      out.actions.push_back(Action::Stop);
      return out;
    }
    start = *free;
  }
  const Cell goal_cell{static_cast<std::int32_t>(std::floor(goal.x() + 0.5)),
                       static_cast<std::int32_t>(std::floor(goal.y() + 0.5))};
  auto path = plan_path(g, start, goal_cell);
  if (!path && g.blocked(goal_cell)) {
    const auto snapped = snap_goal(g, start, goal_cell, radius);
    if (snapped) path = plan_path(g, start, *snapped);
  }
  if (!path) {
    out.actions.push_back(Action::Stop);
    return out;
  }
  out.planned = true;
  out.path = *path;
  out.actions = path_to_actions(smooth_path(g, *path), s, spec, scale);
  const auto forwards = std::count(out.actions.begin(), out.actions.end(), Action::Forward);
  out.path_length = static_cast<double>(forwards) * spec.forward_step;
  return out;
}

}  // namespace mslm
