#include <doctest.h>

#include <filesystem>
#include <map>

#include "mslm/error.hpp"
#include "mslm/plan.hpp"
#include "oracles.hpp"

using namespace mslm;

namespace {

ObstacleGrid random_grid(oracle::Rng& rng, int n, double density) {
  ObstacleGrid g(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) g.set({x, y}, oracle::uniform(rng, 0, 1) < density);
  return g;
}

double dijkstra(const ObstacleGrid& g, Cell s, Cell t) {
  return oracle::dijkstra_cost(g.h(), g.w(), [&](int x, int y) { return g.occupied({x, y}); }, s.px, s.py, t.px, t.py);
}

bool legal_path(const ObstacleGrid& g, const std::vector<Cell>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g.blocked(p[i])) return false;
    if (i == 0) continue;
    const int dx = p[i].px - p[i - 1].px, dy = p[i].py - p[i - 1].py;
    if (std::abs(dx) > 1 || std::abs(dy) > 1 || (!dx && !dy)) return false;
    if (dx && dy && (g.blocked({p[i - 1].px + dx, p[i - 1].py}) || g.blocked({p[i - 1].px, p[i - 1].py + dy}))) return false;
  }
  return true;
}

class MapLocator : public ObjectLocator {
 public:
  std::map<std::string, std::vector<Vec2>> objects;
  std::vector<Vec2> locate(const std::string& name) const override {
    auto it = objects.find(name);
    return it == objects.end() ? std::vector<Vec2>{} : it->second;
  }
};

}  // namespace

TEST_CASE("headings: north is -px, east is +py, turns normalize") {
  CHECK((heading_vector(0) - Vec2(-1, 0)).norm() < 1e-12);
  CHECK((heading_vector(90) - Vec2(0, 1)).norm() < 1e-12);
  CHECK((heading_vector(180) - Vec2(1, 0)).norm() < 1e-12);
  CHECK((heading_vector(-90) - Vec2(0, -1)).norm() < 1e-12);
  CHECK(bearing({10, 10}, {5, 10}) == doctest::Approx(0.0));
  CHECK(bearing({10, 10}, {10, 15}) == doctest::Approx(90.0));
  CHECK(bearing({10, 10}, {15, 10}) == doctest::Approx(180.0));
  CHECK(normalize_heading(-180) == 180.0);
  CHECK(normalize_heading(270) == -90.0);
  CHECK(normalize_heading(540) == 180.0);
}

TEST_CASE("plan_path: straight line, start equals goal, walled goal, blocked start") {
  ObstacleGrid g(20, 20);
  auto p = plan_path(g, {2, 2}, {12, 7});
  REQUIRE(p);
  CHECK(path_cost(*p) == doctest::Approx(5 + 5 * std::sqrt(2.0)));
  CHECK(p->front() == Cell{2, 2});
  CHECK(p->back() == Cell{12, 7});

  auto same = plan_path(g, {3, 3}, {3, 3});
  REQUIRE(same);
  CHECK(same->size() == 1);

  for (int y = 0; y < 20; ++y) g.set({10, y}, true);
  CHECK_FALSE(plan_path(g, {2, 2}, {15, 15}));
  CHECK_THROWS_AS(plan_path(g, {10, 3}, {2, 2}), InvalidArgument);
  CHECK_THROWS_AS(plan_path(g, {-1, 3}, {2, 2}), InvalidArgument);
}

TEST_CASE("plan_path does not cut blocked corners") {
  ObstacleGrid g(3, 3);
  g.set({0, 1}, true);
  g.set({1, 0}, true);
  CHECK_FALSE(plan_path(g, {0, 0}, {1, 1}));
  g.set({1, 0}, false);
  auto p = plan_path(g, {0, 0}, {1, 1});
  REQUIRE(p);
  CHECK(path_cost(*p) == 2.0);
}

TEST_CASE("plan_path cost equals Dijkstra on random 64x64 grids") {
  oracle::Rng rng(81);
  int solvable = 0;
  for (int t = 0; t < 50; ++t) {
    auto g = random_grid(rng, 64, 0.25);
    Cell s{oracle::uniform_int(rng, 0, 63), oracle::uniform_int(rng, 0, 63)};
    Cell e{oracle::uniform_int(rng, 0, 63), oracle::uniform_int(rng, 0, 63)};
    g.set(s, false);
    g.set(e, false);
    const double ref = dijkstra(g, s, e);
    const auto p = plan_path(g, s, e);
    if (std::isinf(ref)) {
      CHECK_FALSE(p);
      continue;
    }
    ++solvable;
    REQUIRE(p);
    CHECK(legal_path(g, *p));
    CHECK(std::abs(path_cost(*p) - ref) < 1e-9);
  }
  CHECK(solvable > 25);
}

TEST_CASE("snap_goal picks the nearest reachable free cell within the radius") {
  ObstacleGrid g(30, 30);
  for (int x = 10; x < 15; ++x)
    for (int y = 10; y < 15; ++y) g.set({x, y}, true);
  const auto s = snap_goal(g, {0, 0}, {12, 12}, 20);
  REQUIRE(s);
  CHECK(std::hypot(s->px - 12.0, s->py - 12.0) == doctest::Approx(3.0));
  CHECK(*s == Cell{9, 12});
  CHECK_FALSE(snap_goal(g, {0, 0}, {12, 12}, 2.0));
}

TEST_CASE("smooth_path keeps line of sight and the endpoints") {
  oracle::Rng rng(82);
  for (int t = 0; t < 20; ++t) {
    auto g = random_grid(rng, 40, 0.15);
    g.set({0, 0}, false);
    g.set({39, 39}, false);
    const auto p = plan_path(g, {0, 0}, {39, 39});
    if (!p) continue;
    const auto s = smooth_path(g, *p);
    CHECK(s.front() == p->front());
    CHECK(s.back() == p->back());
    CHECK(s.size() <= p->size());
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(line_of_sight(g, s[i - 1], s[i]));
  }
  ObstacleGrid corner(3, 3);
  corner.set({0, 1}, true);
  CHECK_FALSE(line_of_sight(corner, {0, 0}, {1, 1}));
  CHECK(line_of_sight(ObstacleGrid(3, 3), {0, 0}, {2, 2}));
}

TEST_CASE("path_to_actions: straight meter, already there, right angle") {
  std::vector<Cell> straight;
  for (int i = 0; i <= 20; ++i) straight.push_back({50 - i, 50});
  AgentState s{{50, 50}, 0.0};
  const auto a = path_to_actions(straight, s, ActionSpec::coarse(), 0.05);
  CHECK(a == std::vector<Action>{Action::Forward, Action::Forward, Action::Forward, Action::Forward, Action::Stop});

  AgentState here{{5, 5}, 30.0};
  CHECK(path_to_actions({{5, 5}}, here, ActionSpec::coarse(), 0.05) == std::vector<Action>{Action::Stop});

  std::vector<Cell> bend;
  for (int i = 0; i <= 20; ++i) bend.push_back({50 - i, 50});
  for (int i = 1; i <= 20; ++i) bend.push_back({30, 50 + i});
  AgentState b{{50, 50}, 0.0};
  const auto ab = path_to_actions(bend, b, ActionSpec::coarse(), 0.05);
  CHECK(std::count(ab.begin(), ab.end(), Action::TurnRight) == 18);
  CHECK(std::count(ab.begin(), ab.end(), Action::TurnLeft) == 0);
  CHECK(std::count(ab.begin(), ab.end(), Action::Forward) == 8);
  CHECK(ab.back() == Action::Stop);
}

TEST_CASE("path_to_actions ends near the goal on random solvable instances") {
  oracle::Rng rng(83);
  const double scale = 0.05;
  int done = 0;
  for (int t = 0; done < 100 && t < 400; ++t) {
    auto g = random_grid(rng, 64, 0.1);
    Cell s{oracle::uniform_int(rng, 0, 63), oracle::uniform_int(rng, 0, 63)};
    Cell e{oracle::uniform_int(rng, 0, 63), oracle::uniform_int(rng, 0, 63)};
    g.set(s, false);
    g.set(e, false);
    const auto p = plan_path(g, s, e);
    if (!p) continue;
    ++done;
    const ActionSpec spec = (t % 3 == 0) ? ActionSpec::fine() : (t % 3 == 1 ? ActionSpec::multimodal() : ActionSpec::coarse());
    AgentState st{{double(s.px), double(s.py)}, oracle::uniform(rng, -180, 180)};
    const auto acts = path_to_actions(smooth_path(g, *p), st, spec, scale);
    CHECK(acts.back() == Action::Stop);
    const double err = (st.position - Vec2(e.px, e.py)).norm() * scale;
    CHECK(err <= spec.forward_step + std::sqrt(2.0) * scale);
  }
  CHECK(done == 100);
}

TEST_CASE("action trace round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mslm_plan_test";
  std::filesystem::create_directories(dir);
  const std::vector<Action> acts{Action::TurnLeft, Action::Forward, Action::TurnRight, Action::Stop};
  write_action_trace(dir / "t.txt", acts);
  CHECK(read_action_trace(dir / "t.txt") == acts);
}

TEST_CASE("primitive names") {
  CHECK(primitive_from_name("move_in_between") == Primitive::MoveInBetween);
  CHECK(primitive_from_name("with_object_on_left") == Primitive::WithPosOnLeft);
  CHECK(primitive_from_name("move_to_object") == Primitive::MoveToObject);
  CHECK_FALSE(primitive_from_name("open_door"));
  CHECK(primitive_name(Primitive::TurnAbsolute) == "turn_absolute");
}

TEST_CASE("resolve_primitive: table examples") {
  MapLocator loc;
  loc.objects["a"] = {{100, 100}};
  loc.objects["b"] = {{200, 100}};
  loc.objects["chair"] = {{100, 100}};
  const double s = 0.05;
  AgentState agent{{150, 150}, 0.0};

  auto r = resolve_primitive(Primitive::MoveInBetween, {{"a", "b"}}, loc, agent, s);
  REQUIRE(r.goal);
  CHECK((*r.goal - Vec2(150, 100)).norm() < 1e-12);

  r = resolve_primitive(Primitive::MoveNorth, {{"chair"}}, loc, agent, s);
  CHECK((*r.goal - Vec2(80, 100)).norm() < 1e-9);
  r = resolve_primitive(Primitive::MoveSouth, {{"chair"}}, loc, agent, s);
  CHECK((*r.goal - Vec2(120, 100)).norm() < 1e-9);
  r = resolve_primitive(Primitive::MoveEast, {{"chair"}}, loc, agent, s);
  CHECK((*r.goal - Vec2(100, 120)).norm() < 1e-9);
  r = resolve_primitive(Primitive::MoveWest, {{"chair"}}, loc, agent, s);
  CHECK((*r.goal - Vec2(100, 80)).norm() < 1e-9);

  AgentState south_of{{140, 100}, 0.0};
  r = resolve_primitive(Primitive::Face, {{"chair"}}, loc, south_of, s);
  CHECK_FALSE(r.goal);
  CHECK(*r.heading == doctest::Approx(0.0));
  r = resolve_primitive(Primitive::WithPosOnLeft, {{"chair"}}, loc, south_of, s);
  CHECK(*r.heading == doctest::Approx(90.0));
  r = resolve_primitive(Primitive::WithPosOnRight, {{"chair"}}, loc, south_of, s);
  CHECK(*r.heading == doctest::Approx(-90.0));

  PrimitiveArgs turn;
  turn.value = -200;
  r = resolve_primitive(Primitive::Turn, turn, loc, agent, s);
  CHECK(*r.heading == doctest::Approx(160.0));
  turn.value = 180;
  r = resolve_primitive(Primitive::TurnAbsolute, turn, loc, agent, s);
  CHECK(*r.heading == doctest::Approx(180.0));

  PrimitiveArgs fwd;
  fwd.value = 2.0;
  r = resolve_primitive(Primitive::MoveForward, fwd, loc, agent, s);
  CHECK((*r.goal - Vec2(110, 150)).norm() < 1e-9);

  r = resolve_primitive(Primitive::MoveToLeft, {{"sofa"}}, loc, agent, s);
  CHECK_FALSE(r.found);
  CHECK(r.missing == "sofa");
  CHECK_FALSE(r.goal);
  CHECK_THROWS_AS(resolve_primitive(Primitive::MoveInBetween, {{"a"}}, loc, agent, s), InvalidArgument);
}

TEST_CASE("left and right offsets mirror about the approach axis") {
  oracle::Rng rng(84);
  for (int t = 0; t < 100; ++t) {
    const Vec2 c(oracle::uniform(rng, 0, 100), oracle::uniform(rng, 0, 100));
    AgentState a{{oracle::uniform(rng, 0, 100), oracle::uniform(rng, 0, 100)}, oracle::uniform(rng, -180, 180)};
    const Vec2 l = spatial_offset(c, Relation::Left, a, 20), r = spatial_offset(c, Relation::Right, a, 20);
    CHECK((l + r - 2 * c).norm() < 1e-9);
    CHECK((l - c).norm() == doctest::Approx(20.0));
    const Vec2 axis = (c - a.position).normalized();
    CHECK(std::abs((l - c).dot(axis)) < 1e-9);
    // Left is counter-clockwise from the approach: −90° from its heading.
    CHECK(std::abs(normalize_heading(bearing(c, l) - (bearing(a.position, c) - 90))) < 1e-6);
  }
}

TEST_CASE("nearest_front prefers instances ahead") {
  AgentState a{{50, 50}, 0.0};  // facing −px
  const std::vector<Vec2> cs{{55, 50}, {40, 50}};
  CHECK(*nearest_front(cs, a) == Vec2(40, 50));
  const std::vector<Vec2> behind{{55, 50}, {70, 50}};
  CHECK(*nearest_front(behind, a) == Vec2(55, 50));
  CHECK_FALSE(nearest_front({}, a));
}

TEST_CASE("navigate_to reaches a goal inside an obstacle via snapping") {
  ObstacleGrid g(100, 100);
  for (int x = 40; x < 50; ++x)
    for (int y = 40; y < 50; ++y) g.set({x, y}, true);
  AgentState a{{10, 10}, 0.0};
  const auto out = navigate_to(g, a, {45, 45}, ActionSpec::multimodal(), 0.05);
  CHECK(out.planned);
  CHECK(out.actions.back() == Action::Stop);
  CHECK((a.position - Vec2(45, 45)).norm() * 0.05 < 1.0);
  CHECK(out.path_length > 0);

  ObstacleGrid walled(50, 50);
  for (int y = 0; y < 50; ++y) walled.set({25, y}, true);
  AgentState b{{10, 10}, 0.0};
  const auto none = navigate_to(walled, b, {40, 40}, ActionSpec::multimodal(), 0.05);
  CHECK_FALSE(none.planned);
  CHECK(none.actions == std::vector<Action>{Action::Stop});
  CHECK(b.position == Vec2(10, 10));
}
