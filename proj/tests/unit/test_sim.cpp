#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "compass/common/errors.hpp"
#include "compass/sim/sim.hpp"

using namespace compass;
using namespace compass::sim;

namespace {

const EmbodimentProfile& profile(const std::string& name) {
  static const auto profiles = default_profiles();
  return find_profile(profiles, name);
}

SimState at(double x, double y, double heading, double gx, double gy) {
  SimState s;
  s.pose = {x, y, heading};
  s.goal_x = gx;
  s.goal_y = gy;
  return s;
}

// Breadth-first reachability over the grid's blocked flags and move rule.
bool bfs_reachable(const OccupancyGrid& grid, Cell a, Cell b) {
  std::vector<char> seen(static_cast<std::size_t>(grid.cols() * grid.rows()), 0);
  std::deque<Cell> queue{a};
  seen[static_cast<std::size_t>(grid.index(a))] = 1;
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    if (c == b) return true;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if ((dc == 0 && dr == 0) || !grid.can_move(c, dc, dr)) continue;
        Cell n{c.col + dc, c.row + dr};
        auto& s = seen[static_cast<std::size_t>(grid.index(n))];
        if (!s) {
          s = 1;
          queue.push_back(n);
        }
      }
  }
  return false;
}

}  // namespace

TEST(Profiles, DefaultsAreValidAndOrdered) {
  const auto ps = default_profiles();
  ASSERT_EQ(ps.size(), 4u);
  const char* names[] = {"wheeled", "biped_large", "biped_small", "quadruped"};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(ps[static_cast<std::size_t>(i)].id, i);
    EXPECT_EQ(ps[static_cast<std::size_t>(i)].name, names[i]);
    EXPECT_NO_THROW(ps[static_cast<std::size_t>(i)].validate());
  }
  EXPECT_FALSE(ps[0].fall_threshold.has_value());
  EXPECT_DOUBLE_EQ(*ps[1].fall_threshold, 0.6);
  EXPECT_THROW(find_profile(ps, "hexapod"), ConfigError);
}

TEST(Profiles, JsonRoundTripAndUnknownKeys) {
  const auto ps = default_profiles();
  const auto j = profiles_to_json(ps);
  const auto back = profiles_from_json(j);
  ASSERT_EQ(back.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(back[i].name, ps[i].name);
    EXPECT_EQ(back[i].v_max, ps[i].v_max);
    EXPECT_EQ(back[i].fall_threshold, ps[i].fall_threshold);
  }
  auto bad = j;
  bad[0]["wheels"] = 4;
  EXPECT_THROW(profiles_from_json(bad), ConfigError);
  auto neg = j;
  neg[1]["radius"] = -0.1;
  EXPECT_ANY_THROW(profiles_from_json(neg));
}

TEST(Maps, TierOneIsSparseAndSolid) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Map m = generate_map(1, seed);
    EXPECT_EQ(m.tier, 1);
    for (const auto& o : m.obstacles) EXPECT_EQ(o.clearance, 0.0);
    // Perimeter walls are excluded from the clutter budget.
    double area = 0.0;
    for (const auto& o : m.obstacles)
      if (std::min(o.half_x, o.half_y) > kWallThickness / 2 + 1e-12) area += 4 * o.half_x * o.half_y;
    EXPECT_LE(area, 0.15 * m.width * m.height) << "seed " << seed;
  }
}

TEST(Maps, GenerationIsDeterministic) {
  for (int tier = 1; tier <= 4; ++tier) EXPECT_EQ(generate_map(tier, 17), generate_map(tier, 17));
  EXPECT_NE(generate_map(2, 17).obstacles, generate_map(2, 18).obstacles);
}

TEST(Maps, RackTiersContainOverhangs) {
  for (int tier : {2, 4})
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const Map m = generate_map(tier, seed);
      bool found = false;
      for (const auto& o : m.obstacles) found |= o.clearance == 1.5;
      EXPECT_TRUE(found) << "tier " << tier << " seed " << seed;
    }
}

TEST(Maps, ObstaclesStayInsideBounds) {
  for (int tier = 1; tier <= 4; ++tier)
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      for (const auto& o : generate_map(tier, seed).obstacles) {
        EXPECT_GE(o.cx - o.half_x, -1e-9);
        EXPECT_LE(o.cx + o.half_x, 20.0 + 1e-9);
        EXPECT_GE(o.cy - o.half_y, -1e-9);
        EXPECT_LE(o.cy + o.half_y, 20.0 + 1e-9);
      }
}

TEST(Maps, JsonRoundTripAndBadTier) {
  const Map m = generate_map(3, 5);
  EXPECT_EQ(map_from_json(map_to_json(m)), m);
  EXPECT_THROW(generate_map(0, 1), InvalidArgument);
  EXPECT_THROW(generate_map(5, 1), InvalidArgument);
}

TEST(Raycast, EmptyMapReadsMaxRange) {
  const Map m = empty_map();
  for (double r : raycast(m, {10, 10, 0.3}, profile("wheeled"))) EXPECT_EQ(r, 1.0);
}

TEST(Raycast, WallThreeMetresAhead) {
  Map m = empty_map();
  m.obstacles.push_back({13.1, 10.0, 0.1, 3.0, 0.0});
  const auto r = raycast(m, {10, 10, 0.0}, profile("wheeled"));
  EXPECT_NEAR(r[kRayCount / 2], 0.3, 1e-9);
  EXPECT_NEAR(ray_angle_offset(kRayCount / 2), 0.0, 0.0);
  // Off-centre rays see the wall further away, 3 / cos(angle).
  EXPECT_NEAR(r[kRayCount / 2 + 2], 0.3 / std::cos(ray_angle_offset(kRayCount / 2 + 2)), 1e-9);
}

TEST(Raycast, OverhangVisibilityFollowsBodyHeight) {
  Map m = empty_map();
  m.obstacles.push_back({13.5, 10.0, 0.5, 3.0, 1.5});
  const Pose pose{10, 10, 0.0};
  EXPECT_EQ(raycast(m, pose, profile("biped_small"))[16], 1.0);
  EXPECT_NEAR(raycast(m, pose, profile("biped_large"))[16], 0.3, 1e-9);
}

TEST(Raycast, VisibilityMatchesCollidability) {
  Rng rng(3);
  for (const auto& p : default_profiles())
    for (double clearance : {0.0, 0.65, 0.75, 1.5, 2.0}) {
      Map m = empty_map();
      m.obstacles.push_back({12.0, 10.0, 0.5, 0.5, clearance});
      const bool visible = raycast(m, {10, 10, 0.0}, p)[16] < 1.0;
      const bool collides = in_collision(m, 12.0, 10.0, p);
      EXPECT_EQ(visible, collides) << p.name << " clearance " << clearance;
      EXPECT_EQ(visible, p.blocked_by(m.obstacles[0]));
    }
}

TEST(Observation, LayoutAndUnitBearing) {
  SimState s = at(5, 5, 0.4, 8, 9);
  s.v_cur = 0.7;
  s.w_cur = -0.2;
  const Map m = generate_map(1, 2);
  const Observation o = observe(m, s, profile("wheeled"));
  const auto flat = o.flat();
  EXPECT_EQ(flat[32], 0.7);
  EXPECT_EQ(flat[33], -0.2);
  EXPECT_NEAR(flat[34], 0.5, 1e-12);
  EXPECT_NEAR(flat[35] * flat[35] + flat[36] * flat[36], 1.0, 1e-9);
  for (int i = 0; i < kRayCount; ++i) {
    EXPECT_GE(flat[static_cast<std::size_t>(i)], 0.0);
    EXPECT_LE(flat[static_cast<std::size_t>(i)], 1.0);
  }
  const auto back = Observation::from_flat(flat);
  EXPECT_EQ(back.flat(), flat);
  const SimState far = at(1, 1, 0.0, 19, 19);
  EXPECT_EQ(goal_features(far).distance, 1.0);
}

TEST(Step, FullTrackingInOneStepWhenTauEqualsDt) {
  EmbodimentProfile p = profile("wheeled");
  p.tau = kDt;
  const Map m = empty_map();
  auto out = step(at(10, 10, 0, 15, 10), {1.0, 0.0}, p, m);
  EXPECT_DOUBLE_EQ(out.state.v_cur, 1.0);
  EXPECT_NEAR(out.state.pose.x, 10.1, 1e-12);
  EXPECT_NEAR(out.state.pose.y, 10.0, 1e-12);
  EXPECT_EQ(out.result.termination, Termination::None);
}

TEST(Step, CommandsAreClampedBeforeTracking) {
  EmbodimentProfile p = profile("wheeled");
  p.tau = kDt;
  const Map m = empty_map();
  auto out = step(at(10, 10, 0, 15, 10), {99.0, -99.0}, p, m);
  EXPECT_DOUBLE_EQ(out.state.v_cur, 1.5);
  EXPECT_DOUBLE_EQ(out.state.w_cur, -1.0);
}

TEST(Step, FallStepMatchesScalarRecurrence) {
  const auto& p = profile("biped_large");
  // Oracle: first-order response of (v, w) from rest, counting consecutive
  // violations of |v w| > c_fall.
  double v = 0.0;
  double w = 0.0;
  int streak = 0;
  int expected = -1;
  const double a = kDt / 0.5;
  for (int t = 1; t <= 64; ++t) {
    v += (1.2 - v) * a;
    w += (0.8 - w) * a;
    streak = std::abs(v * w) > 0.6 ? streak + 1 : 0;
    if (streak >= 5) {
      expected = t;
      break;
    }
  }
  ASSERT_GT(expected, 5);

  const Map m = empty_map(40, 40);
  SimState s = at(20, 20, 0.0, 39, 39);
  int fell_at = -1;
  for (int t = 1; t <= 64 && fell_at < 0; ++t) {
    auto out = step(s, {1.2, 0.8}, p, m);
    s = out.state;
    if (out.result.termination == Termination::Fell) fell_at = t;
    else ASSERT_EQ(out.result.termination, Termination::None) << "step " << t;
  }
  EXPECT_EQ(fell_at, expected);
  EXPECT_FALSE(s.alive);
}

TEST(Step, ProfilesWithoutThresholdNeverFall) {
  const Map m = empty_map(60, 60);
  SimState s = at(30, 30, 0.0, 59, 59);
  for (int t = 0; t < 200; ++t) {
    auto out = step(s, {1.5, 1.2}, profile("quadruped"), m);
    ASSERT_NE(out.result.termination, Termination::Fell);
    s = out.state;
    if (!s.alive) break;
  }
}

TEST(Step, InvalidInputsThrow) {
  const Map m = empty_map();
  const SimState s = at(10, 10, 0, 15, 10);
  EXPECT_THROW(step(s, {std::nan(""), 0.0}, profile("wheeled"), m), InvalidArgument);
  EXPECT_THROW(step(s, {0.0, INFINITY}, profile("wheeled"), m), InvalidArgument);
  SimState dead = s;
  dead.alive = false;
  EXPECT_THROW(step(dead, {0.0, 0.0}, profile("wheeled"), m), InvalidArgument);
}

TEST(Step, ZeroCommandNeverSpeedsUp) {
  const Map m = empty_map(60, 60);
  for (const auto& p : default_profiles()) {
    SimState s = at(30, 30, 0.0, 59, 59);
    s.v_cur = p.v_max;
    s.w_cur = -p.w_max;
    for (int t = 0; t < 50 && s.alive; ++t) {
      auto out = step(s, {0.0, 0.0}, p, m);
      EXPECT_LE(std::abs(out.state.v_cur), std::abs(s.v_cur));
      EXPECT_LE(std::abs(out.state.w_cur), std::abs(s.w_cur));
      s = out.state;
    }
  }
}

TEST(Step, CollisionAndTimeout) {
  Map m = empty_map();
  m.obstacles.push_back({10.6, 10.0, 0.2, 2.0, 0.0});
  EmbodimentProfile p = profile("wheeled");
  SimState s = at(10, 10, 0.0, 15, 15);
  Termination last = Termination::None;
  for (int t = 0; t < 20 && s.alive; ++t) {
    auto out = step(s, {1.0, 0.0}, p, m);
    last = out.result.termination;
    if (last == Termination::Collided) {
      EXPECT_DOUBLE_EQ(out.result.reward, s.goal_distance() - out.state.goal_distance() - 10.0);
    }
    s = out.state;
  }
  EXPECT_EQ(last, Termination::Collided);

  SimState idle = at(5, 5, 0.0, 15, 15);
  int steps = 0;
  while (idle.alive) {
    auto out = step(idle, {0.0, 0.0}, p, empty_map());
    idle = out.state;
    ++steps;
    if (!idle.alive) {
      EXPECT_EQ(out.result.termination, Termination::Timeout);
    }
  }
  EXPECT_EQ(steps, kMaxSteps);
}

TEST(Step, ReachedRequiresStopping) {
  const Map m = empty_map();
  const auto& p = profile("wheeled");
  SimState moving = at(10, 10, 0.0, 10.1, 10.0);
  moving.v_cur = 1.0;
  auto out = step(moving, {1.0, 0.0}, p, m);
  EXPECT_NE(out.result.termination, Termination::Reached);
  SimState still = at(10, 10, 0.0, 10.1, 10.0);
  out = step(still, {0.0, 0.0}, p, m);
  EXPECT_EQ(out.result.termination, Termination::Reached);
  EXPECT_LE(out.state.goal_distance(), kGoalRadius);
  EXPECT_NEAR(out.result.reward, 10.0, 1e-12);
}

TEST(Reward, Examples) {
  SimState a = at(0, 0, 0, 5.0, 0);
  SimState b = at(0, 0, 0, 4.8, 0);
  EXPECT_NEAR(reward(a, b, Termination::None), 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(reward(a, a, Termination::Collided), -10.0);
  EXPECT_DOUBLE_EQ(reward(a, a, Termination::Fell), -10.0);
  SimState c = at(0, 0, 0, 0.4, 0);
  SimState d = at(0, 0, 0, 0.25, 0);
  EXPECT_NEAR(reward(c, d, Termination::Reached), 10.15, 1e-12);
  EXPECT_DOUBLE_EQ(reward(a, a, Termination::Timeout), 0.0);
}

TEST(Reward, ProgressTelescopes) {
  const Map m = empty_map(60, 60);
  Rng rng(12);
  SimState s = at(30, 30, 0.0, 33, 34);
  const double d0 = s.goal_distance();
  double total = 0.0;
  for (int t = 0; t < 100 && s.alive; ++t) {
    auto out = step(s, {rng.uniform(0, 1.5), rng.uniform(-1, 1)}, profile("wheeled"), m);
    ASSERT_NE(out.result.termination, Termination::Collided);
    if (out.result.termination == Termination::Reached) total -= kTerminalReward;
    total += out.result.reward;
    s = out.state;
  }
  EXPECT_NEAR(total, d0 - s.goal_distance(), 1e-9);
}

TEST(Reset, GoalDistanceContractAndReachability) {
  const auto& p = profile("wheeled");
  for (int tier = 1; tier <= 4; ++tier) {
    const Map m = generate_map(tier, 100 + static_cast<std::uint64_t>(tier));
    const OccupancyGrid grid(m, p, reset_inflation(p));
    Rng rng(static_cast<std::uint64_t>(tier));
    for (int i = 0; i < 250; ++i) {
      const SimState s = reset(m, grid, p, rng);
      const double d = s.goal_distance();
      EXPECT_GE(d, 2.0);
      EXPECT_LE(d, 5.0);
      EXPECT_FALSE(in_collision(m, s.pose.x, s.pose.y, p));
      EXPECT_TRUE(s.alive);
      EXPECT_EQ(s.steps, 0);
      if (i % 10 == 0) {
        EXPECT_TRUE(bfs_reachable(grid, grid.cell_of(s.pose.x, s.pose.y), grid.cell_of(s.goal_x, s.goal_y)));
      }
    }
  }
}

TEST(Reset, DeterministicAndBudgeted) {
  const Map m = generate_map(2, 9);
  const auto& p = profile("biped_large");
  Rng a(5), b(5);
  const SimState x = reset(m, p, a);
  const SimState y = reset(m, p, b);
  EXPECT_EQ(x.pose.x, y.pose.x);
  EXPECT_EQ(x.pose.heading, y.pose.heading);
  EXPECT_EQ(x.goal_x, y.goal_x);
  Rng c(1);
  EXPECT_THROW(reset(empty_map(3, 3), p, c, {2.0, 5.0, 50}), GenerationError);
}

TEST(Batch, MatchesSequentialStepping) {
  const auto& p = profile("biped_small");
  auto map = std::make_shared<const Map>(generate_map(3, 1));
  std::vector<Env> parallel_envs;
  std::vector<Env> serial_envs;
  for (std::uint64_t i = 0; i < 16; ++i) {
    parallel_envs.emplace_back(map, p, Rng({77, i}));
    serial_envs.emplace_back(map, p, Rng({77, i}));
    parallel_envs.back().reset();
    serial_envs.back().reset();
  }
  std::set<std::pair<double, double>> starts;
  for (auto& e : parallel_envs) starts.insert({e.state().pose.x, e.state().pose.y});
  EXPECT_EQ(starts.size(), 16u);

  Rng act(4);
  for (int t = 0; t < 40; ++t) {
    std::vector<Action> actions(16);
    for (auto& a : actions) a = {act.uniform(0, 0.8), act.uniform(-1, 1)};
    for (std::size_t i = 0; i < 16; ++i)
      if (!parallel_envs[i].state().alive) {
        parallel_envs[i].reset();
        serial_envs[i].reset();
      }
    const auto batched = batch_step(std::span<Env>(parallel_envs), actions, 4);
    for (std::size_t i = 0; i < 16; ++i) {
      const auto single = serial_envs[i].step(actions[i]);
      EXPECT_EQ(batched[i].observation.flat(), single.observation.flat());
      EXPECT_EQ(batched[i].reward, single.reward);
      EXPECT_EQ(batched[i].termination, single.termination);
    }
  }
}

TEST(Batch, SingleElementEqualsStep) {
  const Map m = generate_map(1, 4);
  const auto& p = profile("quadruped");
  Rng rng(2);
  const SimState s = reset(m, p, rng);
  const SimState states[] = {s};
  const Action actions[] = {{0.5, 0.3}};
  const EmbodimentProfile* profiles[] = {&p};
  const Map* maps[] = {&m};
  const auto b = batch_step(states, actions, profiles, maps);
  const auto one = step(s, actions[0], p, m);
  EXPECT_EQ(b[0].state.pose.x, one.state.pose.x);
  EXPECT_EQ(b[0].result.observation.flat(), one.result.observation.flat());
}

TEST(Determinism, TrajectoriesAreBitwiseRepeatable) {
  auto run = [] {
    auto map = std::make_shared<const Map>(generate_map(4, 8));
    Env env(map, profile("biped_large"), Rng({3, 1}));
    env.reset();
    Rng act(9);
    std::vector<double> trace;
    while (env.state().alive) {
      auto r = env.step({act.uniform(0, 1.2), act.uniform(-0.8, 0.8)});
      trace.push_back(env.state().pose.x);
      trace.push_back(env.state().pose.y);
      trace.push_back(r.reward);
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}
