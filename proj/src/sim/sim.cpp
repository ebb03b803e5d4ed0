#include "compass/sim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "compass/common/errors.hpp"
#include "compass/common/parallel.hpp"

namespace compass::sim {

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

/// Distance along a unit ray to the box boundary; +inf when missed, 0 when inside.
double ray_box(double ox, double oy, double dx, double dy, const Obstacle& o) {
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  const double lo[2] = {o.cx - o.half_x, o.cy - o.half_y};
  const double hi[2] = {o.cx + o.half_x, o.cy + o.half_y};
  const double org[2] = {ox, oy};
  const double dir[2] = {dx, dy};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(dir[k]) < 1e-15) {
      if (org[k] < lo[k] || org[k] > hi[k]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[k] - org[k]) / dir[k];
    double t1 = (hi[k] - org[k]) / dir[k];
    if (t0 > t1) std::swap(t0, t1);
    t_min = std::max(t_min, t0);
    t_max = std::min(t_max, t1);
    if (t_min > t_max) return std::numeric_limits<double>::infinity();
  }
  return t_min;
}

}  // namespace

double ray_angle_offset(int i) { return (i - kRayCount / 2) * (kFieldOfView / kRayCount); }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::None: return "none";
    case Termination::Reached: return "reached";
    case Termination::Collided: return "collided";
    case Termination::Fell: return "fell";
    case Termination::Timeout: return "timeout";
  }
  return "none";
}

Termination termination_from_string(const std::string& s) {
  if (s == "none") return Termination::None;
  if (s == "reached") return Termination::Reached;
  if (s == "collided") return Termination::Collided;
  if (s == "fell") return Termination::Fell;
  if (s == "timeout") return Termination::Timeout;
  throw InvalidArgument("unknown termination '" + s + "'");
}

double SimState::goal_distance() const { return std::hypot(goal_x - pose.x, goal_y - pose.y); }

GoalFeatures goal_features(const SimState& state) {
  const double dx = state.goal_x - state.pose.x;
  const double dy = state.goal_y - state.pose.y;
  const double d = std::hypot(dx, dy);
  GoalFeatures g;
  g.distance = std::min(d, kMaxRange) / kMaxRange;
  if (d > 0.0) {
    const double bearing = std::atan2(dy, dx) - state.pose.heading;
    g.sin_bearing = std::sin(bearing);
    g.cos_bearing = std::cos(bearing);
  }
  return g;
}

std::array<double, kObsDim> Observation::flat() const {
  std::array<double, kObsDim> out{};
  std::copy(ranges.begin(), ranges.end(), out.begin());
  out[kRayCount] = v;
  out[kRayCount + 1] = w;
  out[kRayCount + 2] = goal.distance;
  out[kRayCount + 3] = goal.sin_bearing;
  out[kRayCount + 4] = goal.cos_bearing;
  return out;
}

Observation Observation::from_flat(std::span<const double> values) {
  if (values.size() != kObsDim) throw InvalidArgument("observation must have 37 values");
  Observation o;
  std::copy(values.begin(), values.begin() + kRayCount, o.ranges.begin());
  o.v = values[kRayCount];
  o.w = values[kRayCount + 1];
  o.goal = {values[kRayCount + 2], values[kRayCount + 3], values[kRayCount + 4]};
  return o;
}

std::array<double, kRayCount> raycast(const Map& map, const Pose& pose, const EmbodimentProfile& profile) {
  std::array<double, kRayCount> out{};
  for (int i = 0; i < kRayCount; ++i) {
    const double a = pose.heading + ray_angle_offset(i);
    const double dx = std::cos(a);
    const double dy = std::sin(a);
    double best = kMaxRange;
    for (const auto& o : map.obstacles) {
      if (!profile.blocked_by(o)) continue;
      best = std::min(best, ray_box(pose.x, pose.y, dx, dy, o));
    }
    out[i] = best / kMaxRange;
  }
  return out;
}

Observation observe(const Map& map, const SimState& state, const EmbodimentProfile& profile) {
  Observation o;
  o.ranges = raycast(map, state.pose, profile);
  o.v = state.v_cur;
  o.w = state.w_cur;
  o.goal = goal_features(state);
  return o;
}

bool in_collision(const Map& map, double x, double y, const EmbodimentProfile& profile) {
  const double r = profile.radius;
  if (x - r < 0.0 || y - r < 0.0 || x + r > map.width || y + r > map.height) return true;
  for (const auto& o : map.obstacles)
    if (profile.blocked_by(o) && distance_to_box(o, x, y) < r) return true;
  return false;
}

double reward(const SimState& prev, const SimState& next, Termination termination) {
  double r = kProgressGain * (prev.goal_distance() - next.goal_distance());
  if (termination == Termination::Collided || termination == Termination::Fell) r -= kTerminalReward;
  if (termination == Termination::Reached) r += kTerminalReward;
  return r;
}

StepOutcome step(const SimState& state, Action action, const EmbodimentProfile& profile, const Map& map, double dt) {
  if (!std::isfinite(action.v) || !std::isfinite(action.w)) throw InvalidArgument("non-finite action");
  if (!state.alive) throw InvalidArgument("step() on a finished episode");

  SimState next = state;
  const double v_cmd = profile.clamp_v(action.v);
  const double w_cmd = profile.clamp_w(action.w);
  const double alpha = std::min(dt / profile.tau, 1.0);
  next.v_cur += (v_cmd - next.v_cur) * alpha;
  next.w_cur += (w_cmd - next.w_cur) * alpha;
  next.pose.x += next.v_cur * std::cos(state.pose.heading) * dt;
  next.pose.y += next.v_cur * std::sin(state.pose.heading) * dt;
  next.pose.heading = wrap_angle(state.pose.heading + next.w_cur * dt);
  next.steps += 1;

  const bool collided = in_collision(map, next.pose.x, next.pose.y, profile);
  bool fell = false;
  if (profile.fall_threshold) {
    next.fall_counter = std::abs(next.v_cur * next.w_cur) > *profile.fall_threshold ? next.fall_counter + 1 : 0;
    fell = next.fall_counter >= profile.fall_steps;
  }
  const bool reached = next.goal_distance() <= kGoalRadius && std::abs(next.v_cur) <= kStopSpeed &&
                       std::abs(next.w_cur) <= kStopTurnRate;
  const bool timeout = next.steps >= kMaxSteps;

  Termination t = Termination::None;
  if (collided) t = Termination::Collided;
  else if (fell) t = Termination::Fell;
  else if (reached) t = Termination::Reached;
  else if (timeout) t = Termination::Timeout;
  next.alive = t == Termination::None;

  StepOutcome out;
  out.result.reward = reward(state, next, t);
  out.result.termination = t;
  out.result.observation = observe(map, next, profile);
  out.state = next;
  return out;
}

double reset_inflation(const EmbodimentProfile& profile) { return profile.radius + 0.1; }

SimState reset(const Map& map, const EmbodimentProfile& profile, Rng& rng, const ResetOptions& options) {
  const OccupancyGrid grid(map, profile, reset_inflation(profile));
  return reset(map, grid, profile, rng, options);
}

SimState reset(const Map& map, const OccupancyGrid& grid, const EmbodimentProfile& profile, Rng& rng,
               const ResetOptions& options) {
  if (!(options.min_goal_distance >= 0.0) || !(options.max_goal_distance >= options.min_goal_distance))
    throw InvalidArgument("reset: invalid goal distance range");
  const double margin = grid.inflation();
  auto free_at = [&](double x, double y) {
    if (x < margin || y < margin || x > map.width - margin || y > map.height - margin) return false;
    if (grid.blocked(grid.cell_of(x, y))) return false;
    for (const auto& o : map.obstacles)
      if (profile.blocked_by(o) && distance_to_box(o, x, y) <= margin) return false;
    return true;
  };

  for (int attempt = 0; attempt < options.retry_budget; ++attempt) {
    const double sx = rng.uniform(0.0, map.width);
    const double sy = rng.uniform(0.0, map.height);
    const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double dist = rng.uniform(options.min_goal_distance, options.max_goal_distance);
    const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
    if (!free_at(sx, sy)) continue;
    const double gx = sx + dist * std::cos(angle);
    const double gy = sy + dist * std::sin(angle);
    if (!free_at(gx, gy)) continue;
    if (!grid.connected(grid.cell_of(sx, sy), grid.cell_of(gx, gy))) continue;
    SimState s;
    s.pose = {sx, sy, heading};
    s.goal_x = gx;
    s.goal_y = gy;
    return s;
  }
  throw GenerationError("reset: no valid start/goal pair within the retry budget");
}

Env::Env(std::shared_ptr<const Map> map, EmbodimentProfile profile, Rng rng)
    : map_(std::move(map)), profile_(std::move(profile)), rng_(std::move(rng)) {
  profile_.validate();
  state_.alive = false;
}

void Env::set_map(std::shared_ptr<const Map> map) {
  map_ = std::move(map);
  grid_.reset();
}

Observation Env::reset(const ResetOptions& options) {
  if (!grid_) grid_ = std::make_unique<OccupancyGrid>(*map_, profile_, reset_inflation(profile_));
  state_ = sim::reset(*map_, *grid_, profile_, rng_, options);
  return observe(*map_, state_, profile_);
}

StepResult Env::step(Action action) {
  auto out = sim::step(state_, action, profile_, *map_);
  state_ = out.state;
  return out.result;
}

std::vector<StepResult> batch_step(std::span<Env> envs, std::span<const Action> actions, std::size_t threads) {
  if (envs.size() != actions.size()) throw InvalidArgument("batch_step: length mismatch");
  std::vector<StepResult> out(envs.size());
  parallel_for(envs.size(), threads, [&](std::size_t i) { out[i] = envs[i].step(actions[i]); });
  return out;
}

std::vector<StepOutcome> batch_step(std::span<const SimState> states, std::span<const Action> actions,
                                    std::span<const EmbodimentProfile* const> profiles,
                                    std::span<const Map* const> maps, double dt, std::size_t threads) {
  const std::size_t n = states.size();
  if (actions.size() != n || profiles.size() != n || maps.size() != n)
    throw InvalidArgument("batch_step: length mismatch");
  std::vector<StepOutcome> out(n);
  parallel_for(n, threads, [&](std::size_t i) { out[i] = step(states[i], actions[i], *profiles[i], *maps[i], dt); });
  return out;
}

}  // namespace compass::sim
