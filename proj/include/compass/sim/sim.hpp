#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "compass/common/rng.hpp"
#include "compass/sim/grid.hpp"
#include "compass/sim/map.hpp"
#include "compass/sim/profile.hpp"

namespace compass::sim {

inline constexpr int kRayCount = 32;
inline constexpr int kObsDim = kRayCount + 5;
inline constexpr double kMaxRange = 10.0;
inline constexpr double kFieldOfView = 2.0943951023931954923;  // 120 degrees
inline constexpr double kDt = 0.1;
inline constexpr int kMaxSteps = 256;
inline constexpr double kGoalRadius = 0.3;
inline constexpr double kStopSpeed = 0.05;
inline constexpr double kStopTurnRate = 0.1;
inline constexpr double kProgressGain = 1.0;
inline constexpr double kTerminalReward = 10.0;

/// Ray i points at heading + (i - 16) * fov / 32, so ray 16 looks straight ahead.
double ray_angle_offset(int i);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Velocity command (v m/s, w rad/s).
struct Action {
  double v = 0.0;
  double w = 0.0;
  bool operator==(const Action&) const = default;
};

enum class Termination { None, Reached, Collided, Fell, Timeout };

/// "none", "reached", "collided", "fell", "timeout".
std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct SimState {
  Pose pose;
  double v_cur = 0.0;
  double w_cur = 0.0;
  double goal_x = 0.0;
  double goal_y = 0.0;
  int steps = 0;
  int fall_counter = 0;
  bool alive = true;

  double goal_distance() const;
};

/// Goal features in the robot frame: distance clipped to 10 m and scaled to
/// [0,1], then sin and cos of the bearing.
struct GoalFeatures {
  double distance = 0.0;
  double sin_bearing = 0.0;
  double cos_bearing = 1.0;
};

GoalFeatures goal_features(const SimState& state);

/// Layout of the flat 37-vector: 32 normalized ranges, v_cur, w_cur,
/// normalized goal distance, sin bearing, cos bearing.
struct Observation {
  std::array<double, kRayCount> ranges{};
  double v = 0.0;
  double w = 0.0;
  GoalFeatures goal;

  std::array<double, kObsDim> flat() const;
  static Observation from_flat(std::span<const double> values);
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  Termination termination = Termination::None;
};

struct ResetOptions {
  double min_goal_distance = 2.0;
  double max_goal_distance = 5.0;
  int retry_budget = 2000;
};

/// Normalized ranges to the nearest obstacle that blocks the profile.
std::array<double, kRayCount> raycast(const Map& map, const Pose& pose, const EmbodimentProfile& profile);

Observation observe(const Map& map, const SimState& state, const EmbodimentProfile& profile);

/// Body circle overlaps a blocking obstacle or leaves the map bounds.
bool in_collision(const Map& map, double x, double y, const EmbodimentProfile& profile);

/// k_prog (d_prev - d_new), -10 on collision or fall, +10 on reaching the goal.
double reward(const SimState& prev, const SimState& next, Termination termination);

struct StepOutcome {
  SimState state;
  StepResult result;
};

/// Clamps the command, applies first-order velocity tracking and unicycle
/// integration, then evaluates termination (collided > fell > reached > timeout).
/// Throws InvalidArgument on a non-finite command or a finished episode.
StepOutcome step(const SimState& state, Action action, const EmbodimentProfile& profile, const Map& map,
                 double dt = kDt);

/// Collision-free start with uniform heading and a reachable goal whose distance
/// is uniform in [min, max]. Throws GenerationError when the budget runs out.
SimState reset(const Map& map, const EmbodimentProfile& profile, Rng& rng, const ResetOptions& options = {});
SimState reset(const Map& map, const OccupancyGrid& grid, const EmbodimentProfile& profile, Rng& rng,
               const ResetOptions& options = {});

/// Inflation used for start/goal reachability checks.
double reset_inflation(const EmbodimentProfile& profile);

/// One environment instance: map, profile, state and its own random stream.
class Env {
 public:
  Env(std::shared_ptr<const Map> map, EmbodimentProfile profile, Rng rng);

  Observation reset(const ResetOptions& options = {});
  StepResult step(Action action);
  /// Replace the map (e.g. a new layout per episode); invalidates the cached grid.
  void set_map(std::shared_ptr<const Map> map);

  const SimState& state() const { return state_; }
  const Map& map() const { return *map_; }
  std::shared_ptr<const Map> map_ptr() const { return map_; }
  const EmbodimentProfile& profile() const { return profile_; }
  Rng& rng() { return rng_; }

 private:
  std::shared_ptr<const Map> map_;
  EmbodimentProfile profile_;
  Rng rng_;
  std::unique_ptr<OccupancyGrid> grid_;
  SimState state_;
};

/// Steps every environment with its action. Results equal sequential step()
/// calls in any execution order.
std::vector<StepResult> batch_step(std::span<Env> envs, std::span<const Action> actions, std::size_t threads = 1);

/// Functional form over raw states.
std::vector<StepOutcome> batch_step(std::span<const SimState> states, std::span<const Action> actions,
                                    std::span<const EmbodimentProfile* const> profiles,
                                    std::span<const Map* const> maps, double dt = kDt, std::size_t threads = 1);

}  // namespace compass::sim
