#pragma once

#include <memory>

#include "compass/sim/sim.hpp"
#include "compass/teacher/planner.hpp"

namespace compass::teacher {

struct PursuitConfig {
  double lookahead = 0.8;
  double gain = 2.0;
  double stop_radius = 1.0;
  /// Goal distance at which the linear slowdown reaches zero speed.
  double stop_floor = 0.2;
  double reach_radius = sim::kGoalRadius;
  /// Planner inflation on top of the body radius.
  double margin = 0.35;
};

/// Velocity command toward `target`: w = clamp(gain * err), v = v_max * max(0, cos err),
/// v scaled linearly from 1 at stop_radius to 0 at stop_floor, and (0, 0)
/// inside the reach radius.
sim::Action pursuit_command(const sim::Pose& pose, Point target, double goal_distance,
                            const sim::EmbodimentProfile& profile, const PursuitConfig& cfg = {});

/// Point `lookahead` metres past the closest point of the path, searched from
/// segment `from` onwards. Returns the segment index of the closest point.
std::size_t closest_segment(const std::vector<Point>& path, Point p, std::size_t from);
Point lookahead_point(const std::vector<Point>& path, Point p, std::size_t segment, double lookahead);

/// Classical teacher: plans once per episode and tracks the path with pursuit.
class Teacher {
 public:
  Teacher(std::shared_ptr<const sim::Map> map, sim::EmbodimentProfile profile, PursuitConfig cfg = {});

  /// Plans from the current pose to the goal; throws NoPathError if unreachable.
  void reset(const sim::SimState& state);
  sim::Action act(const sim::SimState& state);

  const std::vector<Point>& path() const { return path_.waypoints; }
  const OccupancyGrid& grid() const { return *grid_; }

 private:
  std::shared_ptr<const sim::Map> map_;
  sim::EmbodimentProfile profile_;
  PursuitConfig cfg_;
  std::unique_ptr<OccupancyGrid> grid_;
  PlannedPath path_;
  std::vector<Point> track_;
  std::size_t segment_ = 0;
};

}  // namespace compass::teacher
