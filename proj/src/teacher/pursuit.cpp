#include "compass/teacher/pursuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "compass/common/errors.hpp"

namespace compass::teacher {

sim::Action pursuit_command(const sim::Pose& pose, Point target, double goal_distance,
                            const sim::EmbodimentProfile& profile, const PursuitConfig& cfg) {
  if (goal_distance <= cfg.reach_radius) return {0.0, 0.0};
  const double err = std::remainder(std::atan2(target.y - pose.y, target.x - pose.x) - pose.heading,
                                    2.0 * std::numbers::pi);
  double v = profile.v_max * std::max(0.0, std::cos(err));
  if (goal_distance <= cfg.stop_radius)
    v *= std::clamp((goal_distance - cfg.stop_floor) / (cfg.stop_radius - cfg.stop_floor), 0.0, 1.0);
  return {profile.clamp_v(v), profile.clamp_w(cfg.gain * err)};
}

namespace {

double project(Point a, Point b, Point p, double& dist) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  dist = std::hypot(a.x + t * dx - p.x, a.y + t * dy - p.y);
  return t;
}

}  // namespace

std::size_t closest_segment(const std::vector<Point>& path, Point p, std::size_t from) {
  if (path.size() < 2) return 0;
  std::size_t best = from;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = from; i + 1 < path.size(); ++i) {
    double d = 0.0;
    project(path[i], path[i + 1], p, d);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Point lookahead_point(const std::vector<Point>& path, Point p, std::size_t segment, double lookahead) {
  if (path.empty()) throw InvalidArgument("pursuit: empty path");
  if (path.size() == 1) return path.front();
  double d = 0.0;
  const double t = project(path[segment], path[segment + 1], p, d);
  Point cur{path[segment].x + t * (path[segment + 1].x - path[segment].x),
            path[segment].y + t * (path[segment + 1].y - path[segment].y)};
  double remaining = lookahead;
  for (std::size_t i = segment + 1; i < path.size(); ++i) {
    const double len = std::hypot(path[i].x - cur.x, path[i].y - cur.y);
    if (len >= remaining) {
      const double f = len > 0.0 ? remaining / len : 0.0;
      return {cur.x + f * (path[i].x - cur.x), cur.y + f * (path[i].y - cur.y)};
    }
    remaining -= len;
    cur = path[i];
  }
  return path.back();
}

Teacher::Teacher(std::shared_ptr<const sim::Map> map, sim::EmbodimentProfile profile, PursuitConfig cfg)
    : map_(std::move(map)), profile_(std::move(profile)), cfg_(cfg) {
  grid_ = std::make_unique<OccupancyGrid>(*map_, profile_, profile_.radius + cfg_.margin);
}

void Teacher::reset(const sim::SimState& state) {
  const Point start{state.pose.x, state.pose.y};
  const Point goal{state.goal_x, state.goal_y};
  try {
    path_ = plan_path(*grid_, start, goal);
  } catch (const NoPathError&) {
    // The wider margin can close gaps that the reset grid still treats as open.
    const OccupancyGrid tight(*map_, profile_, sim::reset_inflation(profile_));
    path_ = plan_path(tight, start, goal);
  }
  track_.clear();
  track_.push_back({state.pose.x, state.pose.y});
  track_.insert(track_.end(), path_.waypoints.begin(), path_.waypoints.end());
  segment_ = 0;
}

sim::Action Teacher::act(const sim::SimState& state) {
  if (track_.empty()) throw InvalidArgument("teacher: act() before reset()");
  const Point p{state.pose.x, state.pose.y};
  segment_ = std::min(closest_segment(track_, p, segment_), track_.size() >= 2 ? track_.size() - 2 : 0);
  const Point target = lookahead_point(track_, p, segment_, cfg_.lookahead);
  return pursuit_command(state.pose, target, state.goal_distance(), profile_, cfg_);
}

}  // namespace compass::teacher
