#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace compass::sim {

struct Obstacle;

/// Kinematic and dynamic limits of one robot type. `id` is the one-hot position.
struct EmbodimentProfile {
  int id = 0;
  std::string name;
  double v_min = 0.0;
  double v_max = 1.0;
  double w_max = 1.0;
  double radius = 0.3;
  double height = 0.6;
  /// Velocity response time constant, seconds.
  double tau = 0.1;
  /// Bound on |v * w|; no value means the robot never falls.
  std::optional<double> fall_threshold;
  int fall_steps = 5;

  void validate() const;
  /// An obstacle blocks the robot (and its rays) iff its clearance is below the body height.
  bool blocked_by(const Obstacle& o) const;
  double clamp_v(double v) const;
  double clamp_w(double w) const;
};

/// wheeled, biped_large, biped_small, quadruped (in one-hot order).
std::vector<EmbodimentProfile> default_profiles();

const EmbodimentProfile& find_profile(const std::vector<EmbodimentProfile>& profiles, const std::string& name);

nlohmann::json profiles_to_json(const std::vector<EmbodimentProfile>& profiles);
/// Array index becomes the one-hot id. Throws ConfigError on malformed input.
std::vector<EmbodimentProfile> profiles_from_json(const nlohmann::json& j);

}  // namespace compass::sim
