#include "compass/sim/profile.hpp"

#include <algorithm>
#include <set>

#include "compass/common/errors.hpp"
#include "compass/sim/map.hpp"

namespace compass::sim {

void EmbodimentProfile::validate() const {
  if (!(v_max > 0.0)) throw InvalidArgument(name + ": v_max must be positive");
  if (!(v_min <= v_max)) throw InvalidArgument(name + ": v_min must not exceed v_max");
  if (!(w_max > 0.0)) throw InvalidArgument(name + ": w_max must be positive");
  if (!(radius > 0.0)) throw InvalidArgument(name + ": radius must be positive");
  if (!(height > 0.0)) throw InvalidArgument(name + ": height must be positive");
  if (!(tau > 0.0)) throw InvalidArgument(name + ": tau must be positive");
  if (fall_threshold && !(*fall_threshold > 0.0)) throw InvalidArgument(name + ": fall threshold must be positive");
  if (fall_steps < 1) throw InvalidArgument(name + ": fall persistence must be >= 1");
}

bool EmbodimentProfile::blocked_by(const Obstacle& o) const { return o.clearance < height; }

double EmbodimentProfile::clamp_v(double v) const { return std::clamp(v, v_min, v_max); }
double EmbodimentProfile::clamp_w(double w) const { return std::clamp(w, -w_max, w_max); }

std::vector<EmbodimentProfile> default_profiles() {
  return {
      {0, "wheeled", -0.3, 1.5, 1.0, 0.30, 0.6, 0.05, std::nullopt, 5},
      {1, "biped_large", 0.0, 1.2, 0.8, 0.35, 1.8, 0.5, 0.6, 5},
      {2, "biped_small", 0.0, 0.8, 1.0, 0.30, 1.3, 0.4, 0.5, 5},
      {3, "quadruped", 0.0, 1.5, 1.2, 0.35, 0.7, 0.2, std::nullopt, 5},
  };
}

const EmbodimentProfile& find_profile(const std::vector<EmbodimentProfile>& profiles, const std::string& name) {
  for (const auto& p : profiles)
    if (p.name == name) return p;
  throw ConfigError("unknown embodiment '" + name + "'");
}

nlohmann::json profiles_to_json(const std::vector<EmbodimentProfile>& profiles) {
  auto arr = nlohmann::json::array();
  for (const auto& p : profiles) {
    nlohmann::json j = {{"name", p.name},     {"v_min", p.v_min},   {"v_max", p.v_max},
                        {"w_max", p.w_max},   {"radius", p.radius}, {"height", p.height},
                        {"tau", p.tau},       {"fall_steps", p.fall_steps}};
    j["fall_threshold"] = p.fall_threshold ? nlohmann::json(*p.fall_threshold) : nlohmann::json("none");
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<EmbodimentProfile> profiles_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("profiles must be a non-empty array");
  static const std::set<std::string> keys = {"name", "v_min", "v_max", "w_max", "radius",
                                             "height", "tau", "fall_threshold", "fall_steps"};
  std::vector<EmbodimentProfile> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object()) throw ConfigError("profile entry must be an object");
    for (const auto& [k, _] : e.items())
      if (!keys.count(k)) throw ConfigError("unknown profile key '" + k + "'");
    try {
      EmbodimentProfile p;
      p.id = static_cast<int>(i);
      p.name = e.at("name").get<std::string>();
      p.v_min = e.at("v_min").get<double>();
      p.v_max = e.at("v_max").get<double>();
      p.w_max = e.at("w_max").get<double>();
      p.radius = e.at("radius").get<double>();
      p.height = e.at("height").get<double>();
      p.tau = e.at("tau").get<double>();
      p.fall_steps = e.value("fall_steps", 5);
      if (e.contains("fall_threshold") && !e.at("fall_threshold").is_string())
        p.fall_threshold = e.at("fall_threshold").get<double>();
      else if (e.contains("fall_threshold") && e.at("fall_threshold").get<std::string>() != "none")
        throw ConfigError("fall_threshold must be a number or \"none\"");
      p.validate();
      if (!names.insert(p.name).second) throw ConfigError("duplicate profile name '" + p.name + "'");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("profile entry: ") + ex.what());
    } catch (const InvalidArgument& ex) {
      throw ConfigError(ex.what());
    }
  }
  return out;
}

}  // namespace compass::sim
