#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/bench/bench.hpp"

namespace compass::pipeline {

struct SimSection {
  double min_goal_distance = 2.0;
  double max_goal_distance = 5.0;
};

struct DistillSection {
  distill::RecordConfig record;
  distill::DistillConfig train;
};

struct BenchSection {
  int trials = 100;
  std::vector<int> tiers{1, 2};
  bench::WttMode wtt = bench::WttMode::Total;
};

/// Every stage setting in one place. Serialized as JSON with the sections
/// sim, profiles, teacher, wm, il, ppo, distill, bench plus seed, out, threads.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "compass_out";
  std::size_t threads = 1;
  SimSection sim;
  std::vector<sim::EmbodimentProfile> profiles = sim::default_profiles();
  teacher::DemoConfig teacher;
  wm::WmTrainConfig wm;
  policy::IlTrainConfig il;
  rl::PpoConfig ppo;
  /// Episode budgets that replace ppo.budget_episodes for one embodiment.
  std::map<std::string, int> budget_overrides{{"wheeled", 300}};
  DistillSection distill;
  BenchSection bench;

  /// Throws ConfigError.
  void validate() const;
  const sim::EmbodimentProfile& profile(const std::string& name) const;
  int embodiment_index(const std::string& name) const;
  /// ppo with the shared goal range, thread count and per-embodiment budget applied.
  rl::PpoConfig ppo_for(const std::string& embodiment) const;
  teacher::DemoConfig demos() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
/// Throws ConfigError for unreadable or malformed files.
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace compass::pipeline
