#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "compass/sim/sim.hpp"
#include "compass/teacher/pursuit.hpp"

namespace compass::teacher {

/// One demonstration step: observation before the action, the executed action,
/// the reward received and the termination it caused (None mid-episode).
struct DemoFrame {
  int ep = 0;
  int t = 0;
  std::array<double, sim::kObsDim> obs{};
  sim::Action act;
  double rew = 0.0;
  sim::Termination done = sim::Termination::None;
};

struct DemoEpisode {
  int ep = 0;
  int tier = 1;
  std::uint64_t map_seed = 0;
  std::uint64_t reset_seed = 0;
  sim::Termination outcome = sim::Termination::None;
  int length = 0;
  std::size_t first_frame = 0;
};

struct DemoDataset {
  std::string profile;
  std::uint64_t seed = 0;
  std::vector<DemoEpisode> episodes;
  std::vector<DemoFrame> frames;
};

struct DemoConfig {
  int episodes = 500;
  std::vector<int> tiers{1, 2, 3, 4};
  double min_goal_distance = 2.0;
  double max_goal_distance = 5.0;
  /// Required teacher success rate on tier 1 and 2 episodes.
  double min_teacher_sr = 0.9;
  /// Std of zero-mean noise added to executed commands farther than noise_radius from the goal.
  double noise_v = 0.1;
  double noise_w = 0.2;
  double noise_radius = 0.3;
  PursuitConfig pursuit;
};

/// Seeds for episode `ep` of a dataset with master seed `seed`.
std::uint64_t demo_map_seed(std::uint64_t seed, int ep);
std::uint64_t demo_reset_seed(std::uint64_t seed, int ep);

/// Runs the teacher to termination from a fresh reset, appending frames.
DemoEpisode run_teacher_episode(const std::shared_ptr<const sim::Map>& map, const sim::EmbodimentProfile& profile,
                                std::uint64_t reset_seed, const DemoConfig& cfg, std::vector<DemoFrame>& frames);

/// Episodes run in parallel with per-episode seeds; tier = tiers[ep % tiers.size()].
/// Throws GenerationError with per-tier statistics when the teacher gate fails.
DemoDataset generate_demos(const DemoConfig& cfg, const sim::EmbodimentProfile& profile, std::uint64_t seed,
                           std::size_t threads);

/// Success rate per tier, index 0 = tier 1.
std::array<double, 4> teacher_success_by_tier(const DemoDataset& ds);

/// JSON-lines frames plus a `<path>.meta.json` sidecar with the episode table.
void write_demos(const std::filesystem::path& path, const DemoDataset& ds);
DemoDataset read_demos(const std::filesystem::path& path);

}  // namespace compass::teacher
