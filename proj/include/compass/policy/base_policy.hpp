#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "compass/nn/mlp.hpp"
#include "compass/sim/sim.hpp"
#include "compass/teacher/demos.hpp"
#include "compass/wm/world_model.hpp"

namespace compass::policy {

using nn::Matrix;
using nn::Tape;
using nn::Var;

inline constexpr int kGoalDim = 3;

struct BaseSpec {
  int latent = 64;
  int route_hidden = 32;
  int route = 32;
  int fusion_hidden = 128;
  int state = 128;
  int head_hidden = 64;
};

/// Goal features as a 1x3 row: distance / 10, sin bearing, cos bearing.
Matrix goal_row(const sim::GoalFeatures& g);
/// Same three values taken from a flat observation.
Matrix goal_row(const std::array<double, sim::kObsDim>& obs);
Matrix obs_row(const std::array<double, sim::kObsDim>& obs);
Matrix action_row(sim::Action a);
sim::Action to_action(const Matrix& row);

/// Imitation-learned base policy:
///   r = route([d, sin, cos]),  p = fusion([s; r]),  a = head(p).
/// The head output is in physical units and is not clamped here.
class BasePolicy {
 public:
  explicit BasePolicy(BaseSpec spec = {});

  void init(Rng& rng);
  const BaseSpec& spec() const { return spec_; }

  Matrix route_embedding(const Matrix& goal) const;
  Matrix policy_state(const Matrix& latent, const Matrix& goal) const;
  Matrix action(const Matrix& p) const;

  Var policy_state(Tape& tape, Var latent, Var goal);
  Var action(Tape& tape, Var p);

  nn::Mlp& route() { return route_; }
  nn::Mlp& fusion() { return fusion_; }
  nn::Mlp& head() { return head_; }
  const nn::Mlp& head() const { return head_; }
  nn::ParameterRefs parameters();

 private:
  BaseSpec spec_;
  nn::Mlp route_;
  nn::Mlp fusion_;
  nn::Mlp head_;
};

struct IlTrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch = 256;
  /// Train only on episodes the teacher completed.
  bool successful_only = true;
};

struct IlTrainLog {
  std::vector<double> epoch_loss;
  /// Full-dataset MSE after the last update.
  double final_mse = 0.0;
  std::size_t samples = 0;
};

/// Regresses teacher actions from frozen world-model latents (teacher-forced
/// over each episode) and goal features.
IlTrainLog train_il(BasePolicy& policy, const wm::WorldModel& model, const teacher::DemoDataset& demos,
                    const IlTrainConfig& cfg, std::uint64_t seed);

void save_il(const std::filesystem::path& path, BasePolicy& policy, std::uint64_t seed,
             const nlohmann::json& extra = {});
BasePolicy load_il(const std::filesystem::path& path);

/// Per-episode inference state for the world model plus base policy.
struct PipelineState {
  Matrix latent;
  sim::Action prev_action;
};

/// World model and base policy evaluated together, one observation at a time.
class Pipeline {
 public:
  Pipeline(const wm::WorldModel* model, const BasePolicy* base) : model_(model), base_(base) {}

  PipelineState start() const;
  /// Advances the latent with the observation and the previous executed action,
  /// returning the policy state p_t (the latent itself when no base is attached).
  Matrix observe(PipelineState& st, const std::array<double, sim::kObsDim>& obs) const;
  Matrix base_action(const Matrix& p) const { return base_->action(p); }

  const wm::WorldModel& world_model() const { return *model_; }
  const BasePolicy& base() const { return *base_; }

 private:
  const wm::WorldModel* model_;
  const BasePolicy* base_;
};

}  // namespace compass::policy
