#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "compass/nn/adam.hpp"
#include "compass/rl/residual.hpp"

namespace compass::rl {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double lr = 3e-4;
  /// Scale lr by (1 - episodes / budget) at the start of every rollout.
  bool lr_anneal = false;
  int epochs = 4;
  int minibatch = 256;
  int horizon = 128;
  int envs = 16;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double grad_clip = 0.5;
  /// Completed episodes summed over all environments.
  int budget_episodes = 1000;
  std::vector<int> tiers{1, 2, 3, 4};
  double min_goal_distance = 2.0;
  double max_goal_distance = 5.0;
  /// With the curriculum on, the minimum goal distance is enforced with probability
  /// min(1, episodes / (budget / 2)); otherwise goals may be as close as this.
  bool curriculum = false;
  double curriculum_floor = 0.5;
  CriticInput critic = CriticInput::PolicyState;
  double init_log_std = kInitLogStd;
  int eval_every = 5;
  int eval_episodes = 32;
  int eval_tier = 1;
  std::size_t threads = 1;

  /// Throws ConfigError.
  void validate() const;
};

/// Flattened on-policy samples for one update.
struct RolloutBatch {
  Matrix states;      // [n, 131]
  Matrix critic_in;   // [n, critic width]
  Matrix actions;     // [n, 2] sampled residuals
  Matrix logp;        // [n, 1]
  Matrix values;      // [n, 1]
  Matrix advantages;  // [n, 1]
  Matrix returns;     // [n, 1]
  Eigen::Index size() const { return states.rows(); }
};

struct PpoLoss {
  Var total;
  Var logp;
  Var policy;
  Var value;
  Var entropy;
};

/// -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + c_v mean((V - R)^2) - c_e H.
PpoLoss ppo_loss(Tape& tape, ResidualActor& actor, Critic& critic, const RolloutBatch& batch, const PpoConfig& cfg);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  /// Mean (r - 1) - log r over the last epoch, an estimate of KL(old || new).
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
  /// Max |log pi(a) - stored log-prob| on the first minibatch, before any step.
  double logp_drift = 0.0;
  bool aborted = false;
  std::string diagnostics;
};

/// Advantages are normalized here. On a non-finite loss the parameters are
/// restored to their values before the call and `aborted` is set.
PpoStats ppo_update(RolloutBatch batch, ResidualActor& actor, Critic& critic, nn::Adam& adam, const PpoConfig& cfg,
                    Rng& rng);

struct Specialist {
  std::string embodiment;
  bool residual = true;
  ResidualActor actor;
  Critic critic;

  explicit Specialist(CriticInput input = CriticInput::PolicyState, int state_dim = 128)
      : actor(state_dim), critic(input, state_dim) {}
  nn::ParameterRefs parameters();
};

struct CurveRow {
  int update = 0;
  int episodes = 0;
  double mean_return = std::numeric_limits<double>::quiet_NaN();
  double eval_sr = std::numeric_limits<double>::quiet_NaN();
  double eval_return = std::numeric_limits<double>::quiet_NaN();
  double clip_fraction = 0.0;
  double kl = 0.0;
};

struct EvalResult {
  double sr = 0.0;
  double mean_return = 0.0;
  int episodes = 0;
};

struct RlTrainLog {
  std::vector<CurveRow> curve;
  EvalResult final_eval;
  int episodes = 0;
  int aborted_updates = 0;
  double max_logp_drift = 0.0;
};

/// Deterministic (mean-action) evaluation on `cfg.eval_episodes` fixed maps of `cfg.eval_tier`.
EvalResult evaluate_specialist(const Specialist& spec, const policy::Pipeline& pipe,
                               const sim::EmbodimentProfile& profile, const PpoConfig& cfg, std::uint64_t seed);

/// Residual PPO on top of the frozen world model and base policy.
RlTrainLog train_specialist(Specialist& out, const sim::EmbodimentProfile& profile, const wm::WorldModel& model,
                            const policy::BasePolicy& base, const PpoConfig& cfg, std::uint64_t seed);

inline constexpr int kScratchHidden = 64;

/// Same loop without the base policy: zero base action, a freshly initialized
/// actor, and the world-model latent in place of the policy state.
RlTrainLog train_from_scratch(Specialist& out, const sim::EmbodimentProfile& profile, const wm::WorldModel& model,
                              const PpoConfig& cfg, std::uint64_t seed);

/// Mean residual for one residual state row.
sim::Action residual_mean(const Specialist& spec, const Matrix& p_hat);

/// Actor input: residual_state over p, or over the latent for a from-scratch specialist.
Matrix actor_input(const Specialist& spec, const Matrix& latent, const Matrix& p, const Matrix& goal);

/// Composed deterministic action for one step of the pipeline.
sim::Action specialist_action(const Specialist& spec, const policy::Pipeline& pipe, const Matrix& latent,
                              const Matrix& p, const Matrix& goal, const sim::EmbodimentProfile& profile);

void write_curve_csv(const std::filesystem::path& path, const RlTrainLog& log);

void save_specialist(const std::filesystem::path& path, Specialist& spec, std::uint64_t seed,
                     const nlohmann::json& extra = {});
/// Throws DependencyError if missing or not a specialist checkpoint.
Specialist load_specialist(const std::filesystem::path& path);

}  // namespace compass::rl
