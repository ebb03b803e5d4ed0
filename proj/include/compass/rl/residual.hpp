#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "compass/nn/mlp.hpp"
#include "compass/policy/base_policy.hpp"

namespace compass::rl {

using nn::Matrix;
using nn::Tape;
using nn::Var;

inline constexpr int kResidualTail = 3;

/// [p (128); sin bearing; cos bearing; goal distance / 10 clipped to 1].
Matrix residual_state(const Matrix& p, const sim::GoalFeatures& goal);
/// Batched form; `goal` rows are (distance/10, sin, cos) as produced by policy::goal_row.
Matrix residual_state(const Matrix& p, const Matrix& goal);

/// Elementwise sum, then clamp to the profile limits.
sim::Action compose_action(sim::Action base, sim::Action residual, const sim::EmbodimentProfile& profile);

/// ln(0.15).
inline constexpr double kInitLogStd = -1.8971199848858813;

/// Gaussian residual actor: mean = body(proj(p_hat)), state-independent log-std.
class ResidualActor {
 public:
  explicit ResidualActor(int state_dim = 128, int hidden = 64, double init_log_std = kInitLogStd);

  /// Projection = [I; 0], hidden layer copied from the base head, output layer zero.
  void init_from_base(const policy::BasePolicy& base);
  /// Same layout with a fresh Glorot hidden layer, used when no base is available.
  void init_fresh(Rng& rng);

  int state_dim() const { return state_dim_; }
  Matrix mean(const Matrix& p_hat) const;
  Var mean(Tape& tape, Var p_hat);
  nn::Parameter& log_std() { return log_std_; }
  const nn::Parameter& log_std() const { return log_std_; }
  nn::ParameterRefs parameters();

 private:
  int state_dim_;
  nn::Mlp proj_;
  nn::Mlp body_;
  nn::Parameter log_std_;
};

enum class CriticInput { PolicyState, Observation };
std::string to_string(CriticInput c);
CriticInput critic_input_from_string(const std::string& s);

class Critic {
 public:
  explicit Critic(CriticInput input = CriticInput::PolicyState, int state_dim = 128);
  void init(Rng& rng);
  CriticInput input() const { return input_; }
  int input_width() const;
  Matrix value(const Matrix& x) const;
  Var value(Tape& tape, Var x);
  nn::ParameterRefs parameters();

 private:
  CriticInput input_;
  int state_dim_;
  nn::Mlp net_;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,  A_t = delta_t + gamma lambda (1 - done_t) A_{t+1},
/// with V_T = bootstrap. Returns = A + V.
GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& dones,
              double bootstrap, double gamma, double lambda);

/// Zero mean, unit variance; a spread below 1e-8 only centres.
void normalize_advantages(std::vector<double>& adv);

}  // namespace compass::rl
