#include "compass/rl/residual.hpp"

#include <cmath>
#include <numeric>

#include "compass/common/errors.hpp"

namespace compass::rl {

Matrix residual_state(const Matrix& p, const sim::GoalFeatures& goal) { return residual_state(p, policy::goal_row(goal)); }

Matrix residual_state(const Matrix& p, const Matrix& goal) {
  if (p.rows() != goal.rows() || goal.cols() != policy::kGoalDim)
    throw InvalidArgument("residual_state: goal shape mismatch");
  Matrix out(p.rows(), p.cols() + kResidualTail);
  out.leftCols(p.cols()) = p;
  out.col(p.cols()) = goal.col(1);
  out.col(p.cols() + 1) = goal.col(2);
  out.col(p.cols() + 2) = goal.col(0).cwiseMin(1.0);
  return out;
}

sim::Action compose_action(sim::Action base, sim::Action residual, const sim::EmbodimentProfile& profile) {
  return {profile.clamp_v(base.v + residual.v), profile.clamp_w(base.w + residual.w)};
}

ResidualActor::ResidualActor(int state_dim, int hidden, double init_log_std)
    : state_dim_(state_dim),
      proj_("res.proj", {{state_dim + kResidualTail, state_dim}}),
      body_("res.body", {{state_dim, hidden, 2}}),
      log_std_("res.log_std", 1, 2, 1) {
  log_std_.value.setConstant(init_log_std);
}

void ResidualActor::init_from_base(const policy::BasePolicy& base) {
  const auto& head = base.head();
  if (head.spec().widths != body_.spec().widths) throw InvalidArgument("residual actor: base head widths differ");
  proj_.weight(0).value.setZero();
  proj_.weight(0).value.topRows(state_dim_).setIdentity();
  proj_.bias(0).value.setZero();
  body_.weight(0).value = head.weight(0).value;
  body_.bias(0).value = head.bias(0).value;
  body_.weight(1).value.setZero();
  body_.bias(1).value.setZero();
}

void ResidualActor::init_fresh(Rng& rng) {
  body_.init_glorot(rng);
  proj_.weight(0).value.setZero();
  proj_.weight(0).value.topRows(state_dim_).setIdentity();
  proj_.bias(0).value.setZero();
  body_.weight(1).value.setZero();
  body_.bias(1).value.setZero();
}

Matrix ResidualActor::mean(const Matrix& p_hat) const { return body_.forward(proj_.forward(p_hat)); }

Var ResidualActor::mean(Tape& tape, Var p_hat) { return body_.forward(tape, proj_.forward(tape, p_hat)); }

nn::ParameterRefs ResidualActor::parameters() {
  auto out = proj_.parameters();
  auto b = body_.parameters();
  out.insert(out.end(), b.begin(), b.end());
  out.push_back(&log_std_);
  return out;
}

std::string to_string(CriticInput c) { return c == CriticInput::PolicyState ? "state" : "obs"; }

CriticInput critic_input_from_string(const std::string& s) {
  if (s == "state") return CriticInput::PolicyState;
  if (s == "obs") return CriticInput::Observation;
  throw ConfigError("critic input must be 'state' or 'obs', got '" + s + "'");
}

Critic::Critic(CriticInput input, int state_dim)
    : input_(input),
      state_dim_(state_dim),
      net_("critic", {{input == CriticInput::PolicyState ? state_dim + kResidualTail : sim::kObsDim, 128, 64, 1}}) {}

void Critic::init(Rng& rng) { net_.init_glorot(rng); }

int Critic::input_width() const { return net_.spec().input(); }

Matrix Critic::value(const Matrix& x) const { return net_.forward(x); }

Var Critic::value(Tape& tape, Var x) { return net_.forward(tape, x); }

nn::ParameterRefs Critic::parameters() { return net_.parameters(); }

GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& dones,
              double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw InvalidArgument("gae: length mismatch");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd < 1e-8 ? a - mean : (a - mean) / sd;
}

}  // namespace compass::rl
