#include "compass/policy/base_policy.hpp"

#include <algorithm>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/nn/adam.hpp"
#include "compass/nn/checkpoint.hpp"

namespace compass::policy {

Matrix goal_row(const sim::GoalFeatures& g) {
  Matrix m(1, kGoalDim);
  m << g.distance, g.sin_bearing, g.cos_bearing;
  return m;
}

Matrix goal_row(const std::array<double, sim::kObsDim>& obs) {
  Matrix m(1, kGoalDim);
  m << obs[sim::kRayCount + 2], obs[sim::kRayCount + 3], obs[sim::kRayCount + 4];
  return m;
}

Matrix obs_row(const std::array<double, sim::kObsDim>& obs) {
  Matrix m(1, sim::kObsDim);
  for (int i = 0; i < sim::kObsDim; ++i) m(0, i) = obs[static_cast<std::size_t>(i)];
  return m;
}

Matrix action_row(sim::Action a) {
  Matrix m(1, 2);
  m << a.v, a.w;
  return m;
}

sim::Action to_action(const Matrix& row) { return {row(0, 0), row(0, 1)}; }

BasePolicy::BasePolicy(BaseSpec spec)
    : spec_(spec),
      route_("il.route", {{kGoalDim, spec.route_hidden, spec.route}}),
      fusion_("il.fusion", {{spec.latent + spec.route, spec.fusion_hidden, spec.state}}),
      head_("il.head", {{spec.state, spec.head_hidden, 2}}) {}

void BasePolicy::init(Rng& rng) {
  route_.init_glorot(rng);
  fusion_.init_glorot(rng);
  head_.init_glorot(rng);
}

Matrix BasePolicy::route_embedding(const Matrix& goal) const { return route_.forward(goal); }

Matrix BasePolicy::policy_state(const Matrix& latent, const Matrix& goal) const {
  if (latent.rows() != goal.rows()) throw InvalidArgument("policy_state: batch size mismatch");
  Matrix x(latent.rows(), latent.cols() + spec_.route);
  x << latent, route_.forward(goal);
  return fusion_.forward(x);
}

Matrix BasePolicy::action(const Matrix& p) const { return head_.forward(p); }

Var BasePolicy::policy_state(Tape& tape, Var latent, Var goal) {
  return fusion_.forward(tape, tape.concat_cols(latent, route_.forward(tape, goal)));
}

Var BasePolicy::action(Tape& tape, Var p) { return head_.forward(tape, p); }

nn::ParameterRefs BasePolicy::parameters() {
  nn::ParameterRefs out;
  for (auto* m : {&route_, &fusion_, &head_}) {
    auto p = m->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

IlTrainLog train_il(BasePolicy& policy, const wm::WorldModel& model, const teacher::DemoDataset& demos,
                    const IlTrainConfig& cfg, std::uint64_t seed) {
  if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr > 0.0)) throw InvalidArgument("IL training: invalid configuration");
  std::vector<const teacher::DemoEpisode*> episodes;
  for (const auto& e : demos.episodes)
    if (e.length > 0 && (!cfg.successful_only || e.outcome == sim::Termination::Reached)) episodes.push_back(&e);
  std::size_t n = 0;
  for (auto* e : episodes) n += static_cast<std::size_t>(e->length);
  if (n == 0) throw InvalidArgument("IL training: no usable demonstration frames");

  const int latent = model.spec().latent;
  Matrix latents(static_cast<Eigen::Index>(n), latent);
  Matrix goals(static_cast<Eigen::Index>(n), kGoalDim);
  Matrix targets(static_cast<Eigen::Index>(n), 2);
  Eigen::Index row = 0;
  for (auto* e : episodes) {
    const Matrix s = wm::episode_latents(model, demos, *e);
    for (int t = 0; t < e->length; ++t, ++row) {
      const auto& f = demos.frames[e->first_frame + static_cast<std::size_t>(t)];
      latents.row(row) = s.row(t);
      goals.row(row) = goal_row(f.obs);
      targets(row, 0) = f.act.v;
      targets(row, 1) = f.act.w;
    }
  }

  Rng init_rng({seed, fnv1a("il-init")});
  policy.init(init_rng);
  auto params = policy.parameters();
  nn::Adam adam(params, {cfg.lr});
  IlTrainLog log;
  log.samples = n;
  std::vector<Eigen::Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);

  auto gather = [&](const Matrix& src, std::size_t lo, std::size_t hi) {
    Matrix out(static_cast<Eigen::Index>(hi - lo), src.cols());
    for (std::size_t i = lo; i < hi; ++i) out.row(static_cast<Eigen::Index>(i - lo)) = src.row(order[i]);
    return out;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle({seed, fnv1a("il-shuffle"), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    double sum = 0.0;
    for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(cfg.batch));
      Tape tape;
      const Var p = policy.policy_state(tape, tape.constant(gather(latents, lo, hi)), tape.constant(gather(goals, lo, hi)));
      const Var loss = tape.mean(tape.square(tape.sub(policy.action(tape, p), tape.constant(gather(targets, lo, hi)))));
      nn::zero_grads(params);
      tape.backward(loss);
      adam.step();
      sum += tape.scalar(loss) * static_cast<double>(hi - lo);
    }
    log.epoch_loss.push_back(sum / static_cast<double>(n));
  }
  const Matrix pred = policy.action(policy.policy_state(latents, goals));
  log.final_mse = (pred - targets).array().square().mean();
  return log;
}

void save_il(const std::filesystem::path& path, BasePolicy& policy, std::uint64_t seed, const nlohmann::json& extra) {
  nn::save_checkpoint(path, policy.parameters());
  nlohmann::json m = extra.is_object() ? extra : nlohmann::json::object();
  m["kind"] = "il/v1";
  m["seed"] = seed;
  const auto& s = policy.spec();
  m["spec"] = {{"route", {kGoalDim, s.route_hidden, s.route}},
               {"fusion", {s.latent + s.route, s.fusion_hidden, s.state}},
               {"head", {s.state, s.head_hidden, 2}},
               {"latent", s.latent}};
  nn::write_manifest(path, m);
}

BasePolicy load_il(const std::filesystem::path& path) {
  const auto m = nn::read_manifest(path);
  if (m.value("kind", "") != "il/v1") throw DependencyError(path.string() + " is not a base policy checkpoint");
  BaseSpec s;
  s.latent = m.at("spec").at("latent").get<int>();
  s.route_hidden = m.at("spec").at("route").at(1).get<int>();
  s.route = m.at("spec").at("route").at(2).get<int>();
  s.fusion_hidden = m.at("spec").at("fusion").at(1).get<int>();
  s.state = m.at("spec").at("fusion").at(2).get<int>();
  s.head_hidden = m.at("spec").at("head").at(1).get<int>();
  BasePolicy policy(s);
  nn::load_checkpoint(path, policy.parameters());
  return policy;
}

PipelineState Pipeline::start() const { return {model_->initial_state(), {0.0, 0.0}}; }

Matrix Pipeline::observe(PipelineState& st, const std::array<double, sim::kObsDim>& obs) const {
  st.latent = model_->step(st.latent, action_row(st.prev_action), obs_row(obs));
  return base_ ? base_->policy_state(st.latent, goal_row(obs)) : st.latent;
}

}  // namespace compass::policy
