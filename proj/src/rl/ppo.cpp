#include "compass/rl/ppo.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/common/parallel.hpp"
#include "compass/nn/checkpoint.hpp"
#include "compass/nn/gaussian.hpp"

namespace compass::rl {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must be in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("ppo.lambda must be in (0, 1]");
  if (!(clip > 0.0)) throw ConfigError("ppo.clip must be > 0");
  if (!(lr > 0.0)) throw ConfigError("ppo.lr must be > 0");
  if (epochs < 1 || minibatch < 1 || horizon < 1 || envs < 1) throw ConfigError("ppo sizes must be >= 1");
  if (budget_episodes < 1) throw ConfigError("ppo.budget_episodes must be >= 1");
  if (tiers.empty()) throw ConfigError("ppo.tiers must not be empty");
  for (int t : tiers)
    if (t < 1 || t > 4) throw ConfigError("ppo.tiers entries must be in 1..4");
  if (eval_tier < 1 || eval_tier > 4) throw ConfigError("ppo.eval_tier must be in 1..4");
  if (eval_episodes < 1 || eval_every < 1) throw ConfigError("ppo eval settings must be >= 1");
  if (!(min_goal_distance > 0.0 && max_goal_distance >= min_goal_distance))
    throw ConfigError("ppo goal distance range is invalid");
}

PpoLoss ppo_loss(Tape& tape, ResidualActor& actor, Critic& critic, const RolloutBatch& batch, const PpoConfig& cfg) {
  Var mean = actor.mean(tape, tape.constant(batch.states));
  Var log_std = tape.param(actor.log_std());
  Var logp = nn::gaussian_logprob(tape, mean, log_std, tape.constant(batch.actions));
  Var ratio = tape.exp(tape.sub(logp, tape.constant(batch.logp)));
  Var adv = tape.constant(batch.advantages);
  Var unclipped = tape.mul(ratio, adv);
  Var clipped = tape.mul(tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv);
  PpoLoss out;
  out.logp = logp;
  out.policy = tape.scale(tape.mean(tape.minimum(unclipped, clipped)), -1.0);
  Var v = critic.value(tape, tape.constant(batch.critic_in));
  out.value = tape.mean(tape.square(tape.sub(v, tape.constant(batch.returns))));
  out.entropy = nn::gaussian_entropy(tape, log_std);
  out.total = tape.add(tape.add(out.policy, tape.scale(out.value, cfg.value_coef)),
                       tape.scale(out.entropy, -cfg.entropy_coef));
  return out;
}

namespace {

RolloutBatch take_rows(const RolloutBatch& b, const std::vector<Eigen::Index>& idx) {
  auto pick = [&](const Matrix& m) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
  };
  return {pick(b.states),  pick(b.critic_in),  pick(b.actions), pick(b.logp),
          pick(b.values), pick(b.advantages), pick(b.returns)};
}

}  // namespace

PpoStats ppo_update(RolloutBatch batch, ResidualActor& actor, Critic& critic, nn::Adam& adam, const PpoConfig& cfg,
                    Rng& rng) {
  PpoStats stats;
  const Eigen::Index n = batch.size();
  if (n == 0) return stats;
  std::vector<double> adv(batch.advantages.data(), batch.advantages.data() + n);
  normalize_advantages(adv);
  for (Eigen::Index i = 0; i < n; ++i) batch.advantages(i, 0) = adv[static_cast<std::size_t>(i)];

  nn::ParameterRefs params = actor.parameters();
  for (auto* p : critic.parameters()) params.push_back(p);
  std::vector<Matrix> snapshot;
  for (auto* p : params) snapshot.push_back(p->value);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double kl_sum = 0.0;
    double clip_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.minibatch) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.minibatch, n - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const RolloutBatch mb = take_rows(batch, idx);
      Tape tape;
      const PpoLoss loss = ppo_loss(tape, actor, critic, mb, cfg);
      const double total = tape.scalar(loss.total);
      if (stats.minibatches == 0)
        stats.logp_drift = (tape.value(loss.logp) - mb.logp).cwiseAbs().maxCoeff();
      if (!std::isfinite(total)) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
        stats.aborted = true;
        stats.diagnostics = fmt::format("non-finite PPO loss at epoch {} minibatch {} (policy {}, value {}, entropy {})",
                                        epoch, start / cfg.minibatch, tape.scalar(loss.policy),
                                        tape.scalar(loss.value), tape.scalar(loss.entropy));
        return stats;
      }
      nn::zero_grads(params);
      tape.backward(loss.total);
      if (cfg.grad_clip > 0.0) {
        const double norm = nn::grad_norm(params);
        if (norm > cfg.grad_clip) nn::scale_grads(params, cfg.grad_clip / norm);
      }
      adam.step();
      ++stats.minibatches;
      stats.policy_loss = tape.scalar(loss.policy);
      stats.value_loss = tape.scalar(loss.value);
      stats.entropy = tape.scalar(loss.entropy);

      if (epoch + 1 == cfg.epochs) {
        // Ratios after this minibatch's step.
        const Matrix new_mean = actor.mean(mb.states);
        const Matrix& ls = actor.log_std().value;
        for (Eigen::Index i = 0; i < len; ++i) {
          const double lp = nn::gaussian_logprob(
              std::span<const double>(new_mean.row(i).data(), 2), std::span<const double>(ls.data(), 2),
              std::span<const double>(mb.actions.row(i).data(), 2));
          const double r = std::exp(lp - mb.logp(i, 0));
          kl_sum += (r - 1.0) - std::log(r);
          clip_sum += std::abs(r - 1.0) > cfg.clip ? 1.0 : 0.0;
        }
      }
    }
    if (epoch + 1 == cfg.epochs) {
      stats.approx_kl = kl_sum / static_cast<double>(n);
      stats.clip_fraction = clip_sum / static_cast<double>(n);
    }
  }
  return stats;
}

nn::ParameterRefs Specialist::parameters() {
  auto out = actor.parameters();
  for (auto* p : critic.parameters()) out.push_back(p);
  return out;
}

sim::Action residual_mean(const Specialist& spec, const Matrix& p_hat) {
  return policy::to_action(spec.actor.mean(p_hat));
}

Matrix actor_input(const Specialist& spec, const Matrix& latent, const Matrix& p, const Matrix& goal) {
  return residual_state(spec.residual ? p : latent, goal);
}

sim::Action specialist_action(const Specialist& spec, const policy::Pipeline& pipe, const Matrix& latent,
                              const Matrix& p, const Matrix& goal, const sim::EmbodimentProfile& profile) {
  const sim::Action base = spec.residual ? policy::to_action(pipe.base_action(p)) : sim::Action{};
  return compose_action(base, residual_mean(spec, actor_input(spec, latent, p, goal)), profile);
}

namespace {

constexpr int kResetAttempts = 16;

/// Fresh map and pose for one environment slot. Maps whose free space cannot
/// host a start/goal pair are skipped.
void reset_slot(sim::Env& env, Rng& rng, const PpoConfig& cfg, double enforce_probability) {
  for (int attempt = 0;; ++attempt) {
    const int tier = cfg.tiers[rng.index(cfg.tiers.size())];
    const std::uint64_t map_seed = rng.next_u64();
    sim::ResetOptions opts{cfg.min_goal_distance, cfg.max_goal_distance};
    if (cfg.curriculum && rng.uniform() >= enforce_probability)
      opts.min_goal_distance = std::min(cfg.curriculum_floor, cfg.min_goal_distance);
    try {
      env.set_map(std::make_shared<const sim::Map>(sim::generate_map(tier, map_seed)));
      env.reset(opts);
      return;
    } catch (const GenerationError&) {
      if (attempt + 1 >= kResetAttempts) throw;
    }
  }
}

Matrix critic_rows(const Critic& critic, const Matrix& p_hat, const Matrix& obs) {
  return critic.input() == CriticInput::PolicyState ? p_hat : obs;
}

RlTrainLog train_loop(Specialist& spec, const sim::EmbodimentProfile& profile, const wm::WorldModel& model,
                      const policy::BasePolicy* base, const PpoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const policy::Pipeline pipe(&model, base);
  const int E = cfg.envs;
  const std::size_t ne = static_cast<std::size_t>(E);

  std::vector<sim::Env> envs;
  std::vector<Rng> slot_rng;
  std::vector<Rng> action_rng;
  envs.reserve(ne);
  for (int e = 0; e < E; ++e) {
    const auto key = static_cast<std::uint64_t>(e);
    envs.emplace_back(std::make_shared<const sim::Map>(sim::empty_map()), profile,
                      Rng({seed, key, fnv1a("rl-reset")}));
    slot_rng.emplace_back(Rng({seed, key, fnv1a("rl-map")}));
    action_rng.emplace_back(Rng({seed, key, fnv1a("rl-action")}));
  }

  nn::ParameterRefs params = spec.parameters();
  nn::Adam adam(params, {.lr = cfg.lr});
  Rng shuffle_rng({seed, fnv1a("ppo-shuffle")});

  int completed = 0;
  const double half_budget = 0.5 * cfg.budget_episodes;
  auto enforce_p = [&] { return std::min(1.0, completed / half_budget); };

  for (int e = 0; e < E; ++e) reset_slot(envs[static_cast<std::size_t>(e)], slot_rng[static_cast<std::size_t>(e)], cfg, enforce_p());

  Matrix latent = model.initial_state(E);
  Matrix prev_action = Matrix::Zero(E, 2);
  std::vector<double> ep_return(ne, 0.0);

  // Cached pipeline outputs for the current observation of every slot.
  Matrix obs(E, sim::kObsDim);
  Matrix goal(E, policy::kGoalDim);
  Matrix p, p_hat, base_a;
  auto refresh = [&] {
    for (int e = 0; e < E; ++e) {
      const auto o = sim::observe(envs[static_cast<std::size_t>(e)].map(), envs[static_cast<std::size_t>(e)].state(),
                                  profile)
                         .flat();
      obs.row(e) = policy::obs_row(o);
      goal.row(e) = policy::goal_row(o);
    }
    latent = model.step(latent, prev_action, obs);
    if (spec.residual) {
      p = base->policy_state(latent, goal);
      base_a = base->action(p);
    } else {
      base_a = Matrix::Zero(E, 2);
    }
    p_hat = actor_input(spec, latent, p, goal);
  };
  refresh();

  RlTrainLog log;
  const int H = cfg.horizon;
  for (int update = 1; completed < cfg.budget_episodes; ++update) {
    if (cfg.lr_anneal) adam.set_lr(cfg.lr * (1.0 - static_cast<double>(completed) / cfg.budget_episodes));
    const Eigen::Index n = static_cast<Eigen::Index>(H) * E;
    RolloutBatch batch;
    batch.states.resize(n, p_hat.cols());
    batch.critic_in.resize(n, spec.critic.input_width());
    batch.actions.resize(n, 2);
    batch.logp.resize(n, 1);
    batch.values.resize(n, 1);
    std::vector<double> rewards(static_cast<std::size_t>(n));
    std::vector<bool> dones(static_cast<std::size_t>(n));
    double returns_sum = 0.0;
    int returns_n = 0;

    for (int t = 0; t < H; ++t) {
      const Matrix mean = spec.actor.mean(p_hat);
      const Matrix& log_std = spec.actor.log_std().value;
      const Matrix crit_in = critic_rows(spec.critic, p_hat, obs);
      const Matrix values = spec.critic.value(crit_in);
      std::vector<sim::Action> actions(ne);
      for (int e = 0; e < E; ++e) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * E + e;
        double u[2];
        for (int k = 0; k < 2; ++k)
          u[k] = mean(e, k) + std::exp(log_std(0, k)) * action_rng[static_cast<std::size_t>(e)].normal();
        batch.states.row(row) = p_hat.row(e);
        batch.critic_in.row(row) = crit_in.row(e);
        batch.actions(row, 0) = u[0];
        batch.actions(row, 1) = u[1];
        batch.logp(row, 0) = nn::gaussian_logprob(std::span<const double>(mean.row(e).data(), 2),
                                                  std::span<const double>(log_std.data(), 2),
                                                  std::span<const double>(u, 2));
        batch.values(row, 0) = values(e, 0);
        actions[static_cast<std::size_t>(e)] =
            compose_action({base_a(e, 0), base_a(e, 1)}, {u[0], u[1]}, profile);
      }
      const auto results = sim::batch_step(envs, actions, cfg.threads);
      const double q = enforce_p();
      for (int e = 0; e < E; ++e) {
        const auto se = static_cast<std::size_t>(e);
        const Eigen::Index row = static_cast<Eigen::Index>(t) * E + e;
        const auto& r = results[se];
        rewards[static_cast<std::size_t>(row)] = r.reward;
        ep_return[se] += r.reward;
        const bool done = r.termination != sim::Termination::None;
        dones[static_cast<std::size_t>(row)] = done;
        prev_action(e, 0) = actions[se].v;
        prev_action(e, 1) = actions[se].w;
        if (done) {
          ++completed;
          returns_sum += ep_return[se];
          ++returns_n;
          ep_return[se] = 0.0;
          reset_slot(envs[se], slot_rng[se], cfg, q);
          latent.row(e).setZero();
          prev_action.row(e).setZero();
        }
      }
      refresh();
    }

    const Matrix boot = spec.critic.value(critic_rows(spec.critic, p_hat, obs));
    batch.advantages.resize(n, 1);
    batch.returns.resize(n, 1);
    for (int e = 0; e < E; ++e) {
      std::vector<double> r(static_cast<std::size_t>(H)), v(static_cast<std::size_t>(H));
      std::vector<bool> d(static_cast<std::size_t>(H));
      for (int t = 0; t < H; ++t) {
        const auto row = static_cast<std::size_t>(t * E + e);
        r[static_cast<std::size_t>(t)] = rewards[row];
        v[static_cast<std::size_t>(t)] = batch.values(static_cast<Eigen::Index>(row), 0);
        d[static_cast<std::size_t>(t)] = dones[row];
      }
      const GaeResult g = gae(r, v, d, boot(e, 0), cfg.gamma, cfg.lambda);
      for (int t = 0; t < H; ++t) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * E + e;
        batch.advantages(row, 0) = g.advantages[static_cast<std::size_t>(t)];
        batch.returns(row, 0) = g.returns[static_cast<std::size_t>(t)];
      }
    }

    const PpoStats stats = ppo_update(std::move(batch), spec.actor, spec.critic, adam, cfg, shuffle_rng);
    if (stats.aborted) ++log.aborted_updates;
    log.max_logp_drift = std::max(log.max_logp_drift, stats.logp_drift);

    CurveRow row;
    row.update = update;
    row.episodes = completed;
    if (returns_n > 0) row.mean_return = returns_sum / returns_n;
    row.clip_fraction = stats.clip_fraction;
    row.kl = stats.approx_kl;
    if (update % cfg.eval_every == 0 || completed >= cfg.budget_episodes) {
      const EvalResult ev = evaluate_specialist(spec, pipe, profile, cfg, seed);
      row.eval_sr = ev.sr;
      row.eval_return = ev.mean_return;
      log.final_eval = ev;
    }
    log.curve.push_back(row);
  }
  log.episodes = completed;
  return log;
}

}  // namespace

EvalResult evaluate_specialist(const Specialist& spec, const policy::Pipeline& pipe,
                               const sim::EmbodimentProfile& profile, const PpoConfig& cfg, std::uint64_t seed) {
  const int n = cfg.eval_episodes;
  std::vector<double> returns(static_cast<std::size_t>(n), 0.0);
  std::vector<int> reached(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t i) {
    const auto map = sim::generate_map(cfg.eval_tier, Rng({seed, i, fnv1a("rl-eval-map")}).next_u64());
    Rng rr({seed, i, fnv1a("rl-eval-reset")});
    sim::SimState st = sim::reset(map, profile, rr, {cfg.min_goal_distance, cfg.max_goal_distance});
    auto ps = pipe.start();
    sim::Termination term = sim::Termination::None;
    while (st.alive) {
      const auto o = sim::observe(map, st, profile).flat();
      const Matrix p = pipe.observe(ps, o);
      const sim::Action a = specialist_action(spec, pipe, ps.latent, p, policy::goal_row(o), profile);
      const auto out = sim::step(st, a, profile, map);
      st = out.state;
      ps.prev_action = a;
      returns[i] += out.result.reward;
      term = out.result.termination;
    }
    reached[i] = term == sim::Termination::Reached;
  });
  EvalResult r;
  r.episodes = n;
  r.sr = std::accumulate(reached.begin(), reached.end(), 0) / static_cast<double>(n);
  r.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  return r;
}

RlTrainLog train_specialist(Specialist& out, const sim::EmbodimentProfile& profile, const wm::WorldModel& model,
                            const policy::BasePolicy& base, const PpoConfig& cfg, std::uint64_t seed) {
  Specialist spec(cfg.critic);
  spec.embodiment = profile.name;
  spec.residual = true;
  spec.actor = ResidualActor(base.spec().state, base.spec().head_hidden, cfg.init_log_std);
  spec.actor.init_from_base(base);
  Rng crng({seed, fnv1a("critic-init")});
  spec.critic.init(crng);
  RlTrainLog log = train_loop(spec, profile, model, &base, cfg, seed);
  out = std::move(spec);
  return log;
}

RlTrainLog train_from_scratch(Specialist& out, const sim::EmbodimentProfile& profile, const wm::WorldModel& model,
                              const PpoConfig& cfg, std::uint64_t seed) {
  const int latent = model.spec().latent;
  Specialist spec(cfg.critic, latent);
  spec.embodiment = profile.name;
  spec.residual = false;
  spec.actor = ResidualActor(latent, kScratchHidden, cfg.init_log_std);
  Rng arng({seed, fnv1a("scratch-init")});
  spec.actor.init_fresh(arng);
  Rng crng({seed, fnv1a("critic-init")});
  spec.critic.init(crng);
  RlTrainLog log = train_loop(spec, profile, model, nullptr, cfg, seed);
  out = std::move(spec);
  return log;
}

void write_curve_csv(const std::filesystem::path& path, const RlTrainLog& log) {
  std::ofstream f(path);
  if (!f) throw DependencyError("cannot write " + path.string());
  auto num = [](double x) { return std::isfinite(x) ? fmt::format("{:.6f}", x) : std::string(); };
  f << "episode,mean_return,eval_sr,clip_fraction,kl\n";
  for (const auto& r : log.curve)
    f << r.episodes << ',' << num(r.mean_return) << ',' << num(r.eval_sr) << ',' << num(r.clip_fraction) << ','
      << num(r.kl) << '\n';
}

void save_specialist(const std::filesystem::path& path, Specialist& spec, std::uint64_t seed,
                     const nlohmann::json& extra) {
  nn::save_checkpoint(path, spec.parameters());
  nlohmann::json m = extra.is_object() ? extra : nlohmann::json::object();
  m["kind"] = "res/" + spec.embodiment + "/v1";
  m["embodiment"] = spec.embodiment;
  m["residual"] = spec.residual;
  m["state_dim"] = spec.actor.state_dim();
  m["critic"] = to_string(spec.critic.input());
  m["seed"] = seed;
  m["log_std"] = {spec.actor.log_std().value(0, 0), spec.actor.log_std().value(0, 1)};
  nn::write_manifest(path, m);
}

Specialist load_specialist(const std::filesystem::path& path) {
  const auto m = nn::read_manifest(path);
  const std::string kind = m.value("kind", "");
  if (kind.rfind("res/", 0) != 0) throw DependencyError(path.string() + " is not a specialist checkpoint");
  const int state_dim = m.value("state_dim", 128);
  Specialist spec(critic_input_from_string(m.at("critic").get<std::string>()), state_dim);
  spec.embodiment = m.at("embodiment").get<std::string>();
  spec.residual = m.at("residual").get<bool>();
  if (kind != "res/" + spec.embodiment + "/v1") throw DependencyError(path.string() + ": unexpected kind " + kind);
  nn::load_checkpoint(path, spec.parameters());
  return spec;
}

}  // namespace compass::rl
