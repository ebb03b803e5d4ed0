#include "compass/distill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/common/parallel.hpp"
#include "compass/nn/adam.hpp"
#include "compass/nn/checkpoint.hpp"
#include "compass/nn/gaussian.hpp"

namespace compass::distill {

using nlohmann::json;

DistillDataset record_specialist(const rl::Specialist& spec, const policy::Pipeline& pipe,
                                 const sim::EmbodimentProfile& profile, int embodiment_index, const RecordConfig& cfg,
                                 std::uint64_t seed) {
  if (embodiment_index < 0 || embodiment_index >= kEmbodiments)
    throw InvalidArgument("embodiment index out of range: " + std::to_string(embodiment_index));
  if (cfg.trajectories < 1 || cfg.length < 1 || cfg.tiers.empty())
    throw InvalidArgument("recording needs positive trajectory count and length and at least one tier");
  const Matrix& log_std = spec.actor.log_std().value;
  const std::array<double, 2> var{std::exp(2.0 * log_std(0, 0)), std::exp(2.0 * log_std(0, 1))};

  std::vector<std::vector<DistillRecord>> per_episode(static_cast<std::size_t>(cfg.trajectories));
  parallel_for(per_episode.size(), cfg.threads, [&](std::size_t i) {
    const auto e = static_cast<std::uint64_t>(embodiment_index);
    const int tier = cfg.tiers[i % cfg.tiers.size()];
    const auto map = sim::generate_map(tier, Rng({seed, e, i, fnv1a("record-map")}).next_u64());
    Rng rr({seed, e, i, fnv1a("record-reset")});
    sim::SimState st = sim::reset(map, profile, rr);
    auto ps = pipe.start();
    auto& out = per_episode[i];
    sim::Termination term = sim::Termination::None;
    for (int t = 0; t < cfg.length && st.alive; ++t) {
      const auto o = sim::observe(map, st, profile).flat();
      const Matrix p = pipe.observe(ps, o);
      const Matrix goal = policy::goal_row(o);
      const Matrix base = spec.residual ? pipe.base_action(p) : Matrix::Zero(1, 2);
      const Matrix res = spec.actor.mean(rl::actor_input(spec, ps.latent, p, goal));
      DistillRecord r;
      r.p.assign(p.data(), p.data() + p.size());
      r.e = embodiment_index;
      r.mu = {base(0, 0) + res(0, 0), base(0, 1) + res(0, 1)};
      r.var = var;
      r.goal = {goal(0, 0), goal(0, 1), goal(0, 2)};
      r.ep = static_cast<int>(i);
      r.t = t;
      out.push_back(std::move(r));
      const sim::Action a = rl::compose_action({base(0, 0), base(0, 1)}, {res(0, 0), res(0, 1)}, profile);
      const auto step = sim::step(st, a, profile, map);
      st = step.state;
      ps.prev_action = a;
      term = step.result.termination;
    }
    for (auto& r : out) r.outcome = term;
  });

  DistillDataset ds;
  ds.embodiment = profile.name;
  ds.e = embodiment_index;
  for (auto& ep : per_episode)
    for (auto& r : ep) ds.records.push_back(std::move(r));
  return ds;
}

void write_dataset(const std::filesystem::path& path, const DistillDataset& ds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DependencyError("cannot write " + path.string());
  for (const auto& r : ds.records) {
    const json j = {{"p", r.p},
                    {"e", r.e},
                    {"mu", r.mu},
                    {"var", r.var},
                    {"g", r.goal},
                    {"outcome", sim::to_string(r.outcome)},
                    {"ep", r.ep},
                    {"t", r.t}};
    f << j.dump() << '\n';
  }
}

DistillDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DependencyError("distillation dataset not found: " + path.string());
  DistillDataset ds;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    DistillRecord r;
    r.p = j.at("p").get<std::vector<double>>();
    r.e = j.at("e").get<int>();
    r.mu = j.at("mu").get<std::array<double, 2>>();
    r.var = j.at("var").get<std::array<double, 2>>();
    if (j.contains("g")) r.goal = j.at("g").get<std::array<double, 3>>();
    r.outcome = sim::termination_from_string(j.at("outcome").get<std::string>());
    r.ep = j.at("ep").get<int>();
    r.t = j.at("t").get<int>();
    if (r.e < 0 || r.e >= kEmbodiments) throw InvalidArgument("record has invalid embodiment index");
    if (!(r.var[0] > 0.0 && r.var[1] > 0.0)) throw InvalidArgument("record has non-positive variance");
    if (first) {
      ds.e = r.e;
      first = false;
    } else if (r.e != ds.e) {
      throw InvalidArgument("dataset mixes embodiments");
    }
    ds.records.push_back(std::move(r));
  }
  if (!first) ds.embodiment = sim::default_profiles().at(static_cast<std::size_t>(ds.e)).name;
  return ds;
}

Generalist::Generalist(int state_dim)
    : state_dim_(state_dim), net_("gen.mean", {{state_dim + kEmbodiments, 128, 64, 2}}), log_var_("gen.log_var", 1, 2, 1) {}

void Generalist::init(Rng& rng) {
  net_.init_glorot(rng);
  log_var_.value.setZero();
}

Matrix Generalist::input(const Matrix& p, const std::vector<int>& embodiments) const {
  if (static_cast<std::size_t>(p.rows()) != embodiments.size())
    throw InvalidArgument("generalist: one embodiment index per row required");
  if (p.cols() != state_dim_) throw InvalidArgument("generalist: policy state width mismatch");
  Matrix x = Matrix::Zero(p.rows(), state_dim_ + kEmbodiments);
  x.leftCols(state_dim_) = p;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const int e = embodiments[static_cast<std::size_t>(i)];
    if (e < 0 || e >= kEmbodiments) throw InvalidArgument("embodiment index out of range: " + std::to_string(e));
    x(i, state_dim_ + e) = 1.0;
  }
  return x;
}

Matrix Generalist::mean(const Matrix& p, const std::vector<int>& embodiments) const {
  return net_.forward(input(p, embodiments));
}

Var Generalist::mean(Tape& tape, const Matrix& p, const std::vector<int>& embodiments) {
  return net_.forward(tape, tape.constant(input(p, embodiments)));
}

sim::Action Generalist::action(const Matrix& p, int embodiment) const {
  return policy::to_action(mean(p, {embodiment}));
}

nn::ParameterRefs Generalist::parameters() {
  auto out = net_.parameters();
  out.push_back(&log_var_);
  return out;
}

std::string to_string(LossMode m) { return m == LossMode::Kl ? "kl" : "mse"; }

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "kl") return LossMode::Kl;
  if (s == "mse") return LossMode::Mse;
  throw ConfigError("distillation loss must be 'kl' or 'mse', got '" + s + "'");
}

Var distill_loss(Tape& tape, Generalist& g, const std::vector<const DistillRecord*>& batch, LossMode mode) {
  if (batch.empty()) throw InvalidArgument("distill_loss: empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix p(n, g.state_dim());
  Matrix mu(n, 2);
  Matrix var(n, 2);
  std::vector<int> e(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const DistillRecord& r = *batch[static_cast<std::size_t>(i)];
    if (static_cast<int>(r.p.size()) != g.state_dim()) throw InvalidArgument("distill_loss: policy state width mismatch");
    if (!(r.var[0] > 0.0 && r.var[1] > 0.0)) throw InvalidArgument("distill_loss: non-positive teacher variance");
    p.row(i) = Eigen::Map<const Eigen::RowVectorXd>(r.p.data(), g.state_dim());
    mu.row(i) << r.mu[0], r.mu[1];
    var.row(i) << r.var[0], r.var[1];
    e[static_cast<std::size_t>(i)] = r.e;
  }
  Var student = g.mean(tape, p, e);
  if (mode == LossMode::Mse) return tape.mean(tape.square(tape.sub(student, tape.constant(mu))));
  Var kl = nn::gaussian_kl(tape, tape.constant(mu), tape.constant(var), student, tape.param(g.log_var()));
  return tape.mean(kl);
}

std::vector<int> balanced_counts(int batch, int groups) {
  if (groups < 1 || batch < groups) throw InvalidArgument("balanced_counts: need batch >= groups >= 1");
  std::vector<int> out(static_cast<std::size_t>(groups), batch / groups);
  for (int i = 0; i < batch % groups; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

namespace {

/// Cycles through one dataset's training records, reshuffling after each pass.
class Cycler {
 public:
  Cycler(std::vector<const DistillRecord*> items, Rng rng) : items_(std::move(items)), rng_(std::move(rng)) {
    shuffle();
  }
  const DistillRecord* next() {
    if (pos_ == items_.size()) shuffle();
    return items_[pos_++];
  }

 private:
  void shuffle() {
    std::shuffle(items_.begin(), items_.end(), rng_.engine());
    pos_ = 0;
  }
  std::vector<const DistillRecord*> items_;
  Rng rng_;
  std::size_t pos_ = 0;
};

}  // namespace

DistillLog train_distilled(Generalist& g, const std::vector<DistillDataset>& datasets, const DistillConfig& cfg,
                           std::uint64_t seed) {
  if (datasets.empty()) throw InvalidArgument("train_distilled: no datasets");
  if (cfg.epochs < 1 || cfg.batch < static_cast<int>(datasets.size()))
    throw InvalidArgument("train_distilled: epochs >= 1 and batch >= dataset count required");
  DistillLog log;
  std::vector<std::vector<const DistillRecord*>> train(datasets.size()), held(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& recs = datasets[d].records;
    std::vector<int> episodes;
    for (const auto& r : recs)
      if (episodes.empty() || episodes.back() != r.ep) episodes.push_back(r.ep);
    std::sort(episodes.begin(), episodes.end());
    episodes.erase(std::unique(episodes.begin(), episodes.end()), episodes.end());
    Rng split({seed, d, fnv1a("distill-holdout")});
    std::shuffle(episodes.begin(), episodes.end(), split.engine());
    const auto n_held = static_cast<std::size_t>(std::floor(cfg.holdout * static_cast<double>(episodes.size())));
    std::vector<int> held_eps(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_held));
    std::sort(held_eps.begin(), held_eps.end());
    for (const auto& r : recs) {
      if (std::binary_search(held_eps.begin(), held_eps.end(), r.ep)) {
        held[d].push_back(&r);
      } else if (!cfg.filter_failures || r.outcome == sim::Termination::Reached) {
        train[d].push_back(&r);
      }
    }
    if (train[d].empty())
      throw InvalidArgument("train_distilled: no training records left for " + datasets[d].embodiment +
                            (cfg.filter_failures ? " after filtering failures" : ""));
    log.train_records.push_back(train[d].size());
  }

  Rng init({seed, fnv1a("distill-init")});
  g.init(init);
  std::array<double, 2> var_sum{};
  for (const auto& t : train)
    for (const auto* r : t) {
      var_sum[0] += r->var[0];
      var_sum[1] += r->var[1];
    }
  const auto n_train = static_cast<double>(std::accumulate(log.train_records.begin(), log.train_records.end(), std::size_t{0}));
  g.log_var().value << std::log(var_sum[0] / n_train), std::log(var_sum[1] / n_train);
  nn::ParameterRefs params = g.parameters();
  nn::Adam adam(params, {.lr = cfg.lr});
  std::vector<Cycler> cyclers;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    cyclers.emplace_back(train[d], Rng({seed, d, fnv1a("distill-order")}));
  const std::size_t total = std::accumulate(log.train_records.begin(), log.train_records.end(), std::size_t{0});
  const std::size_t per_epoch = (total + static_cast<std::size_t>(cfg.batch) - 1) / static_cast<std::size_t>(cfg.batch);
  const std::vector<int> counts = balanced_counts(cfg.batch, static_cast<int>(datasets.size()));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      std::vector<const DistillRecord*> batch;
      std::vector<int> composition(kEmbodiments, 0);
      for (std::size_t d = 0; d < datasets.size(); ++d)
        for (int k = 0; k < counts[d]; ++k) {
          batch.push_back(cyclers[d].next());
          ++composition[static_cast<std::size_t>(batch.back()->e)];
        }
      log.batch_composition.push_back(composition);
      Tape tape;
      Var loss = distill_loss(tape, g, batch, cfg.mode);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value))
        throw NumericError("distillation loss is not finite at epoch " + std::to_string(epoch + 1));
      nn::zero_grads(params);
      tape.backward(loss);
      adam.step();
      sum += value;
    }
    log.epoch_loss.push_back(sum / static_cast<double>(per_epoch));
  }

  for (std::size_t d = 0; d < datasets.size(); ++d) {
    if (held[d].empty()) {
      log.heldout_mse.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double se = 0.0;
    for (const auto* r : held[d]) {
      const Matrix p = Eigen::Map<const Eigen::RowVectorXd>(r->p.data(), g.state_dim());
      const Matrix m = g.mean(p, {r->e});
      se += (m(0, 0) - r->mu[0]) * (m(0, 0) - r->mu[0]) + (m(0, 1) - r->mu[1]) * (m(0, 1) - r->mu[1]);
    }
    log.heldout_mse.push_back(se / (2.0 * static_cast<double>(held[d].size())));
  }
  return log;
}

void save_generalist(const std::filesystem::path& path, Generalist& g, std::uint64_t seed, const nlohmann::json& extra) {
  nn::save_checkpoint(path, g.parameters());
  json m = extra.is_object() ? extra : json::object();
  m["kind"] = "dist/v1";
  m["seed"] = seed;
  m["state_dim"] = g.state_dim();
  m["embodiments"] = kEmbodiments;
  nn::write_manifest(path, m);
}

Generalist load_generalist(const std::filesystem::path& path) {
  const auto m = nn::read_manifest(path);
  if (m.value("kind", "") != "dist/v1") throw DependencyError(path.string() + " is not a generalist checkpoint");
  Generalist g(m.at("state_dim").get<int>());
  nn::load_checkpoint(path, g.parameters());
  return g;
}

}  // namespace compass::distill
