#include <gtest/gtest.h>

#include <cmath>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/nn/checkpoint.hpp"
#include "compass/policy/base_policy.hpp"
#include "gradcheck.hpp"

using namespace compass;
using namespace compass::policy;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

BasePolicy random_policy(std::uint64_t seed) {
  BasePolicy p;
  Rng rng(seed);
  p.init(rng);
  return p;
}

std::string params_bytes(const nn::ParameterRefs& params) {
  nn::NamedTensors entries;
  for (auto* p : params) entries.emplace_back(p->name, p->to_tensor());
  return nn::encode_checkpoint(entries);
}

const teacher::DemoDataset& small_demos() {
  static const teacher::DemoDataset ds = [] {
    teacher::DemoConfig cfg;
    cfg.episodes = 30;
    cfg.min_teacher_sr = 0.0;
    return teacher::generate_demos(cfg, sim::default_profiles()[0], 4, 1);
  }();
  return ds;
}

}  // namespace

TEST(BasePolicy, PolicyStateRepeatableAndZeroFusion) {
  const BasePolicy p = random_policy(1);
  Rng rng(2);
  const Matrix s = random_matrix(rng, 3, 64);
  const Matrix g = random_matrix(rng, 3, 3);
  const Matrix a = p.policy_state(s, g);
  EXPECT_EQ(a.cols(), 128);
  EXPECT_TRUE((a.array() == p.policy_state(s, g).array()).all());
  BasePolicy zero;
  EXPECT_TRUE((zero.policy_state(s, g).array() == 0.0).all());
}

TEST(BasePolicy, GoalBearingChangesPolicyState) {
  const BasePolicy p = random_policy(3);
  Rng rng(4);
  const Matrix s = random_matrix(rng, 1, 64);
  const Matrix g1 = goal_row(sim::GoalFeatures{0.3, 0.0, 1.0});
  const Matrix g2 = goal_row(sim::GoalFeatures{0.3, std::sin(0.5), std::cos(0.5)});
  EXPECT_GT((p.policy_state(s, g1) - p.policy_state(s, g2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(BasePolicy, HeadMatchesHandComputation) {
  BasePolicy zero;
  Rng rng(5);
  const Matrix pstate = random_matrix(rng, 1, 128);
  EXPECT_TRUE((zero.action(pstate).array() == 0.0).all());

  BasePolicy p = random_policy(6);
  for (std::size_t l = 0; l < 2; ++l) p.head().bias(l).value = random_matrix(rng, 1, p.head().bias(l).value.cols(), 0.3);
  const auto& w0 = p.head().weight(0).value;
  const auto& b0 = p.head().bias(0).value;
  const auto& w1 = p.head().weight(1).value;
  const auto& b1 = p.head().bias(1).value;
  double out[2] = {b1(0, 0), b1(0, 1)};
  for (int j = 0; j < 64; ++j) {
    double acc = b0(0, j);
    for (int i = 0; i < 128; ++i) acc += pstate(0, i) * w0(i, j);
    const double h = std::tanh(acc);
    out[0] += h * w1(j, 0);
    out[1] += h * w1(j, 1);
  }
  const Matrix a = p.action(pstate);
  EXPECT_NEAR(a(0, 0), out[0], 1e-12);
  EXPECT_NEAR(a(0, 1), out[1], 1e-12);
  EXPECT_TRUE((a.array() == p.action(pstate).array()).all());
}

TEST(BasePolicy, ImitationLossGradientMatchesFiniteDifferences) {
  BasePolicy p = random_policy(7);
  Rng rng(8);
  const Matrix s = random_matrix(rng, 6, 64);
  const Matrix g = random_matrix(rng, 6, 3);
  const Matrix y = random_matrix(rng, 6, 2);
  auto res = test_support::check_gradients(p.parameters(), [&](Tape& t) {
    const Var a = p.action(t, p.policy_state(t, t.constant(s), t.constant(g)));
    return t.mean(t.square(t.sub(a, t.constant(y))));
  });
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
}

TEST(BasePolicy, TrainingIsDeterministicAndLeavesWorldModelUntouched) {
  wm::WorldModel model;
  Rng rng(9);
  model.init(rng);
  const std::string before = params_bytes(model.parameters());
  IlTrainConfig cfg;
  cfg.epochs = 3;
  BasePolicy a, b;
  const auto la = train_il(a, model, small_demos(), cfg, 21);
  const auto lb = train_il(b, model, small_demos(), cfg, 21);
  EXPECT_EQ(params_bytes(model.parameters()), before);
  EXPECT_EQ(la.epoch_loss, lb.epoch_loss);
  EXPECT_EQ(la.final_mse, lb.final_mse);
  EXPECT_LT(la.epoch_loss.back(), la.epoch_loss.front());
  EXPECT_EQ(params_bytes(a.parameters()), params_bytes(b.parameters()));
}

TEST(BasePolicy, SuccessfulOnlyFiltersEpisodes) {
  wm::WorldModel model;
  IlTrainConfig cfg;
  cfg.epochs = 1;
  BasePolicy p;
  std::size_t reached = 0;
  for (const auto& e : small_demos().episodes)
    if (e.outcome == sim::Termination::Reached) reached += static_cast<std::size_t>(e.length);
  EXPECT_EQ(train_il(p, model, small_demos(), cfg, 1).samples, reached);
  cfg.successful_only = false;
  EXPECT_EQ(train_il(p, model, small_demos(), cfg, 1).samples, small_demos().frames.size());
}

TEST(BasePolicy, CheckpointRoundTripAndMissingDependency) {
  BasePolicy p = random_policy(10);
  const auto path = std::filesystem::temp_directory_path() / "compass_il_test" / "il.cpnn";
  save_il(path, p, 10);
  BasePolicy back = load_il(path);
  nn::round_to_f32(p.parameters());
  EXPECT_EQ(params_bytes(p.parameters()), params_bytes(back.parameters()));
  EXPECT_THROW(load_il("/nonexistent/il.cpnn"), DependencyError);
  EXPECT_THROW(wm::load_wm(path), DependencyError);
}

TEST(Pipeline, ZeroActionStartAndLatentAdvance) {
  wm::WorldModel model;
  Rng rng(11);
  model.init(rng);
  const BasePolicy base = random_policy(12);
  const Pipeline pipe(&model, &base);
  auto st = pipe.start();
  EXPECT_EQ(st.prev_action, (sim::Action{0.0, 0.0}));
  std::array<double, sim::kObsDim> obs{};
  obs.fill(0.5);
  const Matrix p = pipe.observe(st, obs);
  EXPECT_EQ(p.cols(), 128);
  const Matrix expected = model.step(model.initial_state(), Matrix::Zero(1, 2), obs_row(obs));
  EXPECT_TRUE((st.latent.array() == expected.array()).all());
}
