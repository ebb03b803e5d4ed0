#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "compass/nn/mlp.hpp"
#include "compass/sim/sim.hpp"
#include "compass/teacher/demos.hpp"

namespace compass::wm {

using nn::Matrix;
using nn::Tape;
using nn::Var;

inline constexpr int kActionDim = 2;

struct WmSpec {
  int obs = sim::kObsDim;
  int encoder_hidden = 128;
  int latent = 64;
  int head_hidden = 128;
};

/// Recurrent latent model. The latent is updated from the encoded current
/// observation and the previous action:
///   s_t = GRU([enc(o_t); a_{t-1}], s_{t-1}),   recon(s_t) ~ o_t,   predict([s_t; a_t]) ~ o_{t+1}.
/// All matrix arguments are batched by rows.
class WorldModel {
 public:
  explicit WorldModel(WmSpec spec = {});

  void init(Rng& rng);
  const WmSpec& spec() const { return spec_; }

  /// Zero latent, one row per batch element.
  Matrix initial_state(Eigen::Index rows = 1) const;

  /// Throws NumericError on non-finite inputs.
  Matrix step(const Matrix& s_prev, const Matrix& a_prev, const Matrix& obs) const;
  Matrix reconstruct(const Matrix& s) const;
  Matrix predict(const Matrix& s, const Matrix& a) const;

  Var step(Tape& tape, Var s_prev, Var a_prev, Var obs);
  Var reconstruct(Tape& tape, Var s);
  Var predict(Tape& tape, Var s, Var a);

  nn::ParameterRefs parameters();

 private:
  WmSpec spec_;
  nn::Mlp encoder_;
  nn::Gru transition_;
  nn::Mlp recon_;
  nn::Mlp predict_;
};

/// Teacher-forced single-sequence loss: sum over t of MSE(recon(s_t), o_t) plus,
/// for t < T-1, MSE(predict(s_t, a_t), o_{t+1}); divided by T. Row t of `obs`
/// and `actions` holds o_t and a_t. Requires T >= 2.
Var sequence_loss(Tape& tape, WorldModel& model, const Matrix& obs, const Matrix& actions);

struct WmTrainConfig {
  int epochs = 50;
  int truncation = 32;
  int batch = 16;
  double lr = 1e-3;
  double grad_clip = 5.0;
};

struct WmTrainLog {
  std::vector<double> epoch_loss;
};

/// Truncated BPTT. Episodes are shuffled per epoch and packed back to back into
/// `batch` lanes; each lane is cut into `truncation`-step windows. The latent
/// is carried (detached) across windows and zeroed at every episode start.
WmTrainLog train_wm(WorldModel& model, const teacher::DemoDataset& demos, const WmTrainConfig& cfg,
                    std::uint64_t seed);

/// Latent after each frame of one episode, teacher-forced with the recorded actions.
Matrix episode_latents(const WorldModel& model, const teacher::DemoDataset& demos, const teacher::DemoEpisode& ep);

struct PredictionScore {
  double model_mse = 0.0;
  double copy_last_mse = 0.0;
  std::size_t pairs = 0;
};
/// One-step prediction error against the copy-last-observation baseline.
PredictionScore prediction_score(const WorldModel& model, const teacher::DemoDataset& demos,
                                 const std::vector<std::size_t>& episode_indices);

void save_wm(const std::filesystem::path& path, WorldModel& model, std::uint64_t seed, const nlohmann::json& extra = {});
/// Throws DependencyError if the checkpoint is missing or of another kind.
WorldModel load_wm(const std::filesystem::path& path);

}  // namespace compass::wm
