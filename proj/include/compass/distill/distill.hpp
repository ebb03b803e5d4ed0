#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "compass/rl/ppo.hpp"

namespace compass::distill {

using nn::Matrix;
using nn::Tape;
using nn::Var;

inline constexpr int kEmbodiments = 4;

struct DistillRecord {
  std::vector<double> p;  // policy state, 128 values
  int e = 0;
  std::array<double, 2> mu{};
  std::array<double, 2> var{};
  /// Goal features (distance / 10, sin, cos) at the recorded step.
  std::array<double, 3> goal{};
  sim::Termination outcome = sim::Termination::None;
  int ep = 0;
  int t = 0;
};

struct DistillDataset {
  std::string embodiment;
  int e = 0;
  std::vector<DistillRecord> records;
};

struct RecordConfig {
  int trajectories = 80;
  int length = 128;
  std::vector<int> tiers{1, 2, 3, 4};
  std::size_t threads = 1;
};

/// Mean-action rollouts of a specialist. Each record stores the specialist's
/// unclamped mean (base + residual) and its variance; the executed action is
/// the clamped composition. Episodes cut at `length` steps keep outcome "none".
DistillDataset record_specialist(const rl::Specialist& spec, const policy::Pipeline& pipe,
                                 const sim::EmbodimentProfile& profile, int embodiment_index, const RecordConfig& cfg,
                                 std::uint64_t seed);

/// JSON-lines, one record per line: {"p","e","mu","var","g","outcome","ep","t"}.
void write_dataset(const std::filesystem::path& path, const DistillDataset& ds);
/// Throws DependencyError if missing, InvalidArgument on malformed records.
DistillDataset read_dataset(const std::filesystem::path& path);

/// mu_theta([p; onehot(e)]) with one global log-variance per action dimension.
class Generalist {
 public:
  explicit Generalist(int state_dim = 128);
  void init(Rng& rng);
  int state_dim() const { return state_dim_; }
  /// Throws InvalidArgument on an index outside [0, kEmbodiments).
  Matrix input(const Matrix& p, const std::vector<int>& embodiments) const;
  Matrix mean(const Matrix& p, const std::vector<int>& embodiments) const;
  Var mean(Tape& tape, const Matrix& p, const std::vector<int>& embodiments);
  sim::Action action(const Matrix& p, int embodiment) const;
  nn::Parameter& log_var() { return log_var_; }
  const nn::Parameter& log_var() const { return log_var_; }
  nn::ParameterRefs parameters();

 private:
  int state_dim_;
  nn::Mlp net_;
  nn::Parameter log_var_;
};

enum class LossMode { Kl, Mse };
std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

/// kl: mean over rows of KL(N(mu, var) || N(student mean, exp(log_var))).
/// mse: mean squared error of the means. Throws InvalidArgument on an empty
/// batch or a non-positive teacher variance.
Var distill_loss(Tape& tape, Generalist& g, const std::vector<const DistillRecord*>& batch, LossMode mode);

/// Splits `batch` across `groups` embodiments: sizes differ by at most one.
std::vector<int> balanced_counts(int batch, int groups);

struct DistillConfig {
  int epochs = 20;
  double lr = 1e-3;
  int batch = 512;
  LossMode mode = LossMode::Kl;
  bool filter_failures = false;
  double holdout = 0.1;
};

struct DistillLog {
  std::vector<double> epoch_loss;
  /// Per dataset, in input order: held-out mean MSE against the specialist means.
  std::vector<double> heldout_mse;
  std::vector<std::size_t> train_records;
  /// Embodiment counts of every batch drawn, in order; kept for balance checks.
  std::vector<std::vector<int>> batch_composition;
};

/// Held-out split is by episode. The global log-variance starts at the log of
/// the mean teacher variance over the training records. Each epoch walks ceil(total train records / batch)
/// batches; every batch draws balanced_counts() records per dataset, each
/// dataset cycling through its own reshuffled order.
DistillLog train_distilled(Generalist& g, const std::vector<DistillDataset>& datasets, const DistillConfig& cfg,
                           std::uint64_t seed);

void save_generalist(const std::filesystem::path& path, Generalist& g, std::uint64_t seed,
                     const nlohmann::json& extra = {});
Generalist load_generalist(const std::filesystem::path& path);

}  // namespace compass::distill
