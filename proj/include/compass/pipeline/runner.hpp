#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "compass/pipeline/config.hpp"

namespace compass::pipeline {

/// Seed of one stage, derived from the master seed and a stage name.
std::uint64_t stage_seed(std::uint64_t master, const std::string& stage);

/// Suffix identifying specialist ablations, e.g. "+curriculum+critic_obs".
std::string specialist_tag(const rl::PpoConfig& ppo, bool scratch);
/// Suffix for a generalist: the specialist tag plus "+mse" and "+filter".
std::string generalist_tag(const PipelineConfig& cfg);

struct IndexEntry {
  std::string stage;
  std::string checkpoint;
  std::string config_hash;
  std::uint64_t seed = 0;
  /// Wall-clock time of the run that produced the checkpoint.
  double seconds = 0.0;
};

/// Stage orchestration over one output directory. Every stage reads its
/// inputs from disk and throws DependencyError when one is missing.
class Runner {
 public:
  explicit Runner(PipelineConfig cfg, std::ostream* log = nullptr);

  const PipelineConfig& config() const { return cfg_; }

  /// With `resume`, a stage whose index entry, config hash and checkpoint all
  /// match is skipped.
  void demo_gen(bool resume = false);
  void train_wm(bool resume = false);
  void train_il(bool resume = false);
  void train_specialist(const std::string& embodiment, bool scratch = false, bool resume = false);
  void record(const std::string& embodiment, bool resume = false);
  void distill(bool resume = false);

  /// Model: base, specialist, generalist or teacher. Rows are merged into
  /// `<out>/report.{csv,md}`, replacing rows with the same key.
  std::vector<bench::ReportRow> bench(const std::string& model, const std::vector<std::string>& embodiments,
                                      const std::vector<int>& tiers, bool scratch = false);
  /// Every stage in order, resumable, then a fresh report for base,
  /// specialist and generalist over all embodiments and bench tiers.
  std::vector<bench::ReportRow> all();

  std::filesystem::path demos_path() const;
  std::filesystem::path wm_path() const;
  std::filesystem::path il_path() const;
  std::filesystem::path specialist_path(const std::string& embodiment, bool scratch = false) const;
  std::filesystem::path curve_path(const std::string& embodiment, bool scratch = false) const;
  std::filesystem::path dataset_path(const std::string& embodiment) const;
  std::filesystem::path generalist_path() const;
  std::filesystem::path report_stem() const;
  std::filesystem::path index_path() const;

  std::vector<IndexEntry> index() const;
  std::vector<std::string> embodiments() const;

 private:
  std::string demos_hash() const;
  std::string wm_hash() const;
  std::string il_hash() const;
  std::string specialist_hash(const std::string& embodiment, bool scratch) const;
  std::string record_hash(const std::string& embodiment) const;
  std::string distill_hash() const;

  bool up_to_date(const std::string& stage, const std::string& hash, const std::filesystem::path& ckpt) const;
  using Clock = std::chrono::steady_clock;
  void note(const std::string& stage, const std::filesystem::path& ckpt, const std::string& hash, std::uint64_t seed,
            Clock::time_point started);
  void say(const std::string& line) const;

  PipelineConfig cfg_;
  std::ostream* log_;
};

}  // namespace compass::pipeline
