#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compass/distill/distill.hpp"
#include "compass/teacher/pursuit.hpp"

namespace compass::bench {

/// A closed-loop policy. reset() is called once per trial before the first act().
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const std::shared_ptr<const sim::Map>& map, const sim::SimState& state) = 0;
  virtual sim::Action act(const sim::SimState& state, const std::array<double, sim::kObsDim>& obs) = 0;
};

/// One controller per trial; called concurrently from trial workers.
using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

ControllerFactory zero_controller();
ControllerFactory teacher_controller(const sim::EmbodimentProfile& profile, teacher::PursuitConfig cfg = {});
ControllerFactory base_controller(const policy::Pipeline& pipe, const sim::EmbodimentProfile& profile);
ControllerFactory specialist_controller(const policy::Pipeline& pipe, const rl::Specialist& spec,
                                        const sim::EmbodimentProfile& profile);
ControllerFactory generalist_controller(const policy::Pipeline& pipe, const distill::Generalist& gen,
                                        const sim::EmbodimentProfile& profile, int embodiment_index);

enum class Cause { Reached, Collided, Fell, Timeout, Error };
inline constexpr std::size_t kCauseCount = 5;
std::string to_string(Cause c);

struct TrialResult {
  std::uint64_t seed = 0;
  bool success = false;
  double travel_time = 0.0;
  Cause cause = Cause::Timeout;
  double path_length = 0.0;
  std::string error;
  /// Robot positions including the start; filled only when requested.
  std::vector<std::array<double, 2>> path;
};

/// Runs one episode to termination. Controller exceptions become Cause::Error.
TrialResult run_episode(Controller& controller, const std::shared_ptr<const sim::Map>& map,
                        const sim::EmbodimentProfile& profile, sim::SimState state, bool record_path = false);

struct TrialConfig {
  int trials = 100;
  std::size_t threads = 1;
  bool record_paths = false;
  sim::ResetOptions reset;
};

/// Seed of trial i. The map and start/goal of a trial depend only on this seed and the tier.
std::uint64_t trial_seed(std::uint64_t master, int index);

/// Fresh map and reset per trial, parallel across trials, results ordered by index.
std::vector<TrialResult> run_trials(const ControllerFactory& factory, const sim::EmbodimentProfile& profile, int tier,
                                    const TrialConfig& cfg, std::uint64_t master_seed);

/// 20 x 20 m map whose only obstacle is an overhanging shelf centred at (10, 10),
/// 5 m wide along x, with clearance kOverhangClearance.
sim::Map overhang_case_map();
/// `n` start/goal pairs facing each other across the shelf, 5 m apart.
std::vector<sim::SimState> overhang_case_pairs(int n);
/// True when any recorded position lies inside the obstacle footprint.
bool crosses_footprint(const std::vector<std::array<double, 2>>& path, const sim::Obstacle& o);

enum class WttMode { Total, Mean };
std::string to_string(WttMode m);
WttMode wtt_mode_from_string(const std::string& s);

struct Metrics {
  double sr = 0.0;
  /// Empty when no trial succeeded.
  std::optional<double> wtt;
};

/// SR = successes / n. WTT = (total success time, or mean in Mean mode) / SR.
/// Throws InvalidArgument on an empty list.
Metrics compute_metrics(const std::vector<TrialResult>& trials, WttMode mode = WttMode::Total);

struct ReportRow {
  std::string embodiment;
  std::string model;
  int tier = 1;
  int trials = 0;
  double sr_pct = 0.0;
  std::optional<double> wtt_s;
  std::array<int, kCauseCount> counts{};
  std::optional<double> mean_success_time_s;

  bool operator==(const ReportRow&) const = default;
};

/// Percentages are rounded to 0.01 and times to 0.001 so the CSV round trip is exact.
ReportRow make_row(const std::string& embodiment, const std::string& model, int tier,
                   const std::vector<TrialResult>& trials, WttMode mode = WttMode::Total);

inline constexpr const char* kCsvHeader =
    "embodiment,model,tier,trials,sr_pct,wtt_s,reached,collided,fell,timeout,error,mean_success_time_s";

std::string format_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_csv(const std::string& text);
/// One table per embodiment, in order of first appearance.
std::string format_markdown(const std::vector<ReportRow>& rows);
/// Writes `<stem>.csv` and `<stem>.md`. Throws IoError when the files cannot be written.
void emit_report(const std::filesystem::path& stem, const std::vector<ReportRow>& rows);

}  // namespace compass::bench
