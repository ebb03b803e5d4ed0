#include "compass/bench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/common/parallel.hpp"

namespace compass::bench {

namespace {

class ZeroController final : public Controller {
 public:
  void reset(const std::shared_ptr<const sim::Map>&, const sim::SimState&) override {}
  sim::Action act(const sim::SimState&, const std::array<double, sim::kObsDim>&) override { return {}; }
};

class TeacherController final : public Controller {
 public:
  TeacherController(sim::EmbodimentProfile profile, teacher::PursuitConfig cfg)
      : profile_(std::move(profile)), cfg_(cfg) {}

  void reset(const std::shared_ptr<const sim::Map>& map, const sim::SimState& state) override {
    teacher_ = std::make_unique<teacher::Teacher>(map, profile_, cfg_);
    teacher_->reset(state);
  }
  sim::Action act(const sim::SimState& state, const std::array<double, sim::kObsDim>&) override {
    return teacher_->act(state);
  }

 private:
  sim::EmbodimentProfile profile_;
  teacher::PursuitConfig cfg_;
  std::unique_ptr<teacher::Teacher> teacher_;
};

/// Shared pipeline loop; `decide` maps the pipeline state, policy state and observation to a command.
template <typename Decide>
class PipelineController final : public Controller {
 public:
  PipelineController(const policy::Pipeline& pipe, Decide decide) : pipe_(pipe), decide_(std::move(decide)) {}

  void reset(const std::shared_ptr<const sim::Map>&, const sim::SimState&) override { ps_ = pipe_.start(); }
  sim::Action act(const sim::SimState&, const std::array<double, sim::kObsDim>& obs) override {
    const nn::Matrix p = pipe_.observe(ps_, obs);
    const sim::Action a = decide_(ps_, p, obs);
    ps_.prev_action = a;
    return a;
  }

 private:
  const policy::Pipeline& pipe_;
  Decide decide_;
  policy::PipelineState ps_;
};

template <typename Decide>
ControllerFactory pipeline_factory(const policy::Pipeline& pipe, Decide decide) {
  return [&pipe, decide] { return std::make_unique<PipelineController<Decide>>(pipe, decide); };
}

Cause cause_of(sim::Termination t) {
  switch (t) {
    case sim::Termination::Reached: return Cause::Reached;
    case sim::Termination::Collided: return Cause::Collided;
    case sim::Termination::Fell: return Cause::Fell;
    default: return Cause::Timeout;
  }
}

constexpr int kMapAttempts = 16;

double round_to(double x, double scale) { return std::round(x * scale) / scale; }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s == "n/a" || s.empty()) return std::nullopt;
  return std::stod(s);
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : "n/a"; }

}  // namespace

ControllerFactory zero_controller() {
  return [] { return std::make_unique<ZeroController>(); };
}

ControllerFactory teacher_controller(const sim::EmbodimentProfile& profile, teacher::PursuitConfig cfg) {
  return [profile, cfg] { return std::make_unique<TeacherController>(profile, cfg); };
}

ControllerFactory base_controller(const policy::Pipeline& pipe, const sim::EmbodimentProfile& profile) {
  return pipeline_factory(pipe, [&pipe, profile](const policy::PipelineState&, const nn::Matrix& p,
                                                 const std::array<double, sim::kObsDim>&) {
    const sim::Action a = policy::to_action(pipe.base_action(p));
    return sim::Action{profile.clamp_v(a.v), profile.clamp_w(a.w)};
  });
}

ControllerFactory specialist_controller(const policy::Pipeline& pipe, const rl::Specialist& spec,
                                        const sim::EmbodimentProfile& profile) {
  return pipeline_factory(pipe, [&pipe, &spec, profile](const policy::PipelineState& ps, const nn::Matrix& p,
                                                        const std::array<double, sim::kObsDim>& obs) {
    return rl::specialist_action(spec, pipe, ps.latent, p, policy::goal_row(obs), profile);
  });
}

ControllerFactory generalist_controller(const policy::Pipeline& pipe, const distill::Generalist& gen,
                                        const sim::EmbodimentProfile& profile, int embodiment_index) {
  return pipeline_factory(pipe, [&gen, profile, embodiment_index](const policy::PipelineState&, const nn::Matrix& p,
                                                                  const std::array<double, sim::kObsDim>&) {
    const sim::Action a = gen.action(p, embodiment_index);
    return sim::Action{profile.clamp_v(a.v), profile.clamp_w(a.w)};
  });
}

std::string to_string(Cause c) {
  switch (c) {
    case Cause::Reached: return "reached";
    case Cause::Collided: return "collided";
    case Cause::Fell: return "fell";
    case Cause::Timeout: return "timeout";
    case Cause::Error: return "error";
  }
  return "error";
}

TrialResult run_episode(Controller& controller, const std::shared_ptr<const sim::Map>& map,
                        const sim::EmbodimentProfile& profile, sim::SimState state, bool record_path) {
  TrialResult r;
  if (record_path) r.path.push_back({state.pose.x, state.pose.y});
  try {
    controller.reset(map, state);
    while (state.alive) {
      const auto obs = sim::observe(*map, state, profile).flat();
      const sim::Action a = controller.act(state, obs);
      const auto out = sim::step(state, a, profile, *map);
      r.path_length += std::hypot(out.state.pose.x - state.pose.x, out.state.pose.y - state.pose.y);
      state = out.state;
      if (record_path) r.path.push_back({state.pose.x, state.pose.y});
      if (!state.alive) r.cause = cause_of(out.result.termination);
    }
  } catch (const std::exception& e) {
    r.cause = Cause::Error;
    r.error = e.what();
  }
  r.success = r.cause == Cause::Reached;
  r.travel_time = state.steps * sim::kDt;
  return r;
}

std::uint64_t trial_seed(std::uint64_t master, int index) {
  return Rng({master, static_cast<std::uint64_t>(index), fnv1a("bench-trial")}).next_u64();
}

std::vector<TrialResult> run_trials(const ControllerFactory& factory, const sim::EmbodimentProfile& profile, int tier,
                                    const TrialConfig& cfg, std::uint64_t master_seed) {
  if (cfg.trials < 1) throw InvalidArgument("run_trials: need at least one trial");
  std::vector<TrialResult> results(static_cast<std::size_t>(cfg.trials));
  parallel_for(results.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = trial_seed(master_seed, static_cast<int>(i));
    TrialResult r;
    for (int attempt = 0;; ++attempt) {
      try {
        const auto map = std::make_shared<const sim::Map>(
            sim::generate_map(tier, Rng({seed, static_cast<std::uint64_t>(attempt), fnv1a("bench-map")}).next_u64()));
        Rng rr({seed, fnv1a("bench-reset")});
        const sim::SimState st = sim::reset(*map, profile, rr, cfg.reset);
        auto controller = factory();
        r = run_episode(*controller, map, profile, st, cfg.record_paths);
        break;
      } catch (const GenerationError&) {
        if (attempt + 1 >= kMapAttempts) throw;
      }
    }
    r.seed = seed;
    results[i] = std::move(r);
  });
  return results;
}

sim::Map overhang_case_map() {
  sim::Map m = sim::empty_map();
  m.tier = 0;
  m.obstacles.push_back({10.0, 10.0, 2.5, 0.4, sim::kOverhangClearance});
  return m;
}

std::vector<sim::SimState> overhang_case_pairs(int n) {
  std::vector<sim::SimState> out;
  for (int i = 0; i < n; ++i) {
    const double x = n == 1 ? 10.0 : 8.5 + 3.0 * i / (n - 1);
    const bool up = i % 2 == 0;
    sim::SimState s;
    s.pose = {x, up ? 7.5 : 12.5, up ? std::numbers::pi / 2 : -std::numbers::pi / 2};
    s.goal_x = x;
    s.goal_y = up ? 12.5 : 7.5;
    out.push_back(s);
  }
  return out;
}

bool crosses_footprint(const std::vector<std::array<double, 2>>& path, const sim::Obstacle& o) {
  return std::any_of(path.begin(), path.end(), [&](const auto& p) { return sim::distance_to_box(o, p[0], p[1]) == 0.0; });
}

std::string to_string(WttMode m) { return m == WttMode::Total ? "total" : "mean"; }

WttMode wtt_mode_from_string(const std::string& s) {
  if (s == "total") return WttMode::Total;
  if (s == "mean") return WttMode::Mean;
  throw ConfigError("unknown wtt mode '" + s + "' (expected total or mean)");
}

Metrics compute_metrics(const std::vector<TrialResult>& trials, WttMode mode) {
  if (trials.empty()) throw InvalidArgument("compute_metrics: empty trial list");
  int successes = 0;
  double total = 0.0;
  for (const auto& t : trials) {
    if (!t.success) continue;
    ++successes;
    total += t.travel_time;
  }
  Metrics m;
  m.sr = successes / static_cast<double>(trials.size());
  if (successes > 0) m.wtt = (mode == WttMode::Total ? total : total / successes) / m.sr;
  return m;
}

ReportRow make_row(const std::string& embodiment, const std::string& model, int tier,
                   const std::vector<TrialResult>& trials, WttMode mode) {
  const Metrics m = compute_metrics(trials, mode);
  ReportRow row;
  row.embodiment = embodiment;
  row.model = model;
  row.tier = tier;
  row.trials = static_cast<int>(trials.size());
  row.sr_pct = round_to(100.0 * m.sr, 100.0);
  if (m.wtt) row.wtt_s = round_to(*m.wtt, 1000.0);
  double total = 0.0;
  for (const auto& t : trials) {
    ++row.counts[static_cast<std::size_t>(t.cause)];
    if (t.success) total += t.travel_time;
  }
  const int reached = row.counts[static_cast<std::size_t>(Cause::Reached)];
  if (reached > 0) row.mean_success_time_s = round_to(total / reached, 1000.0);
  return row;
}

std::string format_csv(const std::vector<ReportRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{:.2f},{}", r.embodiment, r.model, r.tier, r.trials, r.sr_pct,
                       fmt_optional(r.wtt_s));
    for (int c : r.counts) out += fmt::format(",{}", c);
    out += "," + fmt_optional(r.mean_success_time_s) + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InvalidArgument("report csv: unexpected header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 12) throw InvalidArgument("report csv: expected 12 columns in '" + line + "'");
    ReportRow r;
    try {
      r.embodiment = cells[0];
      r.model = cells[1];
      r.tier = std::stoi(cells[2]);
      r.trials = std::stoi(cells[3]);
      r.sr_pct = std::stod(cells[4]);
      r.wtt_s = parse_optional(cells[5]);
      for (std::size_t c = 0; c < kCauseCount; ++c) r.counts[c] = std::stoi(cells[6 + c]);
      r.mean_success_time_s = parse_optional(cells[11]);
    } catch (const std::logic_error&) {
      throw InvalidArgument("report csv: malformed row '" + line + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_markdown(const std::vector<ReportRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows) {
    if (!groups.contains(r.embodiment)) order.push_back(r.embodiment);
    groups[r.embodiment].push_back(&r);
  }
  std::string out;
  for (const auto& e : order) {
    if (!out.empty()) out += "\n";
    out += "### " + e + "\n\n";
    out += "| model | tier | trials | SR % | WTT s | reached | collided | fell | timeout | error | mean success s |\n";
    out += "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const ReportRow* r : groups[e]) {
      out += fmt::format("| {} | {} | {} | {:.2f} | {} |", r->model, r->tier, r->trials, r->sr_pct,
                         fmt_optional(r->wtt_s));
      for (int c : r->counts) out += fmt::format(" {} |", c);
      out += " " + fmt_optional(r->mean_success_time_s) + " |\n";
    }
  }
  return out;
}

void emit_report(const std::filesystem::path& stem, const std::vector<ReportRow>& rows) {
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write report " + path.string());
    f << text;
    if (!f) throw IoError("failed writing report " + path.string());
  };
  write(std::filesystem::path(stem).concat(".csv"), format_csv(rows));
  write(std::filesystem::path(stem).concat(".md"), format_markdown(rows));
}

}  // namespace compass::bench
