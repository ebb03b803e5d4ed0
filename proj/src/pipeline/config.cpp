#include "compass/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "compass/common/errors.hpp"

namespace compass::pipeline {

using nlohmann::json;

namespace {

/// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + where_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check_tiers(const std::vector<int>& tiers, const std::string& where) {
  if (tiers.empty()) throw ConfigError(where + " must not be empty");
  for (int t : tiers)
    if (t < 1 || t > 4) throw ConfigError(where + " entries must be in 1..4");
}

}  // namespace

void PipelineConfig::validate() const {
  if (out.empty()) throw ConfigError("out must not be empty");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(sim.min_goal_distance > 0.0 && sim.max_goal_distance >= sim.min_goal_distance))
    throw ConfigError("sim goal distance range is invalid");
  if (static_cast<int>(profiles.size()) != distill::kEmbodiments)
    throw ConfigError("profiles must list exactly " + std::to_string(distill::kEmbodiments) + " embodiments");
  for (const auto& p : profiles) {
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("profiles: ") + e.what());
    }
  }
  profile("wheeled");
  if (teacher.episodes < 1) throw ConfigError("teacher.episodes must be >= 1");
  check_tiers(teacher.tiers, "teacher.tiers");
  if (!(teacher.min_teacher_sr >= 0.0 && teacher.min_teacher_sr <= 1.0))
    throw ConfigError("teacher.min_teacher_sr must be in [0, 1]");
  if (!(teacher.noise_v >= 0.0 && teacher.noise_w >= 0.0 && teacher.noise_radius >= 0.0))
    throw ConfigError("teacher noise settings must be >= 0");
  const auto& pc = teacher.pursuit;
  if (!(pc.lookahead > 0.0 && pc.gain > 0.0 && pc.margin >= 0.0)) throw ConfigError("teacher pursuit settings invalid");
  if (!(pc.stop_radius > pc.stop_floor && pc.stop_floor >= 0.0))
    throw ConfigError("teacher.stop_radius must exceed teacher.stop_floor >= 0");
  if (wm.epochs < 1 || wm.truncation < 1 || wm.batch < 1 || !(wm.lr > 0.0) || !(wm.grad_clip > 0.0))
    throw ConfigError("wm settings must be positive");
  if (il.epochs < 1 || il.batch < 1 || !(il.lr > 0.0)) throw ConfigError("il settings must be positive");
  ppo_for("wheeled").validate();
  for (const auto& [name, budget] : budget_overrides) {
    profile(name);
    if (budget < 1) throw ConfigError("ppo.budget_overrides." + name + " must be >= 1");
  }
  if (distill.record.trajectories < 1 || distill.record.length < 1)
    throw ConfigError("distill record sizes must be >= 1");
  check_tiers(distill.record.tiers, "distill.record_tiers");
  if (distill.train.epochs < 1 || distill.train.batch < distill::kEmbodiments || !(distill.train.lr > 0.0))
    throw ConfigError("distill training settings invalid");
  if (!(distill.train.holdout >= 0.0 && distill.train.holdout < 1.0))
    throw ConfigError("distill.holdout must be in [0, 1)");
  if (bench.trials < 1) throw ConfigError("bench.trials must be >= 1");
  check_tiers(bench.tiers, "bench.tiers");
}

const sim::EmbodimentProfile& PipelineConfig::profile(const std::string& name) const {
  return sim::find_profile(profiles, name);
}

int PipelineConfig::embodiment_index(const std::string& name) const { return profile(name).id; }

rl::PpoConfig PipelineConfig::ppo_for(const std::string& embodiment) const {
  rl::PpoConfig c = ppo;
  c.min_goal_distance = sim.min_goal_distance;
  c.max_goal_distance = sim.max_goal_distance;
  c.threads = threads;
  if (auto it = budget_overrides.find(embodiment); it != budget_overrides.end()) c.budget_episodes = it->second;
  return c;
}

teacher::DemoConfig PipelineConfig::demos() const {
  teacher::DemoConfig d = teacher;
  d.min_goal_distance = sim.min_goal_distance;
  d.max_goal_distance = sim.max_goal_distance;
  return d;
}

json to_json(const PipelineConfig& c) {
  const auto& t = c.teacher;
  const auto& p = c.ppo;
  const auto& d = c.distill;
  return {
      {"seed", c.seed},
      {"out", c.out.string()},
      {"threads", c.threads},
      {"sim", {{"min_goal_distance", c.sim.min_goal_distance}, {"max_goal_distance", c.sim.max_goal_distance}}},
      {"profiles", sim::profiles_to_json(c.profiles)},
      {"teacher",
       {{"episodes", t.episodes},
        {"tiers", t.tiers},
        {"min_teacher_sr", t.min_teacher_sr},
        {"noise_v", t.noise_v},
        {"noise_w", t.noise_w},
        {"noise_radius", t.noise_radius},
        {"lookahead", t.pursuit.lookahead},
        {"gain", t.pursuit.gain},
        {"stop_radius", t.pursuit.stop_radius},
        {"stop_floor", t.pursuit.stop_floor},
        {"margin", t.pursuit.margin}}},
      {"wm",
       {{"epochs", c.wm.epochs},
        {"truncation", c.wm.truncation},
        {"batch", c.wm.batch},
        {"lr", c.wm.lr},
        {"grad_clip", c.wm.grad_clip}}},
      {"il",
       {{"epochs", c.il.epochs}, {"lr", c.il.lr}, {"batch", c.il.batch}, {"successful_only", c.il.successful_only}}},
      {"ppo",
       {{"gamma", p.gamma},
        {"lambda", p.lambda},
        {"clip", p.clip},
        {"lr", p.lr},
        {"lr_anneal", p.lr_anneal},
        {"epochs", p.epochs},
        {"minibatch", p.minibatch},
        {"horizon", p.horizon},
        {"envs", p.envs},
        {"entropy_coef", p.entropy_coef},
        {"value_coef", p.value_coef},
        {"grad_clip", p.grad_clip},
        {"budget_episodes", p.budget_episodes},
        {"budget_overrides", c.budget_overrides},
        {"tiers", p.tiers},
        {"curriculum", p.curriculum},
        {"curriculum_floor", p.curriculum_floor},
        {"critic", rl::to_string(p.critic)},
        {"init_log_std", p.init_log_std},
        {"eval_every", p.eval_every},
        {"eval_episodes", p.eval_episodes},
        {"eval_tier", p.eval_tier}}},
      {"distill",
       {{"record_trajectories", d.record.trajectories},
        {"record_length", d.record.length},
        {"record_tiers", d.record.tiers},
        {"epochs", d.train.epochs},
        {"lr", d.train.lr},
        {"batch", d.train.batch},
        {"loss", distill::to_string(d.train.mode)},
        {"filter_failures", d.train.filter_failures},
        {"holdout", d.train.holdout}}},
      {"bench", {{"trials", c.bench.trials}, {"tiers", c.bench.tiers}, {"wtt", bench::to_string(c.bench.wtt)}}},
  };
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  {
    Section root(j, "config");
    root.get("seed", c.seed);
    std::string out = c.out.string();
    root.get("out", out);
    c.out = out;
    root.get("threads", c.threads);
    if (const json* s = root.sub("sim")) {
      Section sec(*s, "sim");
      sec.get("min_goal_distance", c.sim.min_goal_distance);
      sec.get("max_goal_distance", c.sim.max_goal_distance);
    }
    if (const json* s = root.sub("profiles")) {
      try {
        c.profiles = sim::profiles_from_json(*s);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("profiles: ") + e.what());
      }
    }
    if (const json* s = root.sub("teacher")) {
      Section sec(*s, "teacher");
      auto& t = c.teacher;
      sec.get("episodes", t.episodes);
      sec.get("tiers", t.tiers);
      sec.get("min_teacher_sr", t.min_teacher_sr);
      sec.get("noise_v", t.noise_v);
      sec.get("noise_w", t.noise_w);
      sec.get("noise_radius", t.noise_radius);
      sec.get("lookahead", t.pursuit.lookahead);
      sec.get("gain", t.pursuit.gain);
      sec.get("stop_radius", t.pursuit.stop_radius);
      sec.get("stop_floor", t.pursuit.stop_floor);
      sec.get("margin", t.pursuit.margin);
    }
    if (const json* s = root.sub("wm")) {
      Section sec(*s, "wm");
      sec.get("epochs", c.wm.epochs);
      sec.get("truncation", c.wm.truncation);
      sec.get("batch", c.wm.batch);
      sec.get("lr", c.wm.lr);
      sec.get("grad_clip", c.wm.grad_clip);
    }
    if (const json* s = root.sub("il")) {
      Section sec(*s, "il");
      sec.get("epochs", c.il.epochs);
      sec.get("lr", c.il.lr);
      sec.get("batch", c.il.batch);
      sec.get("successful_only", c.il.successful_only);
    }
    if (const json* s = root.sub("ppo")) {
      Section sec(*s, "ppo");
      auto& p = c.ppo;
      sec.get("gamma", p.gamma);
      sec.get("lambda", p.lambda);
      sec.get("clip", p.clip);
      sec.get("lr", p.lr);
      sec.get("lr_anneal", p.lr_anneal);
      sec.get("epochs", p.epochs);
      sec.get("minibatch", p.minibatch);
      sec.get("horizon", p.horizon);
      sec.get("envs", p.envs);
      sec.get("entropy_coef", p.entropy_coef);
      sec.get("value_coef", p.value_coef);
      sec.get("grad_clip", p.grad_clip);
      sec.get("budget_episodes", p.budget_episodes);
      sec.get("budget_overrides", c.budget_overrides);
      sec.get("tiers", p.tiers);
      sec.get("curriculum", p.curriculum);
      sec.get("curriculum_floor", p.curriculum_floor);
      std::string critic = rl::to_string(p.critic);
      sec.get("critic", critic);
      p.critic = rl::critic_input_from_string(critic);
      sec.get("init_log_std", p.init_log_std);
      sec.get("eval_every", p.eval_every);
      sec.get("eval_episodes", p.eval_episodes);
      sec.get("eval_tier", p.eval_tier);
    }
    if (const json* s = root.sub("distill")) {
      Section sec(*s, "distill");
      auto& d = c.distill;
      sec.get("record_trajectories", d.record.trajectories);
      sec.get("record_length", d.record.length);
      sec.get("record_tiers", d.record.tiers);
      sec.get("epochs", d.train.epochs);
      sec.get("lr", d.train.lr);
      sec.get("batch", d.train.batch);
      std::string loss = distill::to_string(d.train.mode);
      sec.get("loss", loss);
      d.train.mode = distill::loss_mode_from_string(loss);
      sec.get("filter_failures", d.train.filter_failures);
      sec.get("holdout", d.train.holdout);
    }
    if (const json* s = root.sub("bench")) {
      Section sec(*s, "bench");
      sec.get("trials", c.bench.trials);
      sec.get("tiers", c.bench.tiers);
      std::string wtt = bench::to_string(c.bench.wtt);
      sec.get("wtt", wtt);
      c.bench.wtt = bench::wtt_mode_from_string(wtt);
    }
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace compass::pipeline
