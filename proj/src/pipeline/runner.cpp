#include "compass/pipeline/runner.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"

namespace compass::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hash_of(const json& j) { return hex64(fnv1a(j.dump())); }

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw DependencyError("missing " + path.string() + " (run `compass " + producer + "` first)");
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t master, const std::string& stage) {
  return Rng({master, fnv1a(stage)}).next_u64();
}

std::string specialist_tag(const rl::PpoConfig& ppo, bool scratch) {
  std::string tag;
  if (ppo.curriculum) tag += "+curriculum";
  if (ppo.critic == rl::CriticInput::Observation) tag += "+critic_obs";
  if (scratch) tag += "+scratch";
  return tag;
}

std::string generalist_tag(const PipelineConfig& cfg) {
  std::string tag = specialist_tag(cfg.ppo, false);
  if (cfg.distill.train.mode == distill::LossMode::Mse) tag += "+mse";
  if (cfg.distill.train.filter_failures) tag += "+filter";
  return tag;
}

Runner::Runner(PipelineConfig cfg, std::ostream* log) : cfg_(std::move(cfg)), log_(log) {
  cfg_.validate();
  fs::create_directories(cfg_.out);
}

fs::path Runner::demos_path() const { return cfg_.out / "demos" / "wheeled.jsonl"; }
fs::path Runner::wm_path() const { return cfg_.out / "wm.cpnn"; }
fs::path Runner::il_path() const { return cfg_.out / "il.cpnn"; }
fs::path Runner::specialist_path(const std::string& e, bool scratch) const {
  return cfg_.out / "specialists" / (e + specialist_tag(cfg_.ppo, scratch) + ".cpnn");
}
fs::path Runner::curve_path(const std::string& e, bool scratch) const {
  return cfg_.out / "curves" / (e + specialist_tag(cfg_.ppo, scratch) + ".csv");
}
fs::path Runner::dataset_path(const std::string& e) const {
  return cfg_.out / "datasets" / (e + specialist_tag(cfg_.ppo, false) + ".jsonl");
}
fs::path Runner::generalist_path() const { return cfg_.out / ("generalist" + generalist_tag(cfg_) + ".cpnn"); }
fs::path Runner::report_stem() const { return cfg_.out / "report"; }
fs::path Runner::index_path() const { return cfg_.out / "index.json"; }

std::vector<std::string> Runner::embodiments() const {
  std::vector<std::string> names;
  for (const auto& p : cfg_.profiles) names.push_back(p.name);
  return names;
}

std::string Runner::demos_hash() const {
  const json c = to_json(cfg_);
  return hash_of({{"seed", cfg_.seed}, {"sim", c["sim"]}, {"teacher", c["teacher"]},
                  {"profile", sim::profiles_to_json({cfg_.profile("wheeled")})}});
}

std::string Runner::wm_hash() const { return hash_of({{"up", demos_hash()}, {"wm", to_json(cfg_)["wm"]}}); }

std::string Runner::il_hash() const { return hash_of({{"up", wm_hash()}, {"il", to_json(cfg_)["il"]}}); }

std::string Runner::specialist_hash(const std::string& e, bool scratch) const {
  json ppo = to_json(cfg_)["ppo"];
  ppo["budget_episodes"] = cfg_.ppo_for(e).budget_episodes;
  ppo.erase("budget_overrides");
  return hash_of({{"up", scratch ? wm_hash() : il_hash()},
                  {"ppo", ppo},
                  {"scratch", scratch},
                  {"profile", sim::profiles_to_json({cfg_.profile(e)})}});
}

std::string Runner::record_hash(const std::string& e) const {
  const json d = to_json(cfg_)["distill"];
  return hash_of({{"up", specialist_hash(e, false)},
                  {"record", {d["record_trajectories"], d["record_length"], d["record_tiers"]}}});
}

std::string Runner::distill_hash() const {
  json up = json::array();
  for (const auto& e : embodiments()) up.push_back(record_hash(e));
  return hash_of({{"up", up}, {"distill", to_json(cfg_)["distill"]}});
}

std::vector<IndexEntry> Runner::index() const {
  std::vector<IndexEntry> out;
  if (!fs::exists(index_path())) return out;
  try {
    const json j = json::parse(read_file(index_path()));
    for (const auto& e : j.at("stages"))
      out.push_back({e.at("stage"), e.at("checkpoint"), e.at("config_hash"), e.at("seed"), e.value("seconds", 0.0)});
  } catch (const json::exception& ex) {
    throw DependencyError("corrupt manifest index " + index_path().string() + ": " + ex.what());
  }
  return out;
}

bool Runner::up_to_date(const std::string& stage, const std::string& hash, const fs::path& ckpt) const {
  for (const auto& e : index())
    if (e.stage == stage) return e.config_hash == hash && fs::exists(ckpt);
  return false;
}

void Runner::note(const std::string& stage, const fs::path& ckpt, const std::string& hash, std::uint64_t seed,
                  Clock::time_point started) {
  auto entries = index();
  const double seconds = std::chrono::duration<double>(Clock::now() - started).count();
  const IndexEntry entry{stage, fs::relative(ckpt, cfg_.out).generic_string(), hash, seed, seconds};
  auto it = std::find_if(entries.begin(), entries.end(), [&](const IndexEntry& e) { return e.stage == stage; });
  if (it != entries.end())
    *it = entry;
  else
    entries.push_back(entry);
  json arr = json::array();
  for (const auto& e : entries)
    arr.push_back({{"stage", e.stage},
                   {"checkpoint", e.checkpoint},
                   {"config_hash", e.config_hash},
                   {"seed", e.seed},
                   {"seconds", e.seconds}});
  write_file(index_path(), json{{"stages", arr}}.dump(2) + "\n");
}

void Runner::say(const std::string& line) const {
  if (log_) *log_ << line << std::endl;
}

void Runner::demo_gen(bool resume) {
  const std::string hash = demos_hash();
  if (resume && up_to_date("demo-gen", hash, demos_path())) return say("demo-gen: up to date");
  const auto started = Clock::now();
  const std::uint64_t seed = stage_seed(cfg_.seed, "demos");
  const auto ds = teacher::generate_demos(cfg_.demos(), cfg_.profile("wheeled"), seed, cfg_.threads);
  fs::create_directories(demos_path().parent_path());
  teacher::write_demos(demos_path(), ds);
  const auto sr = teacher::teacher_success_by_tier(ds);
  say(fmt::format("demo-gen: {} episodes, teacher SR by tier {:.2f} {:.2f} {:.2f} {:.2f}", ds.episodes.size(), sr[0],
                  sr[1], sr[2], sr[3]));
  note("demo-gen", demos_path(), hash, seed, started);
}

void Runner::train_wm(bool resume) {
  const std::string hash = wm_hash();
  if (resume && up_to_date("train-wm", hash, wm_path())) return say("train-wm: up to date");
  const auto started = Clock::now();
  require(demos_path(), "demo-gen");
  const auto ds = teacher::read_demos(demos_path());
  const std::uint64_t seed = stage_seed(cfg_.seed, "wm");
  wm::WorldModel model;
  const auto log = wm::train_wm(model, ds, cfg_.wm, seed);
  wm::save_wm(wm_path(), model, seed, {{"config_hash", hash}});
  say(fmt::format("train-wm: final loss {:.5f}", log.epoch_loss.back()));
  note("train-wm", wm_path(), hash, seed, started);
}

void Runner::train_il(bool resume) {
  const std::string hash = il_hash();
  if (resume && up_to_date("train-il", hash, il_path())) return say("train-il: up to date");
  const auto started = Clock::now();
  require(demos_path(), "demo-gen");
  require(wm_path(), "train-wm");
  const auto ds = teacher::read_demos(demos_path());
  const auto model = wm::load_wm(wm_path());
  const std::uint64_t seed = stage_seed(cfg_.seed, "il");
  policy::BasePolicy base;
  const auto log = policy::train_il(base, model, ds, cfg_.il, seed);
  policy::save_il(il_path(), base, seed, {{"config_hash", hash}});
  say(fmt::format("train-il: {} samples, final mse {:.5f}", log.samples, log.final_mse));
  note("train-il", il_path(), hash, seed, started);
}

void Runner::train_specialist(const std::string& e, bool scratch, bool resume) {
  const auto& profile = cfg_.profile(e);
  const std::string stage = "train-specialist/" + e + specialist_tag(cfg_.ppo, scratch);
  const std::string hash = specialist_hash(e, scratch);
  const fs::path ckpt = specialist_path(e, scratch);
  if (resume && up_to_date(stage, hash, ckpt)) return say(stage + ": up to date");
  const auto started = Clock::now();
  require(wm_path(), "train-wm");
  if (!scratch) require(il_path(), "train-il");
  const auto model = wm::load_wm(wm_path());
  const rl::PpoConfig ppo = cfg_.ppo_for(e);
  const std::uint64_t seed = stage_seed(cfg_.seed, "ppo/" + e);
  rl::Specialist spec(ppo.critic);
  const auto log = scratch ? rl::train_from_scratch(spec, profile, model, ppo, seed)
                           : rl::train_specialist(spec, profile, model, policy::load_il(il_path()), ppo, seed);
  fs::create_directories(ckpt.parent_path());
  fs::create_directories(curve_path(e, scratch).parent_path());
  rl::save_specialist(ckpt, spec, seed, {{"config_hash", hash}});
  rl::write_curve_csv(curve_path(e, scratch), log);
  say(fmt::format("{}: {} episodes, eval SR {:.2f}, eval return {:.2f}", stage, log.episodes, log.final_eval.sr,
                  log.final_eval.mean_return));
  note(stage, ckpt, hash, seed, started);
}

void Runner::record(const std::string& e, bool resume) {
  const std::string stage = "record/" + e + specialist_tag(cfg_.ppo, false);
  const std::string hash = record_hash(e);
  const fs::path out = dataset_path(e);
  if (resume && up_to_date(stage, hash, out)) return say(stage + ": up to date");
  const auto started = Clock::now();
  require(wm_path(), "train-wm");
  require(il_path(), "train-il");
  require(specialist_path(e), "train-specialist --embodiment " + e);
  const auto model = wm::load_wm(wm_path());
  const auto base = policy::load_il(il_path());
  const auto spec = rl::load_specialist(specialist_path(e));
  const policy::Pipeline pipe(&model, &base);
  auto rc = cfg_.distill.record;
  rc.threads = cfg_.threads;
  const std::uint64_t seed = stage_seed(cfg_.seed, "record");
  const auto ds = distill::record_specialist(spec, pipe, cfg_.profile(e), cfg_.embodiment_index(e), rc, seed);
  fs::create_directories(out.parent_path());
  distill::write_dataset(out, ds);
  say(fmt::format("{}: {} records", stage, ds.records.size()));
  note(stage, out, hash, seed, started);
}

void Runner::distill(bool resume) {
  const std::string stage = "distill" + generalist_tag(cfg_);
  const std::string hash = distill_hash();
  const fs::path ckpt = generalist_path();
  if (resume && up_to_date(stage, hash, ckpt)) return say(stage + ": up to date");
  const auto started = Clock::now();
  std::vector<distill::DistillDataset> sets;
  for (const auto& e : embodiments()) {
    require(dataset_path(e), "record --embodiment " + e);
    sets.push_back(distill::read_dataset(dataset_path(e)));
  }
  const std::uint64_t seed = stage_seed(cfg_.seed, "distill");
  distill::Generalist g;
  const auto log = distill::train_distilled(g, sets, cfg_.distill.train, seed);
  distill::save_generalist(ckpt, g, seed, {{"config_hash", hash}});
  std::string mse;
  for (double m : log.heldout_mse) mse += fmt::format(" {:.4f}", m);
  say(fmt::format("{}: final loss {:.5f}, held-out mse{}", stage, log.epoch_loss.back(), mse));
  note(stage, ckpt, hash, seed, started);
}

std::vector<bench::ReportRow> Runner::bench(const std::string& model, const std::vector<std::string>& embodiments,
                                            const std::vector<int>& tiers, bool scratch) {
  if (model != "base" && model != "specialist" && model != "generalist" && model != "teacher")
    throw ConfigError("unknown model '" + model + "' (expected base, specialist, generalist or teacher)");
  if (model != "specialist" && scratch) throw ConfigError("--from-scratch applies to the specialist model only");
  for (int t : tiers)
    if (t < 1 || t > 4) throw ConfigError("tiers must be in 1..4");
  for (const auto& e : embodiments) cfg_.profile(e);

  std::string tag = model;
  if (model == "specialist") tag += specialist_tag(cfg_.ppo, scratch);
  if (model == "generalist") tag += generalist_tag(cfg_);

  std::unique_ptr<wm::WorldModel> wmodel;
  std::unique_ptr<policy::BasePolicy> base;
  std::unique_ptr<distill::Generalist> gen;
  if (model != "teacher") {
    require(wm_path(), "train-wm");
    wmodel = std::make_unique<wm::WorldModel>(wm::load_wm(wm_path()));
  }
  if (model != "teacher" && !scratch) {
    require(il_path(), "train-il");
    base = std::make_unique<policy::BasePolicy>(policy::load_il(il_path()));
  }
  if (model == "generalist") {
    require(generalist_path(), "distill");
    gen = std::make_unique<distill::Generalist>(distill::load_generalist(generalist_path()));
  }
  const policy::Pipeline pipe(wmodel.get(), base.get());

  bench::TrialConfig tc;
  tc.trials = cfg_.bench.trials;
  tc.threads = cfg_.threads;
  tc.reset = {cfg_.sim.min_goal_distance, cfg_.sim.max_goal_distance};
  const std::uint64_t seed = stage_seed(cfg_.seed, "bench");

  std::vector<bench::ReportRow> rows;
  for (const auto& e : embodiments) {
    const auto& profile = cfg_.profile(e);
    std::unique_ptr<rl::Specialist> spec;
    bench::ControllerFactory factory;
    if (model == "teacher") {
      factory = bench::teacher_controller(profile, cfg_.teacher.pursuit);
    } else if (model == "base") {
      factory = bench::base_controller(pipe, profile);
    } else if (model == "specialist") {
      require(specialist_path(e, scratch),
              "train-specialist --embodiment " + e + (scratch ? " --from-scratch" : ""));
      spec = std::make_unique<rl::Specialist>(rl::load_specialist(specialist_path(e, scratch)));
      factory = bench::specialist_controller(pipe, *spec, profile);
    } else {
      factory = bench::generalist_controller(pipe, *gen, profile, cfg_.embodiment_index(e));
    }
    for (int tier : tiers) {
      const auto trials = bench::run_trials(factory, profile, tier, tc, seed);
      rows.push_back(bench::make_row(e, tag, tier, trials, cfg_.bench.wtt));
      const auto& r = rows.back();
      say(fmt::format("bench {} {} tier {}: SR {:.2f}% WTT {}", e, tag, tier, r.sr_pct,
                      r.wtt_s ? fmt::format("{:.3f}", *r.wtt_s) : "n/a"));
    }
  }

  std::vector<bench::ReportRow> merged;
  const fs::path csv = fs::path(report_stem()).concat(".csv");
  if (fs::exists(csv)) merged = bench::parse_csv(read_file(csv));
  for (const auto& r : rows) {
    auto it = std::find_if(merged.begin(), merged.end(), [&](const bench::ReportRow& m) {
      return m.embodiment == r.embodiment && m.model == r.model && m.tier == r.tier;
    });
    if (it != merged.end())
      *it = r;
    else
      merged.push_back(r);
  }
  bench::emit_report(report_stem(), merged);
  return rows;
}

std::vector<bench::ReportRow> Runner::all() {
  demo_gen(true);
  train_wm(true);
  train_il(true);
  for (const auto& e : embodiments()) train_specialist(e, false, true);
  for (const auto& e : embodiments()) record(e, true);
  distill(true);
  fs::remove(fs::path(report_stem()).concat(".csv"));
  fs::remove(fs::path(report_stem()).concat(".md"));
  std::vector<bench::ReportRow> rows;
  for (const char* model : {"base", "specialist", "generalist"}) {
    auto r = bench(model, embodiments(), cfg_.bench.tiers);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

}  // namespace compass::pipeline
