#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "compass/common/errors.hpp"
#include "compass/pipeline/runner.hpp"

using namespace compass;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitNumeric = 4;

struct Variant {
  bool curriculum = false;
  std::string critic;
  bool scratch = false;
  std::string loss;
  bool filter_failures = false;
};

void add_specialist_variant(CLI::App* cmd, Variant& v) {
  cmd->add_flag("--curriculum", v.curriculum, "Ramp the minimum goal distance over the first half of training");
  cmd->add_option("--critic", v.critic, "Critic input")->check(CLI::IsMember({"state", "obs"}));
}

void add_generalist_variant(CLI::App* cmd, Variant& v) {
  cmd->add_option("--loss", v.loss, "Distillation loss")->check(CLI::IsMember({"kl", "mse"}));
  cmd->add_flag("--filter-failures", v.filter_failures, "Drop records from episodes that did not reach the goal");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compass: imitation, residual RL, distillation and benchmarking for cross-embodiment navigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  app.add_option("--config", config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  Variant v;
  std::string embodiment;
  std::string model;
  std::vector<std::string> bench_embodiments;
  std::vector<int> bench_tiers;

  app.add_subcommand("demo-gen", "Generate teacher demonstrations on the wheeled profile");
  app.add_subcommand("train-wm", "Train the world model on the demonstrations");
  app.add_subcommand("train-il", "Train the base policy on frozen world-model latents");

  auto* spec = app.add_subcommand("train-specialist", "Residual PPO for one embodiment");
  spec->add_option("--embodiment", embodiment, "Embodiment name")->required();
  add_specialist_variant(spec, v);
  spec->add_flag("--from-scratch", v.scratch, "Train without the base action");

  auto* rec = app.add_subcommand("record", "Record specialist rollouts for distillation");
  rec->add_option("--embodiment", embodiment, "Embodiment name")->required();
  add_specialist_variant(rec, v);

  auto* dist = app.add_subcommand("distill", "Distill all specialists into the generalist");
  add_specialist_variant(dist, v);
  add_generalist_variant(dist, v);

  auto* bench = app.add_subcommand("bench", "Benchmark a model and merge rows into the report");
  bench->add_option("--model", model, "Model to evaluate")
      ->required()
      ->check(CLI::IsMember({"base", "specialist", "generalist", "teacher"}));
  bench->add_option("--embodiment", bench_embodiments, "Embodiments (default: all)");
  bench->add_option("--tier", bench_tiers, "Tiers (default: bench.tiers)")->check(CLI::Range(1, 4));
  add_specialist_variant(bench, v);
  bench->add_flag("--from-scratch", v.scratch, "Evaluate the from-scratch specialist");
  add_generalist_variant(bench, v);

  auto* all = app.add_subcommand("all", "Run every stage (resumable) and write the final report");
  add_specialist_variant(all, v);
  add_generalist_variant(all, v);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kExitConfig;
  }

  try {
    pipeline::PipelineConfig cfg = config_path.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (threads) cfg.threads = *threads;
    if (v.curriculum) cfg.ppo.curriculum = true;
    if (!v.critic.empty()) cfg.ppo.critic = rl::critic_input_from_string(v.critic);
    if (!v.loss.empty()) cfg.distill.train.mode = distill::loss_mode_from_string(v.loss);
    if (v.filter_failures) cfg.distill.train.filter_failures = true;

    pipeline::Runner runner(cfg, &std::cout);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "demo-gen") {
      runner.demo_gen();
    } else if (cmd == "train-wm") {
      runner.train_wm();
    } else if (cmd == "train-il") {
      runner.train_il();
    } else if (cmd == "train-specialist") {
      runner.train_specialist(embodiment, v.scratch);
    } else if (cmd == "record") {
      runner.record(embodiment);
    } else if (cmd == "distill") {
      runner.distill();
    } else if (cmd == "bench") {
      if (bench_embodiments.empty()) bench_embodiments = runner.embodiments();
      if (bench_tiers.empty()) bench_tiers = runner.config().bench.tiers;
      runner.bench(model, bench_embodiments, bench_tiers, v.scratch);
    } else {
      runner.all();
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DependencyError& e) {
    std::cerr << "missing dependency: " << e.what() << "\n";
    return kExitDependency;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
