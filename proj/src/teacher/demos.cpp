#include "compass/teacher/demos.hpp"

#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/common/parallel.hpp"

namespace compass::teacher {

using nlohmann::json;

std::uint64_t demo_map_seed(std::uint64_t seed, int ep) {
  return Rng({seed, static_cast<std::uint64_t>(ep), fnv1a("demo-map")}).next_u64();
}

std::uint64_t demo_reset_seed(std::uint64_t seed, int ep) {
  return Rng({seed, static_cast<std::uint64_t>(ep), fnv1a("demo-reset")}).next_u64();
}

DemoEpisode run_teacher_episode(const std::shared_ptr<const sim::Map>& map, const sim::EmbodimentProfile& profile,
                                std::uint64_t reset_seed, const DemoConfig& cfg, std::vector<DemoFrame>& frames) {
  Rng rng(reset_seed);
  sim::SimState state = sim::reset(*map, profile, rng, {cfg.min_goal_distance, cfg.max_goal_distance});
  Teacher teacher(map, profile, cfg.pursuit);
  teacher.reset(state);
  DemoEpisode ep;
  ep.reset_seed = reset_seed;
  ep.tier = map->tier;
  ep.map_seed = map->seed;
  ep.first_frame = frames.size();
  Rng noise({reset_seed, fnv1a("demo-noise")});
  while (state.alive) {
    DemoFrame f;
    f.t = state.steps;
    f.obs = sim::observe(*map, state, profile).flat();
    f.act = teacher.act(state);
    if (state.goal_distance() > cfg.noise_radius) {
      f.act.v = profile.clamp_v(f.act.v + cfg.noise_v * noise.normal());
      f.act.w = profile.clamp_w(f.act.w + cfg.noise_w * noise.normal());
    }
    auto out = sim::step(state, f.act, profile, *map);
    f.rew = out.result.reward;
    f.done = out.result.termination;
    frames.push_back(f);
    state = out.state;
    ep.outcome = out.result.termination;
  }
  ep.length = static_cast<int>(frames.size() - ep.first_frame);
  return ep;
}

std::array<double, 4> teacher_success_by_tier(const DemoDataset& ds) {
  std::array<int, 4> n{};
  std::array<int, 4> ok{};
  for (const auto& e : ds.episodes) {
    if (e.tier < 1 || e.tier > 4) continue;
    ++n[static_cast<std::size_t>(e.tier - 1)];
    ok[static_cast<std::size_t>(e.tier - 1)] += e.outcome == sim::Termination::Reached;
  }
  std::array<double, 4> sr{};
  for (std::size_t i = 0; i < 4; ++i) sr[i] = n[i] > 0 ? static_cast<double>(ok[i]) / n[i] : 0.0;
  return sr;
}

DemoDataset generate_demos(const DemoConfig& cfg, const sim::EmbodimentProfile& profile, std::uint64_t seed,
                           std::size_t threads) {
  if (cfg.episodes < 1) throw InvalidArgument("demo generation needs at least one episode");
  if (cfg.tiers.empty()) throw InvalidArgument("demo generation needs at least one tier");
  std::vector<DemoEpisode> episodes(static_cast<std::size_t>(cfg.episodes));
  std::vector<std::vector<DemoFrame>> frames(episodes.size());
  parallel_for(episodes.size(), threads, [&](std::size_t i) {
    const int ep = static_cast<int>(i);
    const int tier = cfg.tiers[i % cfg.tiers.size()];
    auto map = std::make_shared<const sim::Map>(sim::generate_map(tier, demo_map_seed(seed, ep)));
    episodes[i] = run_teacher_episode(map, profile, demo_reset_seed(seed, ep), cfg, frames[i]);
    episodes[i].ep = ep;
    for (auto& f : frames[i]) f.ep = ep;
  });

  DemoDataset ds;
  ds.profile = profile.name;
  ds.seed = seed;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    episodes[i].first_frame = ds.frames.size();
    ds.frames.insert(ds.frames.end(), frames[i].begin(), frames[i].end());
    ds.episodes.push_back(episodes[i]);
  }

  int gate_n = 0;
  int gate_ok = 0;
  for (const auto& e : ds.episodes)
    if (e.tier <= 2) {
      ++gate_n;
      gate_ok += e.outcome == sim::Termination::Reached;
    }
  if (gate_n > 0 && static_cast<double>(gate_ok) / gate_n < cfg.min_teacher_sr) {
    const auto sr = teacher_success_by_tier(ds);
    throw GenerationError(fmt::format(
        "teacher success on tiers 1-2 is {:.3f} < {:.3f} (per tier: {:.3f} {:.3f} {:.3f} {:.3f}); try another seed",
        static_cast<double>(gate_ok) / gate_n, cfg.min_teacher_sr, sr[0], sr[1], sr[2], sr[3]));
  }
  return ds;
}

namespace {

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

}  // namespace

void write_demos(const std::filesystem::path& path, const DemoDataset& ds) {
  std::string out;
  out.reserve(ds.frames.size() * 800);
  for (const auto& f : ds.frames) {
    json j;
    j["ep"] = f.ep;
    j["t"] = f.t;
    j["obs"] = f.obs;
    j["act"] = {f.act.v, f.act.w};
    j["rew"] = f.rew;
    j["done"] = f.done == sim::Termination::None ? json(nullptr) : json(sim::to_string(f.done));
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);

  json meta;
  meta["profile"] = ds.profile;
  meta["seed"] = ds.seed;
  meta["frames"] = ds.frames.size();
  meta["layout"] = "ranges[32], v_cur, w_cur, goal_distance/10, sin_bearing, cos_bearing";
  json eps = json::array();
  for (const auto& e : ds.episodes)
    eps.push_back({{"ep", e.ep},
                   {"tier", e.tier},
                   {"map_seed", e.map_seed},
                   {"reset_seed", e.reset_seed},
                   {"outcome", sim::to_string(e.outcome)},
                   {"length", e.length}});
  meta["episodes"] = eps;
  write_file(meta_path(path), meta.dump(2) + "\n");
}

DemoDataset read_demos(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DependencyError("demo dataset not found: " + path.string());
  DemoDataset ds;
  std::istringstream lines(read_file(path));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    DemoFrame f;
    f.ep = j.at("ep").get<int>();
    f.t = j.at("t").get<int>();
    const auto obs = j.at("obs").get<std::vector<double>>();
    if (obs.size() != f.obs.size()) throw InvalidArgument("demo frame has wrong observation width");
    std::copy(obs.begin(), obs.end(), f.obs.begin());
    f.act = {j.at("act").at(0).get<double>(), j.at("act").at(1).get<double>()};
    f.rew = j.at("rew").get<double>();
    f.done = j.at("done").is_null() ? sim::Termination::None
                                    : sim::termination_from_string(j.at("done").get<std::string>());
    ds.frames.push_back(f);
  }
  if (std::filesystem::exists(meta_path(path))) {
    const json meta = json::parse(read_file(meta_path(path)));
    ds.profile = meta.at("profile").get<std::string>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& e : meta.at("episodes")) {
      DemoEpisode ep;
      ep.ep = e.at("ep").get<int>();
      ep.tier = e.at("tier").get<int>();
      ep.map_seed = e.at("map_seed").get<std::uint64_t>();
      ep.reset_seed = e.at("reset_seed").get<std::uint64_t>();
      ep.outcome = sim::termination_from_string(e.at("outcome").get<std::string>());
      ep.length = e.at("length").get<int>();
      ds.episodes.push_back(ep);
    }
  } else {
    // Rebuild the episode table from the frames alone.
    for (std::size_t i = 0; i < ds.frames.size(); ++i)
      if (i == 0 || ds.frames[i].ep != ds.frames[i - 1].ep) {
        DemoEpisode ep;
        ep.ep = ds.frames[i].ep;
        ds.episodes.push_back(ep);
      }
  }
  std::size_t cursor = 0;
  for (auto& e : ds.episodes) {
    e.first_frame = cursor;
    int len = 0;
    while (cursor < ds.frames.size() && ds.frames[cursor].ep == e.ep) {
      ++cursor;
      ++len;
    }
    if (e.length != 0 && e.length != len) throw InvalidArgument("demo metadata disagrees with frame count");
    e.length = len;
    if (len > 0) e.outcome = ds.frames[cursor - 1].done;
  }
  if (cursor != ds.frames.size()) throw InvalidArgument("demo frames are not grouped by episode");
  return ds;
}

}  // namespace compass::teacher
