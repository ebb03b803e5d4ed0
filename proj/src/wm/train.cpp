#include <algorithm>
#include <numeric>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/nn/adam.hpp"
#include "compass/wm/world_model.hpp"

namespace compass::wm {

namespace {

// One slot of a lane: a frame index, or -1 for padding after the lane ends.
struct Slot {
  long frame = -1;
  bool episode_start = false;
  bool has_next = false;
};

std::vector<std::vector<Slot>> pack_lanes(const teacher::DemoDataset& demos, const std::vector<std::size_t>& order,
                                          int lanes) {
  std::vector<std::vector<Slot>> out(static_cast<std::size_t>(lanes));
  for (std::size_t e : order) {
    const auto& ep = demos.episodes[e];
    auto shortest = std::min_element(out.begin(), out.end(),
                                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    for (int t = 0; t < ep.length; ++t)
      shortest->push_back({static_cast<long>(ep.first_frame) + t, t == 0, t + 1 < ep.length});
  }
  return out;
}

}  // namespace

WmTrainLog train_wm(WorldModel& model, const teacher::DemoDataset& demos, const WmTrainConfig& cfg,
                    std::uint64_t seed) {
  if (cfg.epochs < 1 || cfg.truncation < 1 || cfg.batch < 1 || !(cfg.lr > 0.0))
    throw InvalidArgument("world model training: invalid configuration");
  std::vector<std::size_t> usable;
  for (std::size_t e = 0; e < demos.episodes.size(); ++e)
    if (demos.episodes[e].length >= 2) usable.push_back(e);
  std::size_t usable_frames = 0;
  for (auto e : usable) usable_frames += static_cast<std::size_t>(demos.episodes[e].length);
  if (usable_frames < static_cast<std::size_t>(cfg.truncation))
    throw InvalidArgument("world model training: dataset shorter than one truncation window");

  Rng init_rng({seed, fnv1a("wm-init")});
  model.init(init_rng);
  auto params = model.parameters();
  nn::Adam adam(params, {cfg.lr});
  const int obs_dim = model.spec().obs;
  const auto B = static_cast<Eigen::Index>(cfg.batch);

  WmTrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    Rng shuffle({seed, fnv1a("wm-shuffle"), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    const auto lanes = pack_lanes(demos, order, cfg.batch);
    std::size_t longest = 0;
    for (const auto& l : lanes) longest = std::max(longest, l.size());

    Matrix carry = model.initial_state(B);
    double epoch_sum = 0.0;
    double epoch_count = 0.0;
    for (std::size_t w0 = 0; w0 < longest; w0 += static_cast<std::size_t>(cfg.truncation)) {
      const std::size_t w1 = std::min(longest, w0 + static_cast<std::size_t>(cfg.truncation));
      double valid = 0.0;
      for (const auto& l : lanes)
        for (std::size_t k = w0; k < w1; ++k) valid += k < l.size() ? 1.0 : 0.0;
      if (valid == 0.0) break;

      nn::Tape tape;
      Var s = tape.constant(carry);
      Var total{};
      bool have_total = false;
      for (std::size_t k = w0; k < w1; ++k) {
        Matrix obs = Matrix::Zero(B, obs_dim);
        Matrix next = Matrix::Zero(B, obs_dim);
        Matrix a_prev = Matrix::Zero(B, kActionDim);
        Matrix a_cur = Matrix::Zero(B, kActionDim);
        Matrix mask = Matrix::Zero(B, 1);
        Matrix next_mask = Matrix::Zero(B, 1);
        Matrix keep = Matrix::Ones(B, model.spec().latent);
        bool any_reset = false;
        for (Eigen::Index b = 0; b < B; ++b) {
          const auto& lane = lanes[static_cast<std::size_t>(b)];
          if (k >= lane.size()) continue;
          const Slot& slot = lane[k];
          const auto& f = demos.frames[static_cast<std::size_t>(slot.frame)];
          for (int c = 0; c < obs_dim; ++c) obs(b, c) = f.obs[static_cast<std::size_t>(c)];
          a_cur(b, 0) = f.act.v;
          a_cur(b, 1) = f.act.w;
          mask(b, 0) = 1.0;
          if (slot.episode_start) {
            keep.row(b).setZero();
            any_reset = true;
          } else {
            const auto& prev = demos.frames[static_cast<std::size_t>(slot.frame) - 1];
            a_prev(b, 0) = prev.act.v;
            a_prev(b, 1) = prev.act.w;
          }
          if (slot.has_next) {
            const auto& nf = demos.frames[static_cast<std::size_t>(slot.frame) + 1];
            for (int c = 0; c < obs_dim; ++c) next(b, c) = nf.obs[static_cast<std::size_t>(c)];
            next_mask(b, 0) = 1.0;
          }
        }
        if (any_reset) s = tape.mul(s, tape.constant(keep));
        const Var o = tape.constant(obs);
        s = model.step(tape, s, tape.constant(a_prev), o);
        // masked_mean_rows divides by max(1, count) * cols; rescale so the
        // window loss is sum of per-row MSEs over the number of valid rows.
        const double m = std::max(1.0, mask.sum());
        Var term = tape.scale(tape.masked_mean_rows(tape.square(tape.sub(model.reconstruct(tape, s), o)), mask),
                              m / valid);
        if (next_mask.sum() > 0.0) {
          const double nm = std::max(1.0, next_mask.sum());
          const Var pred = model.predict(tape, s, tape.constant(a_cur));
          term = tape.add(term, tape.scale(tape.masked_mean_rows(
                                               tape.square(tape.sub(pred, tape.constant(next))), next_mask),
                                           nm / valid));
        }
        total = have_total ? tape.add(total, term) : term;
        have_total = true;
      }
      carry = tape.value(s);
      nn::zero_grads(params);
      tape.backward(total);
      if (cfg.grad_clip > 0.0) {
        const double norm = nn::grad_norm(params);
        if (norm > cfg.grad_clip) nn::scale_grads(params, cfg.grad_clip / norm);
      }
      adam.step();
      epoch_sum += tape.scalar(total) * valid;
      epoch_count += valid;
    }
    log.epoch_loss.push_back(epoch_sum / epoch_count);
  }
  return log;
}

}  // namespace compass::wm
