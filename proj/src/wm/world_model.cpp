#include "compass/wm/world_model.hpp"

#include "compass/common/errors.hpp"
#include "compass/nn/checkpoint.hpp"

namespace compass::wm {

WorldModel::WorldModel(WmSpec spec)
    : spec_(spec),
      encoder_("wm.enc", {{spec.obs, spec.encoder_hidden, spec.latent}}),
      transition_("wm.gru", {spec.latent + kActionDim, spec.latent}),
      recon_("wm.recon", {{spec.latent, spec.head_hidden, spec.obs}}),
      predict_("wm.pred", {{spec.latent + kActionDim, spec.head_hidden, spec.obs}}) {}

void WorldModel::init(Rng& rng) {
  encoder_.init_glorot(rng);
  transition_.init_glorot(rng);
  recon_.init_glorot(rng);
  predict_.init_glorot(rng);
}

Matrix WorldModel::initial_state(Eigen::Index rows) const { return Matrix::Zero(rows, spec_.latent); }

Matrix WorldModel::step(const Matrix& s_prev, const Matrix& a_prev, const Matrix& obs) const {
  if (!nn::all_finite(s_prev) || !nn::all_finite(a_prev) || !nn::all_finite(obs))
    throw NumericError("world model step: non-finite input");
  if (a_prev.cols() != kActionDim || a_prev.rows() != obs.rows())
    throw InvalidArgument("world model step: action shape mismatch");
  Matrix x(obs.rows(), spec_.latent + kActionDim);
  x << encoder_.forward(obs), a_prev;
  return transition_.step(x, s_prev);
}

Matrix WorldModel::reconstruct(const Matrix& s) const { return recon_.forward(s); }

Matrix WorldModel::predict(const Matrix& s, const Matrix& a) const {
  Matrix x(s.rows(), s.cols() + a.cols());
  x << s, a;
  return predict_.forward(x);
}

Var WorldModel::step(Tape& tape, Var s_prev, Var a_prev, Var obs) {
  return transition_.step(tape, tape.concat_cols(encoder_.forward(tape, obs), a_prev), s_prev);
}

Var WorldModel::reconstruct(Tape& tape, Var s) { return recon_.forward(tape, s); }

Var WorldModel::predict(Tape& tape, Var s, Var a) { return predict_.forward(tape, tape.concat_cols(s, a)); }

nn::ParameterRefs WorldModel::parameters() {
  nn::ParameterRefs out;
  for (auto* group : {&encoder_, &recon_, &predict_}) {
    auto p = group->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto g = transition_.parameters();
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

Var sequence_loss(Tape& tape, WorldModel& model, const Matrix& obs, const Matrix& actions) {
  const Eigen::Index T = obs.rows();
  if (T < 2) throw InvalidArgument("world model loss needs at least two steps");
  if (actions.rows() != T || actions.cols() != kActionDim) throw InvalidArgument("world model loss: action shape");
  Var s = tape.constant(model.initial_state());
  Var total{};
  for (Eigen::Index t = 0; t < T; ++t) {
    const Matrix a_prev = t == 0 ? Matrix::Zero(1, kActionDim) : Matrix(actions.row(t - 1));
    const Var o = tape.constant(obs.row(t));
    s = model.step(tape, s, tape.constant(a_prev), o);
    Var term = tape.mean(tape.square(tape.sub(model.reconstruct(tape, s), o)));
    if (t + 1 < T) {
      const Var pred = model.predict(tape, s, tape.constant(actions.row(t)));
      term = tape.add(term, tape.mean(tape.square(tape.sub(pred, tape.constant(obs.row(t + 1))))));
    }
    total = t == 0 ? term : tape.add(total, term);
  }
  return tape.scale(total, 1.0 / static_cast<double>(T));
}

Matrix episode_latents(const WorldModel& model, const teacher::DemoDataset& demos, const teacher::DemoEpisode& ep) {
  Matrix out(ep.length, model.spec().latent);
  Matrix s = model.initial_state();
  Matrix a = Matrix::Zero(1, kActionDim);
  Matrix o(1, model.spec().obs);
  for (int t = 0; t < ep.length; ++t) {
    const auto& f = demos.frames[ep.first_frame + static_cast<std::size_t>(t)];
    for (int k = 0; k < model.spec().obs; ++k) o(0, k) = f.obs[static_cast<std::size_t>(k)];
    s = model.step(s, a, o);
    out.row(t) = s.row(0);
    a << f.act.v, f.act.w;
  }
  return out;
}

PredictionScore prediction_score(const WorldModel& model, const teacher::DemoDataset& demos,
                                 const std::vector<std::size_t>& episode_indices) {
  PredictionScore score;
  double model_sum = 0.0;
  double copy_sum = 0.0;
  for (std::size_t e : episode_indices) {
    const auto& ep = demos.episodes.at(e);
    const Matrix latents = episode_latents(model, demos, ep);
    for (int t = 0; t + 1 < ep.length; ++t) {
      const auto& f = demos.frames[ep.first_frame + static_cast<std::size_t>(t)];
      const auto& next = demos.frames[ep.first_frame + static_cast<std::size_t>(t) + 1];
      Matrix a(1, kActionDim);
      a << f.act.v, f.act.w;
      const Matrix pred = model.predict(latents.row(t), a);
      for (int k = 0; k < model.spec().obs; ++k) {
        const double target = next.obs[static_cast<std::size_t>(k)];
        model_sum += (pred(0, k) - target) * (pred(0, k) - target);
        copy_sum += (f.obs[static_cast<std::size_t>(k)] - target) * (f.obs[static_cast<std::size_t>(k)] - target);
      }
      ++score.pairs;
    }
  }
  if (score.pairs > 0) {
    const double n = static_cast<double>(score.pairs) * model.spec().obs;
    score.model_mse = model_sum / n;
    score.copy_last_mse = copy_sum / n;
  }
  return score;
}

void save_wm(const std::filesystem::path& path, WorldModel& model, std::uint64_t seed, const nlohmann::json& extra) {
  nn::save_checkpoint(path, model.parameters());
  nlohmann::json m = extra.is_object() ? extra : nlohmann::json::object();
  m["kind"] = "wm/v1";
  m["seed"] = seed;
  m["spec"] = {{"obs", model.spec().obs},
               {"encoder", {model.spec().obs, model.spec().encoder_hidden, model.spec().latent}},
               {"gru", {model.spec().latent + kActionDim, model.spec().latent}},
               {"recon", {model.spec().latent, model.spec().head_hidden, model.spec().obs}},
               {"predict", {model.spec().latent + kActionDim, model.spec().head_hidden, model.spec().obs}}};
  nn::write_manifest(path, m);
}

WorldModel load_wm(const std::filesystem::path& path) {
  const auto m = nn::read_manifest(path);
  if (m.value("kind", "") != "wm/v1") throw DependencyError(path.string() + " is not a world model checkpoint");
  WmSpec spec;
  spec.obs = m.at("spec").at("obs").get<int>();
  spec.encoder_hidden = m.at("spec").at("encoder").at(1).get<int>();
  spec.latent = m.at("spec").at("encoder").at(2).get<int>();
  spec.head_hidden = m.at("spec").at("recon").at(1).get<int>();
  WorldModel model(spec);
  nn::load_checkpoint(path, model.parameters());
  return model;
}

}  // namespace compass::wm
