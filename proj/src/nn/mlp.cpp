#include "compass/nn/mlp.hpp"

#include <cmath>
#include <string>

#include "compass/common/errors.hpp"

namespace compass::nn {

namespace {

void glorot(Parameter& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.value.rows() + w.value.cols()));
  for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.uniform(-bound, bound);
}

}  // namespace

void MlpSpec::validate() const {
  if (widths.size() < 2) throw InvalidArgument("MLP needs at least two widths");
  for (int w : widths)
    if (w < 1) throw InvalidArgument("MLP widths must be >= 1");
}

Mlp::Mlp(std::string prefix, MlpSpec spec) : prefix_(std::move(prefix)), spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t i = 0; i + 1 < spec_.widths.size(); ++i) {
    const std::string base = prefix_ + ".l" + std::to_string(i);
    weights_.emplace_back(base + ".w", spec_.widths[i], spec_.widths[i + 1], 2);
    biases_.emplace_back(base + ".b", 1, spec_.widths[i + 1], 1);
  }
}

void Mlp::init_glorot(Rng& rng) {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    glorot(weights_[i], rng);
    biases_[i].value.setZero();
  }
}

Matrix Mlp::forward(const Matrix& input) const {
  if (input.cols() != spec_.input())
    throw InvalidArgument(prefix_ + ": expected input width " + std::to_string(spec_.input()) + ", got " +
                          std::to_string(input.cols()));
  Matrix h = input;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = kernels::add_row(kernels::matmul(h, weights_[i].value), biases_[i].value);
    if (i + 1 < weights_.size()) h = kernels::tanh(h);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var input) {
  if (tape.value(input).cols() != spec_.input())
    throw InvalidArgument(prefix_ + ": expected input width " + std::to_string(spec_.input()));
  Var h = input;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = tape.add_row(tape.matmul(h, tape.param(weights_[i])), tape.param(biases_[i]));
    if (i + 1 < weights_.size()) h = tape.tanh(h);
  }
  return h;
}

ParameterRefs Mlp::parameters() {
  ParameterRefs out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

void GruSpec::validate() const {
  if (input < 1 || hidden < 1) throw InvalidArgument("GRU widths must be >= 1");
}

Gru::Gru(std::string prefix, GruSpec spec) : prefix_(std::move(prefix)), spec_(spec) {
  spec_.validate();
  const int in = spec_.input;
  const int hid = spec_.hidden;
  wz_ = Parameter(prefix_ + ".wz", in, hid);
  uz_ = Parameter(prefix_ + ".uz", hid, hid);
  bz_ = Parameter(prefix_ + ".bz", 1, hid, 1);
  wr_ = Parameter(prefix_ + ".wr", in, hid);
  ur_ = Parameter(prefix_ + ".ur", hid, hid);
  br_ = Parameter(prefix_ + ".br", 1, hid, 1);
  wn_ = Parameter(prefix_ + ".wn", in, hid);
  un_ = Parameter(prefix_ + ".un", hid, hid);
  bn_ = Parameter(prefix_ + ".bn", 1, hid, 1);
}

void Gru::init_glorot(Rng& rng) {
  for (Parameter* w : {&wz_, &uz_, &wr_, &ur_, &wn_, &un_}) glorot(*w, rng);
  for (Parameter* b : {&bz_, &br_, &bn_}) b->value.setZero();
}

Matrix Gru::step(const Matrix& input, const Matrix& hidden) const {
  if (input.cols() != spec_.input || hidden.cols() != spec_.hidden || input.rows() != hidden.rows())
    throw InvalidArgument(prefix_ + ": GRU input/hidden shape mismatch");
  using namespace kernels;
  auto gate = [](const Matrix& x, const Matrix& w, const Matrix& h, const Matrix& u, const Matrix& b) {
    return sigmoid(add_row(add(matmul(x, w), matmul(h, u)), b));
  };
  const Matrix z = gate(input, wz_.value, hidden, uz_.value, bz_.value);
  const Matrix r = gate(input, wr_.value, hidden, ur_.value, br_.value);
  const Matrix rh = mul(r, hidden);
  const Matrix n = kernels::tanh(add_row(add(matmul(input, wn_.value), matmul(rh, un_.value)), bn_.value));
  const Matrix one_minus_z = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(one_minus_z, n), mul(z, hidden));
}

Var Gru::step(Tape& tape, Var input, Var hidden) {
  if (tape.value(input).cols() != spec_.input || tape.value(hidden).cols() != spec_.hidden)
    throw InvalidArgument(prefix_ + ": GRU input/hidden shape mismatch");
  auto gate = [&](Parameter& w, Parameter& u, Parameter& b) {
    Var s = tape.add(tape.matmul(input, tape.param(w)), tape.matmul(hidden, tape.param(u)));
    return tape.sigmoid(tape.add_row(s, tape.param(b)));
  };
  Var z = gate(wz_, uz_, bz_);
  Var r = gate(wr_, ur_, br_);
  Var rh = tape.mul(r, hidden);
  Var s = tape.add(tape.matmul(input, tape.param(wn_)), tape.matmul(rh, tape.param(un_)));
  Var n = tape.tanh(tape.add_row(s, tape.param(bn_)));
  Var one_minus_z = tape.add_scalar(tape.scale(z, -1.0), 1.0);
  return tape.add(tape.mul(one_minus_z, n), tape.mul(z, hidden));
}

ParameterRefs Gru::parameters() { return {&wz_, &uz_, &bz_, &wr_, &ur_, &br_, &wn_, &un_, &bn_}; }

}  // namespace compass::nn
