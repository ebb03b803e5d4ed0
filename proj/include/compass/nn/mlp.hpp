#pragma once

#include <string>
#include <vector>

#include "compass/common/rng.hpp"
#include "compass/nn/tape.hpp"
#include "compass/nn/tensor.hpp"

namespace compass::nn {

/// Layer widths, input first. Hidden layers use tanh, the output is linear.
struct MlpSpec {
  std::vector<int> widths;

  /// Throws InvalidArgument unless there are at least two widths, all >= 1.
  void validate() const;
  int input() const { return widths.front(); }
  int output() const { return widths.back(); }
};

/// Fully connected network y = L_k(tanh(... tanh(L_1(x)))), L_i(x) = x W_i + b_i.
class Mlp {
 public:
  Mlp() = default;
  /// Parameters are named "<prefix>.l<i>.w" / "<prefix>.l<i>.b" and start at zero.
  Mlp(std::string prefix, MlpSpec spec);

  /// Uniform in +-sqrt(6/(fan_in+fan_out)) for weights, zero biases.
  void init_glorot(Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return weights_.size(); }
  Parameter& weight(std::size_t layer) { return weights_[layer]; }
  Parameter& bias(std::size_t layer) { return biases_[layer]; }
  const Parameter& weight(std::size_t layer) const { return weights_[layer]; }
  const Parameter& bias(std::size_t layer) const { return biases_[layer]; }

  /// Batched inference on [batch, input] rows. Throws InvalidArgument on shape mismatch.
  Matrix forward(const Matrix& input) const;
  /// Same computation recorded on a tape.
  Var forward(Tape& tape, Var input);

  ParameterRefs parameters();

 private:
  std::string prefix_;
  MlpSpec spec_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

struct GruSpec {
  int input = 1;
  int hidden = 1;
  void validate() const;
};

/// Gated recurrent unit:
///   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
///   n = tanh(x Wn + (r*h) Un + bn), h' = (1-z)*n + z*h
class Gru {
 public:
  Gru() = default;
  Gru(std::string prefix, GruSpec spec);

  void init_glorot(Rng& rng);
  const GruSpec& spec() const { return spec_; }

  Matrix step(const Matrix& input, const Matrix& hidden) const;
  Var step(Tape& tape, Var input, Var hidden);

  ParameterRefs parameters();

 private:
  std::string prefix_;
  GruSpec spec_;
  Parameter wz_, uz_, bz_, wr_, ur_, br_, wn_, un_, bn_;
};

}  // namespace compass::nn
