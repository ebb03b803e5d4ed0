#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "compass/common/rng.hpp"
#include "compass/nn/tape.hpp"

namespace compass::test_support {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int coordinates = 0;
  std::string worst;
};

/// Compares reverse-mode gradients with central finite differences on randomly
/// chosen parameter coordinates. The relative error uses max(|a|, |n|, floor) as
/// denominator so near-zero coordinates are judged on absolute error.
inline GradCheckResult check_gradients(const nn::ParameterRefs& params,
                                       const std::function<nn::Var(nn::Tape&)>& loss_fn, int coordinates = 100,
                                       std::uint64_t seed = 7, double step = 1e-4, double floor = 1e-3) {
  nn::zero_grads(params);
  {
    nn::Tape tape;
    tape.backward(loss_fn(tape));
  }
  std::vector<nn::Matrix> analytic;
  std::size_t total = 0;
  for (auto* p : params) {
    analytic.push_back(p->grad);
    total += static_cast<std::size_t>(p->value.size());
  }

  auto eval = [&] {
    nn::Tape tape;
    return tape.scalar(loss_fn(tape));
  };

  Rng rng(seed);
  GradCheckResult result;
  for (int k = 0; k < coordinates; ++k) {
    std::size_t flat = rng.index(total);
    std::size_t pi = 0;
    while (flat >= static_cast<std::size_t>(params[pi]->value.size())) {
      flat -= static_cast<std::size_t>(params[pi]->value.size());
      ++pi;
    }
    double& x = params[pi]->value.data()[flat];
    const double saved = x;
    x = saved + step;
    const double up = eval();
    x = saved - step;
    const double down = eval();
    x = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[pi].data()[flat];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    ++result.coordinates;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = params[pi]->name + "[" + std::to_string(flat) + "] analytic=" + std::to_string(a) +
                     " numeric=" + std::to_string(numeric);
    }
  }
  return result;
}

}  // namespace compass::test_support
