#pragma once

#include <cstdint>
#include <vector>

#include "compass/nn/tensor.hpp"

namespace compass::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Reads Parameter::grad, updates Parameter::value.
class Adam {
 public:
  Adam(ParameterRefs params, AdamConfig config);

  void step();
  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  ParameterRefs params_;
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
};

}  // namespace compass::nn
