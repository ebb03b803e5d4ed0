#include "compass/nn/gaussian.hpp"

#include <cmath>

#include "compass/common/errors.hpp"

namespace compass::nn {

double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                        std::span<const double> sample) {
  if (mean.size() != log_std.size() || mean.size() != sample.size())
    throw InvalidArgument("gaussian_logprob: length mismatch");
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (sample[d] - mean[d]) / std::exp(log_std[d]);
    lp += -0.5 * z * z - log_std[d] - kLogSqrt2Pi;
  }
  return lp;
}

double gaussian_kl(std::span<const double> mean_p, std::span<const double> var_p,
                   std::span<const double> mean_q, std::span<const double> var_q) {
  const std::size_t n = mean_p.size();
  if (var_p.size() != n || mean_q.size() != n || var_q.size() != n)
    throw InvalidArgument("gaussian_kl: length mismatch");
  double kl = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    if (!(var_p[d] > 0.0) || !(var_q[d] > 0.0)) throw InvalidArgument("gaussian_kl: variance must be positive");
    const double dm = mean_p[d] - mean_q[d];
    kl += 0.5 * std::log(var_q[d] / var_p[d]) + (var_p[d] + dm * dm) / (2.0 * var_q[d]) - 0.5;
  }
  return kl;
}

Var gaussian_logprob(Tape& tape, Var mean, Var log_std, Var sample) {
  const Eigen::Index rows = tape.value(mean).rows();
  const Eigen::Index dims = tape.value(mean).cols();
  Var ls = tape.broadcast_rows(log_std, rows);
  Var z = tape.mul(tape.sub(sample, mean), tape.exp(tape.scale(ls, -1.0)));
  Var per_dim = tape.sub(tape.scale(tape.square(z), -0.5), ls);
  return tape.add_scalar(tape.sum_cols(per_dim), -kLogSqrt2Pi * static_cast<double>(dims));
}

Var gaussian_entropy(Tape& tape, Var log_std) {
  const double dims = static_cast<double>(tape.value(log_std).cols());
  return tape.add_scalar(tape.sum(log_std), dims * (0.5 + kLogSqrt2Pi));
}

Var gaussian_kl(Tape& tape, Var mean_p, Var var_p, Var mean_q, Var log_var_q) {
  if ((tape.value(var_p).array() <= 0.0).any()) throw InvalidArgument("gaussian_kl: variance must be positive");
  const Eigen::Index rows = tape.value(mean_p).rows();
  Var lvq = tape.broadcast_rows(log_var_q, rows);
  Var inv_vq = tape.exp(tape.scale(lvq, -1.0));
  Var dm = tape.sub(mean_p, mean_q);
  // 0.5 (log vq - log vp) + (vp + dm^2) / (2 vq) - 0.5
  Var log_term = tape.scale(tape.sub(lvq, tape.log(var_p)), 0.5);
  Var quad = tape.scale(tape.mul(tape.add(var_p, tape.square(dm)), inv_vq), 0.5);
  Var per_dim = tape.add_scalar(tape.add(log_term, quad), -0.5);
  return tape.sum_cols(per_dim);
}

}  // namespace compass::nn
