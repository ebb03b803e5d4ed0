#pragma once

#include <span>

#include "compass/nn/tape.hpp"

namespace compass::nn {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Diagonal Gaussian log density summed over dimensions.
double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                        std::span<const double> sample);

/// KL(N(mean_p, var_p) || N(mean_q, var_q)) for diagonal Gaussians, summed over
/// dimensions. Throws InvalidArgument on non-positive variance or length mismatch.
double gaussian_kl(std::span<const double> mean_p, std::span<const double> var_p,
                   std::span<const double> mean_q, std::span<const double> var_q);

/// Per-row log density: mean [n,d], log_std [1,d], sample [n,d] -> [n,1].
Var gaussian_logprob(Tape& tape, Var mean, Var log_std, Var sample);

/// Entropy of a diagonal Gaussian with log_std [1,d] -> 1x1.
Var gaussian_entropy(Tape& tape, Var log_std);

/// Per-row KL(N(mean_p, var_p) || N(mean_q, exp(log_var_q))):
/// mean_p, var_p, mean_q [n,d]; log_var_q [1,d] -> [n,1].
Var gaussian_kl(Tape& tape, Var mean_p, Var var_p, Var mean_q, Var log_var_q);

}  // namespace compass::nn
