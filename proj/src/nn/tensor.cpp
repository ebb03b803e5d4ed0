#include "compass/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "compass/common/errors.hpp"

namespace compass::nn {

std::size_t Tensor::count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void Tensor::validate() const {
  for (auto d : shape)
    if (d == 0) throw InvalidArgument("tensor dimension must be positive");
  if (count() != values.size())
    throw InvalidArgument("tensor shape does not match value count");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("tensor holds a non-finite value");
}

Tensor Parameter::to_tensor() const {
  Tensor t;
  if (rank == 1) {
    t.shape = {static_cast<std::size_t>(value.size())};
  } else {
    t.shape = {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  }
  t.values.assign(value.data(), value.data() + value.size());
  return t;
}

void Parameter::assign(const Tensor& t) {
  t.validate();
  const bool ok = rank == 1 ? (t.shape.size() == 1 && t.shape[0] == static_cast<std::size_t>(value.size()))
                            : (t.shape.size() == 2 && t.shape[0] == static_cast<std::size_t>(value.rows()) &&
                               t.shape[1] == static_cast<std::size_t>(value.cols()));
  if (!ok) throw InvalidArgument("shape mismatch loading parameter '" + name + "'");
  std::copy(t.values.begin(), t.values.end(), value.data());
}

void zero_grads(const ParameterRefs& params) {
  for (auto* p : params) p->zero_grad();
}

void check_unique_names(const ParameterRefs& params) {
  std::unordered_set<std::string> seen;
  for (auto* p : params)
    if (!seen.insert(p->name).second) throw InvalidArgument("duplicate parameter name '" + p->name + "'");
}

double grad_norm(const ParameterRefs& params) {
  double sq = 0.0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void scale_grads(const ParameterRefs& params, double factor) {
  for (auto* p : params) p->grad *= factor;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace kernels {

Matrix matmul(const Matrix& a, const Matrix& b) { return a * b; }
Matrix add_row(const Matrix& a, const Matrix& row) { return a.rowwise() + row.row(0); }
Matrix add(const Matrix& a, const Matrix& b) { return a + b; }
Matrix mul(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b); }
Matrix scale(const Matrix& a, double c) { return a * c; }
Matrix add_scalar(const Matrix& a, double c) { return a.array() + c; }
Matrix tanh(const Matrix& a) { return a.array().tanh(); }
Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse(); }

}  // namespace kernels

}  // namespace compass::nn
