#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace compass::nn {

/// Row-major dense matrix. Activations are laid out [batch, features].
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape-tagged flat storage used at I/O boundaries (checkpoints, manifests).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t count() const;
  /// Throws InvalidArgument when product(shape) != values.size() or any value is non-finite.
  void validate() const;
};

/// A named trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  /// 1 for bias vectors (stored as a single row), 2 for weight matrices.
  int rank = 2;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols, int r = 2)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)), rank(r) {}

  void zero_grad() { grad.setZero(); }
  Tensor to_tensor() const;
  void assign(const Tensor& t);
};

using ParameterRefs = std::vector<Parameter*>;

void zero_grads(const ParameterRefs& params);
/// Checks names are unique; throws InvalidArgument otherwise.
void check_unique_names(const ParameterRefs& params);
/// Global L2 norm of all gradients.
double grad_norm(const ParameterRefs& params);
void scale_grads(const ParameterRefs& params, double factor);

bool all_finite(const Matrix& m);

// Forward kernels shared by the tape and the inference paths so both produce
// bitwise identical values.
namespace kernels {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add_row(const Matrix& a, const Matrix& row);
Matrix add(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);
Matrix add_scalar(const Matrix& a, double c);
Matrix tanh(const Matrix& a);
Matrix sigmoid(const Matrix& a);
}  // namespace kernels

}  // namespace compass::nn
