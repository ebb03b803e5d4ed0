#include "compass/nn/tape.hpp"

#include <cmath>
#include <string>

#include "compass/common/errors.hpp"

namespace compass::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string("tape: ") + what);
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  require(m.size() == 1, "scalar() on a non-scalar value");
  return m(0, 0);
}

Var Tape::constant(Matrix value) {
  Node n = make(Op::Constant);
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var{it->second};
  Node n = make(Op::Param);
  n.value = p.value;
  n.param = &p;
  Var v = push(std::move(n));
  param_ids_[&p] = v.id;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul inner dimensions differ");
  Node n = make(Op::MatMul, a.id, b.id);
  n.value = kernels::matmul(value(a), value(b));
  return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row shape mismatch");
  Node n = make(Op::AddRow, a.id, row.id);
  n.value = kernels::add_row(value(a), value(row));
  return push(std::move(n));
}

Var Tape::broadcast_rows(Var row, Eigen::Index rows) {
  require(value(row).rows() == 1, "broadcast_rows expects a single row");
  Node n = make(Op::BroadcastRows, row.id);
  n.value = value(row).replicate(rows, 1);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add shape mismatch");
  Node n = make(Op::Add, a.id, b.id);
  n.value = kernels::add(value(a), value(b));
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub shape mismatch");
  Node n = make(Op::Sub, a.id, b.id);
  n.value = value(a) - value(b);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul shape mismatch");
  Node n = make(Op::Mul, a.id, b.id);
  n.value = kernels::mul(value(a), value(b));
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n = make(Op::Scale, a.id);
  n.s0 = c;
  n.value = kernels::scale(value(a), c);
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double c) {
  Node n = make(Op::AddScalar, a.id);
  n.value = kernels::add_scalar(value(a), c);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n = make(Op::Tanh, a.id);
  n.value = kernels::tanh(value(a));
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n = make(Op::Sigmoid, a.id);
  n.value = kernels::sigmoid(value(a));
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n = make(Op::Exp, a.id);
  n.value = value(a).array().exp();
  return push(std::move(n));
}

Var Tape::log(Var a) {
  Node n = make(Op::Log, a.id);
  n.value = value(a).array().log();
  return push(std::move(n));
}

Var Tape::square(Var a) {
  Node n = make(Op::Square, a.id);
  n.value = value(a).array().square();
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  require(value(a).rows() == value(b).rows(), "concat_cols row mismatch");
  Node n = make(Op::ConcatCols, a.id, b.id);
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  n.value.resize(va.rows(), va.cols() + vb.cols());
  n.value << va, vb;
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 1 && start + count <= value(a).cols(), "slice_cols out of range");
  Node n = make(Op::SliceCols, a.id);
  n.i0 = start;
  n.value = value(a).middleCols(start, count);
  return push(std::move(n));
}

Var Tape::minimum(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "minimum shape mismatch");
  Node n = make(Op::Minimum, a.id, b.id);
  n.value = value(a).cwiseMin(value(b));
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  require(lo <= hi, "clamp bounds inverted");
  Node n = make(Op::Clamp, a.id);
  n.s0 = lo;
  n.s1 = hi;
  n.value = value(a).cwiseMax(lo).cwiseMin(hi);
  return push(std::move(n));
}

Var Tape::sum_cols(Var a) {
  Node n = make(Op::SumCols, a.id);
  n.value = value(a).rowwise().sum();
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n = make(Op::Sum, a.id);
  n.value = Matrix::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  Node n = make(Op::Mean, a.id);
  n.value = Matrix::Constant(1, 1, value(a).mean());
  return push(std::move(n));
}

Var Tape::masked_mean_rows(Var a, const Matrix& mask) {
  require(mask.rows() == value(a).rows() && mask.cols() == 1, "masked_mean_rows mask shape");
  Node n = make(Op::MaskedMeanRows, a.id);
  const double denom = std::max(1.0, mask.sum()) * static_cast<double>(value(a).cols());
  n.s0 = denom;
  n.aux = mask;
  n.value = Matrix::Constant(1, 1, (value(a).array().colwise() * mask.col(0).array()).sum() / denom);
  return push(std::move(n));
}

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::AddRow: return "add_row";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceCols: return "slice_cols";
    case Op::Minimum: return "minimum";
    case Op::Clamp: return "clamp";
    case Op::SumCols: return "sum_cols";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::MaskedMeanRows: return "masked_mean_rows";
  }
  return "?";
}

void Tape::backward(Var loss) {
  require(value(loss).size() == 1, "backward() needs a scalar loss");
  if (!std::isfinite(scalar(loss))) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!nodes_[i].value.allFinite()) {
        throw NumericError("non-finite value produced by op '" + std::string(op_name(nodes_[i].op)) +
                           "' (node " + std::to_string(i) + ")");
      }
    }
    throw NumericError("non-finite loss");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_of(loss.id).setOnes();

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param:
        n.param->grad += g;
        break;
      case Op::MatMul:
        grad_of(n.a).noalias() += g * nodes_[n.b].value.transpose();
        grad_of(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::AddRow:
        grad_of(n.a) += g;
        grad_of(n.b) += g.colwise().sum();
        break;
      case Op::BroadcastRows:
        grad_of(n.a) += g.colwise().sum();
        break;
      case Op::Add:
        grad_of(n.a) += g;
        grad_of(n.b) += g;
        break;
      case Op::Sub:
        grad_of(n.a) += g;
        grad_of(n.b) -= g;
        break;
      case Op::Mul:
        grad_of(n.a) += g.cwiseProduct(nodes_[n.b].value);
        grad_of(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::Scale:
        grad_of(n.a) += g * n.s0;
        break;
      case Op::AddScalar:
        grad_of(n.a) += g;
        break;
      case Op::Tanh:
        grad_of(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Sigmoid:
        grad_of(n.a).array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::Exp:
        grad_of(n.a).array() += g.array() * n.value.array();
        break;
      case Op::Log:
        grad_of(n.a).array() += g.array() / nodes_[n.a].value.array();
        break;
      case Op::Square:
        grad_of(n.a).array() += 2.0 * g.array() * nodes_[n.a].value.array();
        break;
      case Op::ConcatCols: {
        const Eigen::Index ca = nodes_[n.a].value.cols();
        grad_of(n.a) += g.leftCols(ca);
        grad_of(n.b) += g.rightCols(g.cols() - ca);
        break;
      }
      case Op::SliceCols:
        grad_of(n.a).middleCols(n.i0, g.cols()) += g;
        break;
      case Op::Minimum: {
        const Matrix& va = nodes_[n.a].value;
        const Matrix& vb = nodes_[n.b].value;
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          if (va.data()[i] <= vb.data()[i]) ga.data()[i] += g.data()[i];
          else gb.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::Clamp: {
        const Matrix& va = nodes_[n.a].value;
        Matrix& ga = grad_of(n.a);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          const double x = va.data()[i];
          if (x >= n.s0 && x <= n.s1) ga.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::SumCols:
        grad_of(n.a) += g.replicate(1, nodes_[n.a].value.cols());
        break;
      case Op::Sum:
        grad_of(n.a).array() += g(0, 0);
        break;
      case Op::Mean:
        grad_of(n.a).array() += g(0, 0) / static_cast<double>(nodes_[n.a].value.size());
        break;
      case Op::MaskedMeanRows: {
        Matrix& ga = grad_of(n.a);
        ga.array().colwise() += n.aux.col(0).array() * (g(0, 0) / n.s0);
        break;
      }
    }
  }
}

}  // namespace compass::nn
