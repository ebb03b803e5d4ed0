#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "compass/nn/tensor.hpp"

namespace compass::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
};

/// Reverse-mode differentiation over whole-matrix operations.
///
/// Every op evaluates eagerly and records its inputs. backward() walks the
/// record in reverse and accumulates into Parameter::grad for every parameter
/// leaf touched by the loss. A tape is single-use and single-threaded.
class Tape {
 public:
  Var constant(Matrix value);
  /// Leaf bound to a parameter; repeated calls return the same handle.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  /// a + row, broadcasting a 1xN row across the rows of a.
  Var add_row(Var a, Var row);
  /// 1xN row repeated to rows x N.
  Var broadcast_rows(Var row, Eigen::Index rows);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var minimum(Var a, Var b);
  Var clamp(Var a, double lo, double hi);
  /// Per-row sum over columns: [r, c] -> [r, 1].
  Var sum_cols(Var a);
  /// Sum of all entries -> 1x1.
  Var sum(Var a);
  /// Mean of all entries -> 1x1.
  Var mean(Var a);
  /// Row-wise mean weighted by a constant 0/1 mask [r,1]: sum(mask*a)/max(1,sum(mask)) -> 1x1 over all entries.
  Var masked_mean_rows(Var a, const Matrix& mask);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into parameters.
  /// Throws NumericError naming the first op that produced a non-finite value
  /// when the loss is not finite.
  void backward(Var loss);

 private:
  enum class Op : std::uint8_t {
    Constant, Param, MatMul, AddRow, BroadcastRows, Add, Sub, Mul, Scale, AddScalar,
    Tanh, Sigmoid, Exp, Log, Square, ConcatCols, SliceCols, Minimum, Clamp,
    SumCols, Sum, Mean, MaskedMeanRows
  };
  struct Node {
    Op op = Op::Constant;
    int a = -1;
    int b = -1;
    double s0 = 0.0;
    double s1 = 0.0;
    Eigen::Index i0 = 0;
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    Matrix aux;
  };

  static Node make(Op op, int a = -1, int b = -1) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    return n;
  }
  Var push(Node n);
  Matrix& grad_of(int id);
  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_ids_;
};

}  // namespace compass::nn
