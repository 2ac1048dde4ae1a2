#pragma once

#include <cstddef>
#include <vector>

#include "reccas/param_store.hpp"

namespace reccas {

// Handle to a value recorded on a Tape. Values are small vectors (a scalar is
// a length-1 vector); shapes are fixed when the node is created.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Eager reverse-mode tape over a ParamStore. Forward computation happens at
// node creation; backward(root, seed, grads) accumulates d(root)/d(param)
// into a GradBuffer. One tape per episode; tapes never outlive the store
// they read from.
//
// Probability clamps: log_sigmoid_c / log1m_sigmoid_c compute log k and
// log(1-k) for k = sigmoid(x) clamped to [1e-6, 1-1e-6]; outside the clamp
// the derivative is zero (flat region), keeping every downstream log finite.
class Tape {
 public:
  explicit Tape(const ParamStore& params) : params_(&params) {}

  // Leaves.
  Value leaf_row(int group, std::size_t row);
  Value leaf_elem(int group, std::size_t row, std::size_t col);
  Value constant(std::vector<double> v);
  Value constant(double x);

  // Element-wise (operands must share shape).
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double c);   // c * a
  Value shift(Value a, double c);   // a + c
  Value sigmoid(Value a);
  Value tanh_v(Value a);
  Value exp_v(Value a);
  Value log_v(Value a);     // domain error on non-positive input
  Value log1p_v(Value a);   // domain error on input <= -1
  Value abs_v(Value a);
  Value log_sigmoid_c(Value a);
  Value log1m_sigmoid_c(Value a);

  // Reductions / shape ops.
  Value dot(Value a, Value b);                 // scalar
  Value sum(Value a);                          // scalar
  Value logsumexp(Value a);                    // scalar, shifted form
  Value pack(const std::vector<Value>& elems); // scalars -> vector
  Value index(Value a, std::size_t i);         // vector element -> scalar

  // Parameter-group linear algebra.
  // matvec: rows [row_begin, row_begin+rows) of `group` times vector x.
  Value matvec(int group, std::size_t row_begin, std::size_t rows, Value x);
  // gather_dot: out[j] = <x, group[rows[j]]>.
  Value gather_dot(Value x, int group, std::vector<int> rows);
  // gather_elems: out[j] = group[row][cols[j]].
  Value gather_elems(int group, std::size_t row, std::vector<int> cols);

  double value(Value v) const;                   // scalar read
  const std::vector<double>& vec(Value v) const; // vector read
  std::size_t node_count() const { return nodes_.size(); }

  // Accumulates seed * d(root)/d(params) into `grads` (no zeroing).
  void backward(Value root, double seed, GradBuffer& grads) const;

 private:
  enum class Op {
    kLeafRow, kLeafElem, kConst,
    kAdd, kSub, kMul, kScale, kShift,
    kSigmoid, kTanh, kExp, kLog, kLog1p, kAbs,
    kLogSigC, kLog1mSigC,
    kDot, kSum, kLogSumExp, kPack, kIndex,
    kMatVec, kGatherDot, kGatherElems,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int group = -1;
    std::size_t row = 0;
    std::size_t rows = 0;
    double c = 0.0;
    std::vector<int> idx;      // pack children, gather rows/cols
    std::vector<double> val;
  };

  Value push(Node node);
  const Node& node(Value v) const;
  Value unary(Op op, Value a);
  Value binary(Op op, Value a, Value b);

  const ParamStore* params_;
  std::vector<Node> nodes_;
};

// Plain-double twins of the clamped log-sigmoid pair, for the untraced
// model/evaluation paths. Must match the tape ops bit-for-bit.
double log_sigmoid_c(double x);
double log1m_sigmoid_c(double x);
double sigmoid(double x);

}  // namespace reccas
