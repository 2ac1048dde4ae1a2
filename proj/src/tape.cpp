#include "reccas/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "reccas/kernels.hpp"

namespace reccas {

namespace {

// sigmoid(x) is clamped to [kClampLo, 1-kClampLo]; in logit space the flat
// region starts at |x| > kClampLogit.
constexpr double kClampLo = 1e-6;
const double kClampLogit = std::log((1.0 - kClampLo) / kClampLo);
const double kLogClampLo = std::log(kClampLo);
const double kLogClampHi = std::log1p(-kClampLo);

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid_c(double x) {
  if (x > kClampLogit) return kLogClampHi;
  if (x < -kClampLogit) return kLogClampLo;
  return -softplus(-x);
}

double log1m_sigmoid_c(double x) {
  if (x > kClampLogit) return kLogClampLo;
  if (x < -kClampLogit) return kLogClampHi;
  return -softplus(x);
}

Value Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Value v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("value not recorded on this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Value Tape::leaf_row(int group, std::size_t row) {
  const auto& g = params_->group(group);
  Node n;
  n.op = Op::kLeafRow;
  n.group = group;
  n.row = row;
  n.val.assign(g.row(row), g.row(row) + g.cols);
  return push(std::move(n));
}

Value Tape::leaf_elem(int group, std::size_t row, std::size_t col) {
  const auto& g = params_->group(group);
  Node n;
  n.op = Op::kLeafElem;
  n.group = group;
  n.row = row;
  n.rows = col;  // column stashed in `rows` for element leaves
  n.val.assign(1, g.at(row, col));
  return push(std::move(n));
}

Value Tape::constant(std::vector<double> v) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(v);
  return push(std::move(n));
}

Value Tape::constant(double x) { return constant(std::vector<double>{x}); }

Value Tape::unary(Op op, Value a) {
  const auto& na = node(a);
  Node n;
  n.op = op;
  n.a = a.id;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < na.val.size(); ++i) {
    const double x = na.val[i];
    switch (op) {
      case Op::kSigmoid: n.val[i] = reccas::sigmoid(x); break;
      case Op::kTanh: n.val[i] = std::tanh(x); break;
      case Op::kExp: n.val[i] = std::exp(x); break;
      case Op::kLog:
        if (!(x > 0.0)) throw std::domain_error("log of non-positive value");
        n.val[i] = std::log(x);
        break;
      case Op::kLog1p:
        if (!(x > -1.0)) throw std::domain_error("log1p of value <= -1");
        n.val[i] = std::log1p(x);
        break;
      case Op::kAbs: n.val[i] = std::fabs(x); break;
      case Op::kLogSigC: n.val[i] = reccas::log_sigmoid_c(x); break;
      case Op::kLog1mSigC: n.val[i] = reccas::log1m_sigmoid_c(x); break;
      default: throw std::logic_error("not a unary op");
    }
  }
  return push(std::move(n));
}

Value Tape::binary(Op op, Value a, Value b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.val.size() != nb.val.size()) {
    throw std::invalid_argument("shape mismatch in element-wise op");
  }
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < na.val.size(); ++i) {
    switch (op) {
      case Op::kAdd: n.val[i] = na.val[i] + nb.val[i]; break;
      case Op::kSub: n.val[i] = na.val[i] - nb.val[i]; break;
      case Op::kMul: n.val[i] = na.val[i] * nb.val[i]; break;
      default: throw std::logic_error("not a binary op");
    }
  }
  return push(std::move(n));
}

Value Tape::add(Value a, Value b) { return binary(Op::kAdd, a, b); }
Value Tape::sub(Value a, Value b) { return binary(Op::kSub, a, b); }
Value Tape::mul(Value a, Value b) { return binary(Op::kMul, a, b); }

Value Tape::scale(Value a, double c) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.c = c;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < na.val.size(); ++i) n.val[i] = c * na.val[i];
  return push(std::move(n));
}

Value Tape::shift(Value a, double c) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kShift;
  n.a = a.id;
  n.c = c;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < na.val.size(); ++i) n.val[i] = na.val[i] + c;
  return push(std::move(n));
}

Value Tape::sigmoid(Value a) { return unary(Op::kSigmoid, a); }
Value Tape::tanh_v(Value a) { return unary(Op::kTanh, a); }
Value Tape::exp_v(Value a) { return unary(Op::kExp, a); }
Value Tape::log_v(Value a) { return unary(Op::kLog, a); }
Value Tape::log1p_v(Value a) { return unary(Op::kLog1p, a); }
Value Tape::abs_v(Value a) { return unary(Op::kAbs, a); }
Value Tape::log_sigmoid_c(Value a) { return unary(Op::kLogSigC, a); }
Value Tape::log1m_sigmoid_c(Value a) { return unary(Op::kLog1mSigC, a); }

Value Tape::dot(Value a, Value b) {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.val.size() != nb.val.size()) {
    throw std::invalid_argument("shape mismatch in dot");
  }
  Node n;
  n.op = Op::kDot;
  n.a = a.id;
  n.b = b.id;
  n.val.assign(
      1, kernels::active().dot(na.val.data(), nb.val.data(), na.val.size()));
  return push(std::move(n));
}

Value Tape::sum(Value a) {
  const auto& na = node(a);
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.val.assign(1, kernels::active().sum(na.val.data(), na.val.size()));
  return push(std::move(n));
}

Value Tape::logsumexp(Value a) {
  const auto& na = node(a);
  if (na.val.empty()) throw std::domain_error("logsumexp of empty vector");
  Node n;
  n.op = Op::kLogSumExp;
  n.a = a.id;
  n.val.assign(1, kernels::logsumexp(na.val.data(), na.val.size()));
  return push(std::move(n));
}

Value Tape::pack(const std::vector<Value>& elems) {
  Node n;
  n.op = Op::kPack;
  n.idx.reserve(elems.size());
  n.val.reserve(elems.size());
  for (const Value v : elems) {
    const auto& nv = node(v);
    if (nv.val.size() != 1) {
      throw std::invalid_argument("pack expects scalar operands");
    }
    n.idx.push_back(v.id);
    n.val.push_back(nv.val[0]);
  }
  return push(std::move(n));
}

Value Tape::index(Value a, std::size_t i) {
  const auto& na = node(a);
  if (i >= na.val.size()) throw std::invalid_argument("index out of range");
  Node n;
  n.op = Op::kIndex;
  n.a = a.id;
  n.row = i;
  n.val.assign(1, na.val[i]);
  return push(std::move(n));
}

Value Tape::matvec(int group, std::size_t row_begin, std::size_t rows,
                   Value x) {
  const auto& g = params_->group(group);
  const auto& nx = node(x);
  if (nx.val.size() != g.cols || row_begin + rows > g.rows) {
    throw std::invalid_argument("shape mismatch in matvec");
  }
  Node n;
  n.op = Op::kMatVec;
  n.a = x.id;
  n.group = group;
  n.row = row_begin;
  n.rows = rows;
  n.val.resize(rows);
  const auto& ops = kernels::active();
  for (std::size_t j = 0; j < rows; ++j) {
    n.val[j] = ops.dot(g.row(row_begin + j), nx.val.data(), g.cols);
  }
  return push(std::move(n));
}

Value Tape::gather_dot(Value x, int group, std::vector<int> rows) {
  const auto& g = params_->group(group);
  const auto& nx = node(x);
  if (nx.val.size() != g.cols) {
    throw std::invalid_argument("shape mismatch in gather_dot");
  }
  Node n;
  n.op = Op::kGatherDot;
  n.a = x.id;
  n.group = group;
  n.val.resize(rows.size());
  const auto& ops = kernels::active();
  for (std::size_t j = 0; j < rows.size(); ++j) {
    n.val[j] = ops.dot(g.row(static_cast<std::size_t>(rows[j])),
                       nx.val.data(), g.cols);
  }
  n.idx = std::move(rows);
  return push(std::move(n));
}

Value Tape::gather_elems(int group, std::size_t row, std::vector<int> cols) {
  const auto& g = params_->group(group);
  Node n;
  n.op = Op::kGatherElems;
  n.group = group;
  n.row = row;
  n.val.resize(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    n.val[j] = g.at(row, static_cast<std::size_t>(cols[j]));
  }
  n.idx = std::move(cols);
  return push(std::move(n));
}

double Tape::value(Value v) const {
  const auto& n = node(v);
  if (n.val.size() != 1) throw std::invalid_argument("value() on non-scalar");
  return n.val[0];
}

const std::vector<double>& Tape::vec(Value v) const { return node(v).val; }

void Tape::backward(Value root, double seed, GradBuffer& grads) const {
  const auto& rn = node(root);
  if (rn.val.size() != 1) {
    throw std::invalid_argument("backward root must be scalar");
  }
  std::vector<std::vector<double>> adj(nodes_.size());
  adj[static_cast<std::size_t>(root.id)].assign(1, seed);
  const auto& ops = kernels::active();

  for (int i = root.id; i >= 0; --i) {
    auto& gi = adj[static_cast<std::size_t>(i)];
    if (gi.empty()) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    auto adj_of = [&](int child) -> std::vector<double>& {
      auto& a = adj[static_cast<std::size_t>(child)];
      if (a.empty()) {
        a.assign(nodes_[static_cast<std::size_t>(child)].val.size(), 0.0);
      }
      return a;
    };
    switch (n.op) {
      case Op::kLeafRow: {
        const auto& g = params_->group(n.group);
        ops.axpy(1.0, gi.data(), grads.row(n.group, n.row, g.cols), g.cols);
        break;
      }
      case Op::kLeafElem: {
        const auto& g = params_->group(n.group);
        grads.group(n.group)[n.row * g.cols + n.rows] += gi[0];
        break;
      }
      case Op::kConst:
        break;
      case Op::kAdd: {
        ops.axpy(1.0, gi.data(), adj_of(n.a).data(), gi.size());
        ops.axpy(1.0, gi.data(), adj_of(n.b).data(), gi.size());
        break;
      }
      case Op::kSub: {
        ops.axpy(1.0, gi.data(), adj_of(n.a).data(), gi.size());
        ops.axpy(-1.0, gi.data(), adj_of(n.b).data(), gi.size());
        break;
      }
      case Op::kMul: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        const auto& vb = nodes_[static_cast<std::size_t>(n.b)].val;
        ops.fma_acc(gi.data(), vb.data(), adj_of(n.a).data(), gi.size());
        ops.fma_acc(gi.data(), va.data(), adj_of(n.b).data(), gi.size());
        break;
      }
      case Op::kScale: {
        ops.axpy(n.c, gi.data(), adj_of(n.a).data(), gi.size());
        break;
      }
      case Op::kShift: {
        ops.axpy(1.0, gi.data(), adj_of(n.a).data(), gi.size());
        break;
      }
      case Op::kSigmoid: {
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) {
          ga[j] += gi[j] * n.val[j] * (1.0 - n.val[j]);
        }
        break;
      }
      case Op::kTanh: {
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) {
          ga[j] += gi[j] * (1.0 - n.val[j] * n.val[j]);
        }
        break;
      }
      case Op::kExp: {
        ops.fma_acc(gi.data(), n.val.data(), adj_of(n.a).data(), gi.size());
        break;
      }
      case Op::kLog: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) ga[j] += gi[j] / va[j];
        break;
      }
      case Op::kLog1p: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) {
          ga[j] += gi[j] / (1.0 + va[j]);
        }
        break;
      }
      case Op::kAbs: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) {
          ga[j] += va[j] > 0.0 ? gi[j] : (va[j] < 0.0 ? -gi[j] : 0.0);
        }
        break;
      }
      case Op::kLogSigC: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) {
          if (std::fabs(va[j]) <= kClampLogit) {
            ga[j] += gi[j] * (1.0 - reccas::sigmoid(va[j]));
          }
        }
        break;
      }
      case Op::kLog1mSigC: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < gi.size(); ++j) {
          if (std::fabs(va[j]) <= kClampLogit) {
            ga[j] -= gi[j] * reccas::sigmoid(va[j]);
          }
        }
        break;
      }
      case Op::kDot: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        const auto& vb = nodes_[static_cast<std::size_t>(n.b)].val;
        ops.axpy(gi[0], vb.data(), adj_of(n.a).data(), va.size());
        ops.axpy(gi[0], va.data(), adj_of(n.b).data(), va.size());
        break;
      }
      case Op::kSum: {
        auto& ga = adj_of(n.a);
        for (auto& x : ga) x += gi[0];
        break;
      }
      case Op::kLogSumExp: {
        const auto& va = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& ga = adj_of(n.a);
        for (std::size_t j = 0; j < va.size(); ++j) {
          ga[j] += gi[0] * std::exp(va[j] - n.val[0]);
        }
        break;
      }
      case Op::kPack: {
        for (std::size_t j = 0; j < n.idx.size(); ++j) {
          adj_of(n.idx[j])[0] += gi[j];
        }
        break;
      }
      case Op::kIndex: {
        adj_of(n.a)[n.row] += gi[0];
        break;
      }
      case Op::kMatVec: {
        const auto& g = params_->group(n.group);
        const auto& vx = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& gx = adj_of(n.a);
        for (std::size_t j = 0; j < n.rows; ++j) {
          ops.axpy(gi[j], vx.data(), grads.row(n.group, n.row + j, g.cols),
                   g.cols);
          ops.axpy(gi[j], g.row(n.row + j), gx.data(), g.cols);
        }
        break;
      }
      case Op::kGatherDot: {
        const auto& g = params_->group(n.group);
        const auto& vx = nodes_[static_cast<std::size_t>(n.a)].val;
        auto& gx = adj_of(n.a);
        for (std::size_t j = 0; j < n.idx.size(); ++j) {
          const auto r = static_cast<std::size_t>(n.idx[j]);
          ops.axpy(gi[j], vx.data(), grads.row(n.group, r, g.cols), g.cols);
          ops.axpy(gi[j], g.row(r), gx.data(), g.cols);
        }
        break;
      }
      case Op::kGatherElems: {
        const auto& g = params_->group(n.group);
        auto* grow = grads.row(n.group, n.row, g.cols);
        for (std::size_t j = 0; j < n.idx.size(); ++j) {
          grow[static_cast<std::size_t>(n.idx[j])] += gi[j];
        }
        break;
      }
    }
    gi.clear();
    gi.shrink_to_fit();
  }
}

}  // namespace reccas
