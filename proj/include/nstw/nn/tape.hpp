#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nstw/core.hpp"
#include "nstw/nn/params.hpp"

namespace nstw::nn {

struct Var {
  int id = -1;
};

// Reverse-mode tape over dense matrices. Every op appends a node holding its
// value and a closure that pushes the node's gradient to its inputs. Nodes that
// depend on no tracked parameter skip the backward pass entirely.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool grad_set = false;
    Param* sink = nullptr;
    Backward backward;
  };

  Var constant(Matrix v) {
    nodes_.push_back({std::move(v), {}, false, false, nullptr, {}});
    return {static_cast<int>(nodes_.size()) - 1};
  }

  // Leaf bound to a stored parameter. Untracked leaves behave as constants.
  Var param(Param& p, bool track = true) {
    nodes_.push_back({p.value, {}, track, false, track ? &p : nullptr, {}});
    return {static_cast<int>(nodes_.size()) - 1};
  }

  Var op(Matrix value, std::initializer_list<Var> inputs, Backward bw) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[static_cast<std::size_t>(v.id)].needs_grad;
    nodes_.push_back({std::move(value), {}, needs, false, nullptr, needs ? std::move(bw) : Backward{}});
    return {static_cast<int>(nodes_.size()) - 1};
  }

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Matrix& grad(Var v) const { return grad(v.id); }

  void add_grad(Var v, const Matrix& g) {
    auto& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.needs_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
      throw StructureError("tape: gradient shape " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                           " does not match value " + std::to_string(n.value.rows()) + "x" +
                           std::to_string(n.value.cols()));
    if (!n.grad_set) {
      n.grad = g;
      n.grad_set = true;
    } else {
      n.grad += g;
    }
  }

  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_set; }

  // Seeds d(loss)/d(loss) = seed and accumulates into parameter gradient slots.
  void backward(Var loss, double seed = 1.0) {
    const auto& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) throw StructureError("backward: loss must be 1x1");
    if (!l.allFinite()) throw NumericError("backward: loss is not finite");
    add_grad(loss, Matrix::Constant(1, 1, seed));
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || !n.grad_set) continue;
      if (n.backward) n.backward(*this, i);
      if (n.sink) n.sink->accumulate(n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// ---- elementwise and linear ops ----

inline Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.rows())
    throw StructureError("matmul: " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) + " * " +
                         std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  return t.op(A * B, {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(a)) tp.add_grad(a, g * tp.value(b).transpose());
    if (tp.needs_grad(b)) tp.add_grad(b, tp.value(a).transpose() * g);
  });
}

inline Var add(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw StructureError("add: shape mismatch");
  return t.op(A + B, {a, b}, [a, b](Tape& tp, int self) {
    tp.add_grad(a, tp.grad(self));
    tp.add_grad(b, tp.grad(self));
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw StructureError("sub: shape mismatch");
  return t.op(A - B, {a, b}, [a, b](Tape& tp, int self) {
    tp.add_grad(a, tp.grad(self));
    tp.add_grad(b, -tp.grad(self));
  });
}

// a (n x m) + row (1 x m) broadcast over rows.
inline Var add_row(Tape& t, Var a, Var row) {
  const Matrix& A = t.value(a);
  const Matrix& R = t.value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) throw StructureError("add_row: bias width mismatch");
  Matrix out = A;
  out.rowwise() += R.row(0);
  return t.op(std::move(out), {a, row}, [a, row](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    tp.add_grad(a, g);
    if (tp.needs_grad(row)) tp.add_grad(row, g.colwise().sum());
  });
}

inline Var scale(Tape& t, Var a, double s) {
  return t.op(s * t.value(a), {a}, [a, s](Tape& tp, int self) { tp.add_grad(a, s * tp.grad(self)); });
}

inline Var hadamard(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw StructureError("hadamard: shape mismatch");
  return t.op(A.cwiseProduct(B), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(a)) tp.add_grad(a, g.cwiseProduct(tp.value(b)));
    if (tp.needs_grad(b)) tp.add_grad(b, g.cwiseProduct(tp.value(a)));
  });
}

inline Var square(Tape& t, Var a) { return hadamard(t, a, a); }

inline Var tanh(Tape& t, Var a) {
  Matrix y = t.value(a).array().tanh().matrix();
  return t.op(y, {a}, [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{self});
    tp.add_grad(a, (tp.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

inline Var relu(Tape& t, Var a) {
  Matrix y = t.value(a).cwiseMax(0.0);
  return t.op(std::move(y), {a}, [a](Tape& tp, int self) {
    const Matrix& x = tp.value(a);
    tp.add_grad(a, (x.array() > 0.0).select(tp.grad(self), 0.0));
  });
}

inline Var leaky_relu(Tape& t, Var a, double slope) {
  const Matrix& x = t.value(a);
  Matrix y = (x.array() > 0.0).select(x, slope * x);
  return t.op(std::move(y), {a}, [a, slope](Tape& tp, int self) {
    const Matrix& x = tp.value(a);
    const Matrix& g = tp.grad(self);
    tp.add_grad(a, (x.array() > 0.0).select(g, slope * g));
  });
}

inline Var elu(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  Matrix y = (x.array() > 0.0).select(x, x.array().exp() - 1.0);
  return t.op(std::move(y), {a}, [a](Tape& tp, int self) {
    const Matrix& x = tp.value(a);
    const Matrix& g = tp.grad(self);
    tp.add_grad(a, (x.array() > 0.0).select(g, (g.array() * x.array().exp()).matrix()));
  });
}

inline Var sum(Tape& t, Var a) {
  return t.op(Matrix::Constant(1, 1, t.value(a).sum()), {a}, [a](Tape& tp, int self) {
    const Matrix& x = tp.value(a);
    tp.add_grad(a, Matrix::Constant(x.rows(), x.cols(), tp.grad(self)(0, 0)));
  });
}

inline Var mean(Tape& t, Var a) {
  const double n = static_cast<double>(t.value(a).size());
  if (n == 0) throw StructureError("mean: empty input");
  return scale(t, sum(t, a), 1.0 / n);
}

// Mean squared error against a constant target.
inline Var mse(Tape& t, Var pred, const Matrix& target) {
  if (t.value(pred).rows() != target.rows() || t.value(pred).cols() != target.cols())
    throw StructureError("mse: target shape mismatch");
  return mean(t, square(t, sub(t, pred, t.constant(target))));
}

// ---- structural ops ----

inline Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows()) throw StructureError("concat_cols: row count mismatch");
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const auto ca = A.cols();
  const auto cb = B.cols();
  return t.op(std::move(out), {a, b}, [a, b, ca, cb](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(a)) tp.add_grad(a, g.leftCols(ca));
    if (tp.needs_grad(b)) tp.add_grad(b, g.rightCols(cb));
  });
}

inline Var gather_rows(Tape& t, Var a, std::vector<int> rows) {
  const Matrix& A = t.value(a);
  Matrix out(static_cast<Eigen::Index>(rows.size()), A.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= A.rows()) throw StructureError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = A.row(rows[r]);
  }
  return t.op(std::move(out), {a}, [a, rows = std::move(rows)](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    const Matrix& x = tp.value(a);
    Matrix ga = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    tp.add_grad(a, ga);
  });
}

// Rows with segment id s are summed (or averaged) into output row s; rows with
// a negative id are dropped.
inline Var segment_reduce(Tape& t, Var a, std::vector<int> segment, int count, bool average) {
  const Matrix& A = t.value(a);
  if (static_cast<Eigen::Index>(segment.size()) != A.rows()) throw StructureError("segment_reduce: size mismatch");
  Matrix out = Matrix::Zero(count, A.cols());
  std::vector<double> size(static_cast<std::size_t>(count), 0.0);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    const int s = segment[r];
    if (s < 0) continue;
    if (s >= count) throw StructureError("segment_reduce: segment id out of range");
    out.row(s) += A.row(static_cast<Eigen::Index>(r));
    size[static_cast<std::size_t>(s)] += 1.0;
  }
  std::vector<double> factor(static_cast<std::size_t>(count), 1.0);
  if (average)
    for (int s = 0; s < count; ++s) {
      if (size[static_cast<std::size_t>(s)] == 0.0) throw StructureError("segment_reduce: empty segment");
      factor[static_cast<std::size_t>(s)] = 1.0 / size[static_cast<std::size_t>(s)];
      out.row(s) *= factor[static_cast<std::size_t>(s)];
    }
  return t.op(std::move(out), {a},
              [a, segment = std::move(segment), factor = std::move(factor)](Tape& tp, int self) {
                const Matrix& g = tp.grad(self);
                const Matrix& x = tp.value(a);
                Matrix ga = Matrix::Zero(x.rows(), x.cols());
                for (std::size_t r = 0; r < segment.size(); ++r) {
                  const int s = segment[r];
                  if (s < 0) continue;
                  ga.row(static_cast<Eigen::Index>(r)) = factor[static_cast<std::size_t>(s)] * g.row(s);
                }
                tp.add_grad(a, ga);
              });
}

}  // namespace nstw::nn
