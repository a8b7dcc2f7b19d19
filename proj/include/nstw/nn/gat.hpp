#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Sparse>

#include "nstw/core.hpp"
#include "nstw/nn/tape.hpp"

namespace nstw::nn {

// How edge weights enter the attention logits.
enum class EdgeInjection {
  LogWeight,  // logit += ln(w_ij)
  MaskOnly,   // weights only decide who is a neighbor
};

// Row-compressed neighborhoods N_i = { j : w_ij > 0 }.
struct Neighborhoods {
  std::vector<int> offsets{0};
  std::vector<int> cols;
  std::vector<double> weights;

  int nodes() const { return static_cast<int>(offsets.size()) - 1; }
  int edges() const { return static_cast<int>(cols.size()); }

  static Neighborhoods from_dense(const Matrix& a) {
    Neighborhoods n;
    n.offsets.reserve(static_cast<std::size_t>(a.rows()) + 1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double w = a(i, j);
        if (w < 0.0 || !std::isfinite(w)) throw DomainError("attention: edge weights must be finite and >= 0");
        if (w > 0.0) {
          n.cols.push_back(static_cast<int>(j));
          n.weights.push_back(w);
        }
      }
      n.offsets.push_back(static_cast<int>(n.cols.size()));
    }
    return n;
  }

  static Neighborhoods from_sparse(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a) {
    Neighborhoods n;
    n.offsets.reserve(static_cast<std::size_t>(a.rows()) + 1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a, i); it; ++it) {
        const double w = it.value();
        if (w < 0.0 || !std::isfinite(w)) throw DomainError("attention: edge weights must be finite and >= 0");
        if (w > 0.0) {
          n.cols.push_back(static_cast<int>(it.col()));
          n.weights.push_back(w);
        }
      }
      n.offsets.push_back(static_cast<int>(n.cols.size()));
    }
    return n;
  }

  // Appends `other` as a disconnected block (batching several graphs).
  void append_block(const Neighborhoods& other) {
    const int base_node = nodes();
    const int base_edge = edges();
    for (std::size_t i = 1; i < other.offsets.size(); ++i) offsets.push_back(base_edge + other.offsets[i]);
    for (int c : other.cols) cols.push_back(base_node + c);
    weights.insert(weights.end(), other.weights.begin(), other.weights.end());
  }

  // Same structure with every weight set to 1.
  Neighborhoods binary() const {
    Neighborhoods n = *this;
    std::fill(n.weights.begin(), n.weights.end(), 1.0);
    return n;
  }
};

struct AttentionTrace {
  int heads = 0;
  std::vector<double> alpha;  // heads x edges, edge order of the neighborhoods
};

// Multi-head masked attention over projected features z (n x heads*width).
// Per head k and edge (i, j):
//   e_ij = LeakyReLU(a_src_k . z_ik + a_dst_k . z_jk) [+ ln w_ij]
//   alpha_ij = softmax_j e_ij over N_i
//   out_ik = sum_j alpha_ij z_jk
// Heads are concatenated, or averaged when `average` is set.
inline Var graph_attention(Tape& t, Var z, Var a_src, Var a_dst, const Neighborhoods& nb, int heads, double slope,
                           bool average, EdgeInjection injection = EdgeInjection::LogWeight,
                           AttentionTrace* trace = nullptr) {
  const Matrix& Z = t.value(z);
  const Matrix& As = t.value(a_src);
  const Matrix& Ad = t.value(a_dst);
  const int n = static_cast<int>(Z.rows());
  if (heads < 1) throw StructureError("attention: heads must be >= 1");
  if (Z.cols() % heads != 0) throw StructureError("attention: projected width not divisible by heads");
  const auto width = Z.cols() / heads;
  if (As.rows() != heads || As.cols() != width || Ad.rows() != heads || Ad.cols() != width)
    throw StructureError("attention: attention vectors must be heads x head_width");
  if (nb.nodes() != n) throw StructureError("attention: neighborhood count does not match node count");
  const int e = nb.edges();

  std::vector<double> offset(static_cast<std::size_t>(e), 0.0);
  if (injection == EdgeInjection::LogWeight)
    for (int k = 0; k < e; ++k) offset[static_cast<std::size_t>(k)] = std::log(nb.weights[static_cast<std::size_t>(k)]);

  Matrix alpha(heads, e);
  Matrix pre(heads, e);
  Matrix out = Matrix::Zero(n, average ? width : Z.cols());
  for (int h = 0; h < heads; ++h) {
    const auto zk = Z.middleCols(h * width, width);
    const Vector s = zk * As.row(h).transpose();
    const Vector d = zk * Ad.row(h).transpose();
    for (int i = 0; i < n; ++i) {
      const int lo = nb.offsets[static_cast<std::size_t>(i)];
      const int hi = nb.offsets[static_cast<std::size_t>(i) + 1];
      if (lo == hi) throw DomainError("attention: node " + std::to_string(i) + " has an empty neighborhood");
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = lo; k < hi; ++k) {
        const double p = s(i) + d(nb.cols[static_cast<std::size_t>(k)]);
        pre(h, k) = p;
        const double logit = (p > 0.0 ? p : slope * p) + offset[static_cast<std::size_t>(k)];
        alpha(h, k) = logit;
        mx = std::max(mx, logit);
      }
      double z_sum = 0.0;
      for (int k = lo; k < hi; ++k) {
        alpha(h, k) = std::exp(alpha(h, k) - mx);
        z_sum += alpha(h, k);
      }
      for (int k = lo; k < hi; ++k) {
        alpha(h, k) /= z_sum;
        const auto j = nb.cols[static_cast<std::size_t>(k)];
        if (average)
          out.row(i) += (alpha(h, k) / heads) * zk.row(j);
        else
          out.block(i, h * width, 1, width) += alpha(h, k) * zk.row(j);
      }
    }
  }
  if (trace) {
    trace->heads = heads;
    trace->alpha.resize(static_cast<std::size_t>(heads) * static_cast<std::size_t>(e));
    for (int h = 0; h < heads; ++h)
      for (int k = 0; k < e; ++k) trace->alpha[static_cast<std::size_t>(h * e + k)] = alpha(h, k);
  }

  return t.op(std::move(out), {z, a_src, a_dst},
              [z, a_src, a_dst, nb, heads, width, slope, average, alpha = std::move(alpha),
               pre = std::move(pre)](Tape& tp, int self) {
                const Matrix& G = tp.grad(self);
                const Matrix& Z = tp.value(z);
                const Matrix& As = tp.value(a_src);
                const Matrix& Ad = tp.value(a_dst);
                const int n = static_cast<int>(Z.rows());
                Matrix dZ = Matrix::Zero(Z.rows(), Z.cols());
                Matrix dAs = Matrix::Zero(As.rows(), As.cols());
                Matrix dAd = Matrix::Zero(Ad.rows(), Ad.cols());
                for (int h = 0; h < heads; ++h) {
                  const auto zk = Z.middleCols(h * width, width);
                  Matrix gk = average ? Matrix(G / heads) : Matrix(G.middleCols(h * width, width));
                  Vector ds = Vector::Zero(n);
                  Vector dd = Vector::Zero(n);
                  for (int i = 0; i < n; ++i) {
                    const int lo = nb.offsets[static_cast<std::size_t>(i)];
                    const int hi = nb.offsets[static_cast<std::size_t>(i) + 1];
                    double weighted = 0.0;
                    for (int k = lo; k < hi; ++k) {
                      const auto j = nb.cols[static_cast<std::size_t>(k)];
                      weighted += alpha(h, k) * gk.row(i).dot(zk.row(j));
                    }
                    for (int k = lo; k < hi; ++k) {
                      const auto j = nb.cols[static_cast<std::size_t>(k)];
                      const double a = alpha(h, k);
                      const double dalpha = gk.row(i).dot(zk.row(j));
                      const double dlogit = a * (dalpha - weighted);
                      const double dpre = dlogit * (pre(h, k) > 0.0 ? 1.0 : slope);
                      ds(i) += dpre;
                      dd(j) += dpre;
                      dZ.block(j, h * width, 1, width) += a * gk.row(i);
                    }
                  }
                  dZ.middleCols(h * width, width) += ds * As.row(h) + dd * Ad.row(h);
                  dAs.row(h) += ds.transpose() * zk;
                  dAd.row(h) += dd.transpose() * zk;
                }
                if (tp.needs_grad(z)) tp.add_grad(z, dZ);
                if (tp.needs_grad(a_src)) tp.add_grad(a_src, dAs);
                if (tp.needs_grad(a_dst)) tp.add_grad(a_dst, dAd);
              });
}

}  // namespace nstw::nn
