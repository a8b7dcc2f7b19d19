#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nstw/core.hpp"
#include "nstw/graph/nested_graph.hpp"

namespace nstw::graph {

// L = D - A over the off-diagonal structure; self-loops do not contribute.
inline Matrix laplacian(const Matrix& adjacency) {
  const auto n = adjacency.rows();
  Matrix a = adjacency;
  a.diagonal().setZero();
  Matrix l = -a;
  for (Eigen::Index i = 0; i < n; ++i) l(i, i) = a.row(i).sum();
  return l;
}

inline void require_symmetric(const Matrix& a, const char* who) {
  if (a.rows() != a.cols()) throw DomainError(std::string(who) + ": matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError(std::string(who) + ": adjacency is not symmetric");
  if ((a.array() < 0.0).any()) throw DomainError(std::string(who) + ": negative edge weight");
}

inline Vector laplacian_spectrum(const Matrix& adjacency) {
  require_symmetric(adjacency, "laplacian_spectrum");
  if (adjacency.rows() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian(adjacency), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

// Shannon entropy of the normalized Laplacian spectrum, in nats.
// Zero eigenvalues contribute nothing; an edgeless graph has entropy 0.
inline double entropy_of_spectrum(const Vector& eig) {
  const double total = eig.sum();
  if (!(total > 0.0)) return 0.0;
  const double eps = 1e-12 * std::max(1.0, eig.cwiseAbs().maxCoeff());
  double h = 0.0;
  for (double lam : eig) {
    if (lam <= eps) continue;
    const double p = lam / total;
    h -= p * std::log(p);
  }
  return h;
}

inline double spectral_entropy(const Matrix& adjacency) {
  return entropy_of_spectrum(laplacian_spectrum(adjacency));
}

// Weighted average of subgraph entropies; weights must be a probability vector.
inline double nested_entropy(const std::vector<double>& entropies, const std::vector<double>& weights) {
  if (entropies.size() != weights.size())
    throw DomainError("nested_entropy: entropy and weight counts differ");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw DomainError("nested_entropy: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("nested_entropy: weights must sum to 1");
  double h = 0.0;
  for (std::size_t i = 0; i < entropies.size(); ++i) h += weights[i] * entropies[i];
  return h;
}

inline double nested_entropy_of(const std::vector<Matrix>& subgraphs, std::vector<double> weights = {}) {
  if (weights.empty() && !subgraphs.empty())
    weights.assign(subgraphs.size(), 1.0 / static_cast<double>(subgraphs.size()));
  std::vector<double> h;
  h.reserve(subgraphs.size());
  for (const auto& a : subgraphs) h.push_back(spectral_entropy(a));
  return nested_entropy(h, weights);
}

struct EntropyLevels {
  bool platoon_subgraphs = true;  // one V-V block per platoon
  bool formation_graph = true;    // the F-F graph
};

struct EntropyReport {
  std::vector<double> platoon_entropies;
  double formation_entropy = 0.0;
  double nested = 0.0;
};

inline EntropyReport nested_entropy(const NestedTrafficGraph& g, EntropyLevels levels = {},
                                    std::vector<double> weights = {}) {
  EntropyReport r;
  std::vector<Matrix> subs;
  if (levels.platoon_subgraphs)
    for (const auto& members : g.platoon_members()) subs.push_back(platoon_subgraph(g, members));
  if (levels.formation_graph) subs.push_back(g.ff.adjacency);
  std::vector<double> h;
  for (const auto& a : subs) h.push_back(spectral_entropy(a));
  if (levels.platoon_subgraphs)
    r.platoon_entropies.assign(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(g.platoon_count()));
  if (levels.formation_graph) r.formation_entropy = h.back();
  if (weights.empty() && !h.empty()) weights.assign(h.size(), 1.0 / static_cast<double>(h.size()));
  r.nested = nested_entropy(h, weights);
  return r;
}

}  // namespace nstw::graph
