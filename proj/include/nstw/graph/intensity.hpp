#pragma once

#include <functional>
#include <vector>

#include "nstw/core.hpp"
#include "nstw/graph/nested_graph.hpp"

namespace nstw::graph {

struct Intensity {
  double intra = 0.0;
  double inter = 0.0;
  double total = 0.0;
};

using PairIntensity = std::function<double(int, int)>;

// intra = sum_i sum_{u,v in G_i, u != v} I(u,v)
// inter = sum_{i != j} beta_ij sum_{u in G_i, v in G_j} I(u,v)
inline Intensity information_intensity(const std::vector<std::vector<int>>& subgraphs,
                                       const PairIntensity& intensity, const Matrix& beta) {
  const auto n = static_cast<Eigen::Index>(subgraphs.size());
  if (beta.rows() != n || beta.cols() != n)
    throw StructureError("information_intensity: beta must be " + std::to_string(n) + "x" + std::to_string(n));
  auto checked = [&](int u, int v) {
    const double x = intensity(u, v);
    if (x < 0.0 || !std::isfinite(x)) throw DomainError("information_intensity: I(u,v) must be >= 0");
    return x;
  };
  Intensity r;
  for (const auto& members : subgraphs)
    for (int u : members)
      for (int v : members)
        if (u != v) r.intra += checked(u, v);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double b = beta(i, j);
      if (b < 0.0 || !std::isfinite(b)) throw DomainError("information_intensity: beta must be >= 0");
      double s = 0.0;
      for (int u : subgraphs[static_cast<std::size_t>(i)])
        for (int v : subgraphs[static_cast<std::size_t>(j)]) s += checked(u, v);
      r.inter += b * s;
    }
  }
  r.total = r.intra + r.inter;
  return r;
}

// Defaults: I(u,v) is the V-V edge weight, beta_ij the F-F adjacency entry.
inline Intensity information_intensity(const NestedTrafficGraph& g) {
  const auto& a = g.vv.adjacency;
  return information_intensity(g.platoon_members(), [&](int u, int v) { return a.coeff(u, v); }, g.ff.adjacency);
}

}  // namespace nstw::graph
