#pragma once

#include <vector>

#include "nstw/core.hpp"

namespace nstw::graph {

inline Matrix graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  Matrix a = Matrix::Zero(n, n);
  for (auto [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

// Two disjoint triangles {0,1,2}, {3,4,5}: sparse interaction between pairs.
inline Matrix two_triangles() {
  return graph_from_edges(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}});
}

// Six-cycle 0-1-2-3-4-5-0: the same vehicles in one closed formation.
inline Matrix hexagon() {
  return graph_from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}});
}

// Formation-level views of the two layouts: closed vs open triangle.
inline Matrix closed_triangle() { return graph_from_edges(3, {{0, 1}, {1, 2}, {2, 0}}); }
inline Matrix open_triangle() { return graph_from_edges(3, {{0, 1}, {1, 2}}); }

}  // namespace nstw::graph
