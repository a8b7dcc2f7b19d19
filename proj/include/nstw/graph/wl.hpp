#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "nstw/core.hpp"

namespace nstw::graph {

using ColorHistogram = std::map<int, int>;

// 1-WL color refinement run jointly over several graphs so colors share one
// dictionary. Returns each graph's color histogram after `rounds` rounds.
// Edges are the nonzero off-diagonal entries.
inline std::vector<ColorHistogram> wl_color_histograms(const std::vector<Matrix>& graphs, int rounds) {
  std::vector<std::vector<int>> colors(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) colors[g].assign(static_cast<std::size_t>(graphs[g].rows()), 0);

  for (int r = 0; r < rounds; ++r) {
    std::map<std::pair<int, std::vector<int>>, int> dictionary;
    std::vector<std::vector<int>> next(graphs.size());
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const auto& a = graphs[g];
      next[g].resize(colors[g].size());
      for (Eigen::Index v = 0; v < a.rows(); ++v) {
        std::vector<int> neigh;
        for (Eigen::Index u = 0; u < a.cols(); ++u)
          if (u != v && a(v, u) != 0.0) neigh.push_back(colors[g][static_cast<std::size_t>(u)]);
        std::sort(neigh.begin(), neigh.end());
        auto key = std::make_pair(colors[g][static_cast<std::size_t>(v)], std::move(neigh));
        auto [it, inserted] = dictionary.try_emplace(std::move(key), static_cast<int>(dictionary.size()));
        next[g][static_cast<std::size_t>(v)] = it->second;
      }
    }
    colors = std::move(next);
  }

  std::vector<ColorHistogram> out(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g)
    for (int c : colors[g]) ++out[g][c];
  return out;
}

}  // namespace nstw::graph
