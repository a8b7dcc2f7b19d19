#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "nstw/core.hpp"
#include "nstw/graph/st_weight.hpp"
#include "nstw/sim/types.hpp"

namespace nstw::graph {

using SparseAdjacency = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr int kVehicleFeatures = 6;   // [X, V, I, dX, dV, a]
inline constexpr int kPlatoonFeatures = 4;   // [V_cav, dX_cav, mean V, mean a]

// Divisors applied to raw features before storage.
struct FeatureNorm {
  double road_length = 2.5e4;
  double speed = 40.0;
  double accel = 4.5;
  double gap = 100.0;
};

inline double encode_kind(sim::VehicleKind k) {
  switch (k) {
    case sim::VehicleKind::TrajectoryLeader: return 0.0;
    case sim::VehicleKind::CAV: return 0.5;
    case sim::VehicleKind::AV: return 1.0;
  }
  return 1.0;
}

// How V-V edge weights are produced from connectivity.
enum class EdgeWeighting {
  Binary,          // 1 on every connected pair
  SpatioTemporal,  // st_weight of the pair's distance and speed difference
};

struct VVGraph {
  Matrix node_features;       // M x 6
  SparseAdjacency adjacency;  // M x M
  std::vector<sim::VehicleKind> kinds;
};

struct FFGraph {
  Matrix node_features;  // N x 4
  Matrix adjacency;      // N x N
};

struct NestedTrafficGraph {
  VVGraph vv;
  FFGraph ff;
  std::vector<int> membership;  // vehicle id -> platoon id; -1 for the trajectory leader
  std::vector<int> cav_nodes;   // platoon id -> CAV vehicle id

  int vehicle_count() const { return static_cast<int>(vv.node_features.rows()); }
  int platoon_count() const { return static_cast<int>(ff.node_features.rows()); }

  std::vector<std::vector<int>> platoon_members() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(platoon_count()));
    for (std::size_t v = 0; v < membership.size(); ++v)
      if (membership[v] >= 0) out[static_cast<std::size_t>(membership[v])].push_back(static_cast<int>(v));
    return out;
  }
};

// Pairwise V-V link rule: CAVs in the same RSU cell link to each other; a CAV
// links to any non-connected vehicle (AV or the leader) within comm reach;
// non-connected vehicles never link to each other.
inline bool vv_connected(const sim::WorldState& w, std::size_t i, std::size_t j) {
  using sim::VehicleKind;
  const auto& a = w.vehicles[i];
  const auto& b = w.vehicles[j];
  const bool ca = a.kind == VehicleKind::CAV;
  const bool cb = b.kind == VehicleKind::CAV;
  if (ca && cb) return w.rsu_cell(a.position) == w.rsu_cell(b.position);
  if (ca || cb) return std::abs(a.position - b.position) <= w.comm_reach;
  return false;
}

inline VVGraph build_vv_graph(const sim::WorldState& w, const StWeightParams& p,
                              EdgeWeighting weighting = EdgeWeighting::SpatioTemporal,
                              const FeatureNorm& norm = {}) {
  if (w.collision_flag) throw StructureError("build_vv_graph: world is in collision");
  const auto m = w.vehicles.size();
  VVGraph g;
  g.node_features.resize(static_cast<Eigen::Index>(m), kVehicleFeatures);
  g.kinds.reserve(m);
  const double lead_x = w.vehicles.front().position;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& v = w.vehicles[j];
    double gap = p.d_max;
    double dv = 0.0;
    if (j > 0) {
      gap = w.gap(j);
      dv = v.speed - w.vehicles[j - 1].speed;
    }
    auto row = g.node_features.row(static_cast<Eigen::Index>(j));
    row << (v.position - lead_x) / norm.road_length, v.speed / norm.speed, encode_kind(v.kind),
        gap / norm.gap, dv / norm.speed, v.accel / norm.accel;
    g.kinds.push_back(v.kind);
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m * 3);
  for (std::size_t i = 0; i < m; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (w.vehicles[i].kind != sim::VehicleKind::CAV) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      // CAV-CAV pairs are emitted once, from the lower index.
      if (w.vehicles[j].kind == sim::VehicleKind::CAV && j < i) continue;
      if (!vv_connected(w, i, j)) continue;
      double weight = 1.0;
      if (weighting == EdgeWeighting::SpatioTemporal) {
        const double dd = std::abs(w.vehicles[i].position - w.vehicles[j].position);
        weight = st_weight(dd, w.vehicles[i].speed - w.vehicles[j].speed, p);
      }
      if (weight <= 0.0) continue;
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), weight);
      trip.emplace_back(static_cast<int>(j), static_cast<int>(i), weight);
    }
  }
  g.adjacency.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  g.adjacency.setFromTriplets(trip.begin(), trip.end());
  return g;
}

enum class PlatoonWeighting {
  Binary,            // 1 within a shared RSU cell
  CentroidSpatioTemporal,  // st_weight on platoon centroid distance/speed, within a shared cell
};

inline FFGraph build_ff_graph(const sim::WorldState& w, const StWeightParams& p = {},
                              PlatoonWeighting weighting = PlatoonWeighting::Binary,
                              const FeatureNorm& norm = {}) {
  const auto n = w.groups.size();
  FFGraph g;
  g.node_features.resize(static_cast<Eigen::Index>(n), kPlatoonFeatures);
  g.adjacency = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> centroid_x(n), centroid_v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& grp = w.groups[i];
    const auto cav = static_cast<std::size_t>(grp.cav);
    if (cav == 0 || cav >= w.vehicles.size()) throw ConfigError("build_ff_graph: bad CAV id in group");
    double sum_v = w.vehicles[cav].speed;
    double sum_a = w.vehicles[cav].accel;
    double sum_x = w.vehicles[cav].position;
    for (int av : grp.avs) {
      const auto& v = w.vehicles[static_cast<std::size_t>(av)];
      sum_v += v.speed;
      sum_a += v.accel;
      sum_x += v.position;
    }
    const double count = 1.0 + static_cast<double>(grp.avs.size());
    centroid_x[i] = sum_x / count;
    centroid_v[i] = sum_v / count;
    g.node_features.row(static_cast<Eigen::Index>(i)) << w.vehicles[cav].speed / norm.speed,
        w.gap(cav) / norm.gap, (sum_v / count) / norm.speed, (sum_a / count) / norm.accel;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ci = static_cast<std::size_t>(w.groups[i].cav);
      const auto cj = static_cast<std::size_t>(w.groups[j].cav);
      if (w.rsu_cell(w.vehicles[ci].position) != w.rsu_cell(w.vehicles[cj].position)) continue;
      double weight = 1.0;
      if (weighting == PlatoonWeighting::CentroidSpatioTemporal)
        weight = st_weight(std::abs(centroid_x[i] - centroid_x[j]), centroid_v[i] - centroid_v[j], p);
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      g.adjacency(a, b) = weight;
      g.adjacency(b, a) = weight;
    }
  }
  return g;
}

// Validates and merges the two levels.
inline NestedTrafficGraph nest(VVGraph vv, FFGraph ff, std::vector<int> membership) {
  const auto m = vv.node_features.rows();
  const auto n = ff.node_features.rows();
  if (vv.node_features.cols() != kVehicleFeatures || ff.node_features.cols() != kPlatoonFeatures)
    throw StructureError("nest: unexpected feature widths");
  if (vv.adjacency.rows() != m || vv.adjacency.cols() != m)
    throw StructureError("nest: V-V adjacency is not M x M");
  if (ff.adjacency.rows() != n || ff.adjacency.cols() != n)
    throw StructureError("nest: F-F adjacency is not N x N");
  if (static_cast<Eigen::Index>(vv.kinds.size()) != m)
    throw StructureError("nest: vehicle kinds do not match V-V rows");
  if (static_cast<Eigen::Index>(membership.size()) != m)
    throw StructureError("nest: membership covers " + std::to_string(membership.size()) + " of " +
                         std::to_string(m) + " vehicles");
  std::vector<int> cav_nodes(static_cast<std::size_t>(n), -1);
  std::vector<int> sizes(static_cast<std::size_t>(n), 0);
  for (std::size_t v = 0; v < membership.size(); ++v) {
    const int p = membership[v];
    const bool leader = vv.kinds[v] == sim::VehicleKind::TrajectoryLeader;
    if (leader) {
      if (p != -1) throw StructureError("nest: trajectory leader cannot belong to a platoon");
      continue;
    }
    if (p < 0 || p >= n)
      throw StructureError("nest: vehicle " + std::to_string(v) + " has no valid platoon");
    ++sizes[static_cast<std::size_t>(p)];
    if (vv.kinds[v] == sim::VehicleKind::CAV) {
      if (cav_nodes[static_cast<std::size_t>(p)] != -1)
        throw StructureError("nest: platoon " + std::to_string(p) + " has two CAVs");
      cav_nodes[static_cast<std::size_t>(p)] = static_cast<int>(v);
    }
  }
  for (std::size_t p = 0; p < cav_nodes.size(); ++p) {
    if (sizes[p] == 0) throw StructureError("nest: platoon " + std::to_string(p) + " is empty");
    if (cav_nodes[p] == -1) throw StructureError("nest: platoon " + std::to_string(p) + " has no CAV");
  }
  NestedTrafficGraph g;
  g.vv = std::move(vv);
  g.ff = std::move(ff);
  g.membership = std::move(membership);
  g.cav_nodes = std::move(cav_nodes);
  return g;
}

inline std::vector<int> membership_of(const sim::WorldState& w) {
  std::vector<int> m(w.vehicles.size(), -1);
  for (const auto& v : w.vehicles) m[static_cast<std::size_t>(v.id)] = v.group;
  return m;
}

inline NestedTrafficGraph build_nested_graph(const sim::WorldState& w, const StWeightParams& p,
                                             EdgeWeighting vv_weighting = EdgeWeighting::SpatioTemporal,
                                             PlatoonWeighting ff_weighting = PlatoonWeighting::Binary,
                                             const FeatureNorm& norm = {}) {
  return nest(build_vv_graph(w, p, vv_weighting, norm), build_ff_graph(w, p, ff_weighting, norm),
              membership_of(w));
}

// Induced V-V block for one platoon, dense.
inline Matrix platoon_subgraph(const NestedTrafficGraph& g, const std::vector<int>& members) {
  const auto k = static_cast<Eigen::Index>(members.size());
  Matrix out(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      out(a, b) = g.vv.adjacency.coeff(members[static_cast<std::size_t>(a)], members[static_cast<std::size_t>(b)]);
  return out;
}

struct NestedHidden {
  Matrix vehicles;  // M x H, one row per vehicle
  Matrix platoons;  // N x H, mean of member rows
};

// Nested message passing. For each vehicle v of platoon w:
//   m_v = sum over u in N(v | subgraph w) of message(h_v, h_u, e_vu)
//   h'_v = update(h_v, m_v)
// Neighborhoods are restricted to the vehicle's own platoon subgraph (self-loop
// included); the leader only sees itself. Each platoon's global-graph node is
// fed the mean of its members' updated states.
template <class Message, class Update>
NestedHidden nested_message_pass(const NestedTrafficGraph& g, const Matrix& hidden, Message&& message,
                                 Update&& update) {
  const auto m = g.vehicle_count();
  if (hidden.rows() != m) throw StructureError("nested_message_pass: hidden rows != vehicle count");
  NestedHidden out;
  for (Eigen::Index v = 0; v < m; ++v) {
    const RowVector hv = hidden.row(v);
    const int platoon = g.membership[static_cast<std::size_t>(v)];
    RowVector agg;
    bool first = true;
    auto accumulate = [&](const RowVector& msg) {
      if (first) {
        agg = msg;
        first = false;
      } else {
        if (msg.size() != agg.size()) throw StructureError("nested_message_pass: message width changed");
        agg += msg;
      }
    };
    if (platoon < 0) {
      accumulate(message(hv, hv, 1.0));
    } else {
      for (SparseAdjacency::InnerIterator it(g.vv.adjacency, v); it; ++it) {
        const auto u = it.col();
        if (g.membership[static_cast<std::size_t>(u)] != platoon) continue;
        accumulate(message(hv, RowVector(hidden.row(u)), it.value()));
      }
      if (first) throw StructureError("nested_message_pass: vehicle without self-loop");
    }
    const RowVector hn = update(hv, agg);
    if (v == 0) out.vehicles.resize(m, hn.size());
    if (hn.size() != out.vehicles.cols()) throw StructureError("nested_message_pass: update width changed");
    out.vehicles.row(v) = hn;
  }
  const auto members = g.platoon_members();
  out.platoons = Matrix::Zero(g.platoon_count(), out.vehicles.cols());
  for (std::size_t p = 0; p < members.size(); ++p) {
    for (int v : members[p]) out.platoons.row(static_cast<Eigen::Index>(p)) += out.vehicles.row(v);
    out.platoons.row(static_cast<Eigen::Index>(p)) /= static_cast<double>(members[p].size());
  }
  return out;
}

}  // namespace nstw::graph
