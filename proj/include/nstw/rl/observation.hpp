#pragma once

#include <vector>

#include "nstw/core.hpp"
#include "nstw/graph/nested_graph.hpp"
#include "nstw/nn/gat.hpp"
#include "nstw/rl/config.hpp"
#include "nstw/sim/types.hpp"

namespace nstw::rl {

// What the agent sees at one step, already reduced to what the encoder needs.
struct Observation {
  Matrix vv_features;           // M x 6
  nn::Neighborhoods vv_nb;      // V-V neighborhoods (weights per ablation)
  Matrix ff_features;           // N x 4
  nn::Neighborhoods ff_nb;      // F-F neighborhoods
  std::vector<int> cav_nodes;   // platoon -> CAV vehicle row
  std::vector<int> membership;  // vehicle -> platoon, -1 for the leader

  int vehicles() const { return static_cast<int>(vv_features.rows()); }
  int platoons() const { return static_cast<int>(ff_features.rows()); }

  // Per-CAV raw state: the CAV's V-V row followed by its platoon row.
  Matrix raw_rows() const {
    Matrix out(platoons(), graph::kVehicleFeatures + graph::kPlatoonFeatures);
    for (int p = 0; p < platoons(); ++p)
      out.row(p) << vv_features.row(cav_nodes[static_cast<std::size_t>(p)]), ff_features.row(p);
    return out;
  }
};

struct ObservationSpec {
  Ablation ablation = Ablation::NSTW;
  graph::StWeightParams st;
  graph::FeatureNorm norm;
};

inline Observation observe(const graph::NestedTrafficGraph& g, Ablation ablation) {
  Observation o;
  o.vv_features = g.vv.node_features;
  o.ff_features = g.ff.node_features;
  o.cav_nodes = g.cav_nodes;
  o.membership = g.membership;
  if (uses_graph(ablation)) {
    o.vv_nb = nn::Neighborhoods::from_sparse(g.vv.adjacency);
    if (!uses_st_weights(ablation)) o.vv_nb = o.vv_nb.binary();
    o.ff_nb = nn::Neighborhoods::from_dense(g.ff.adjacency);
  }
  return o;
}

inline Observation observe(const sim::WorldState& w, const ObservationSpec& spec) {
  const auto weighting =
      uses_st_weights(spec.ablation) ? graph::EdgeWeighting::SpatioTemporal : graph::EdgeWeighting::Binary;
  return observe(graph::build_nested_graph(w, spec.st, weighting, graph::PlatoonWeighting::Binary, spec.norm),
                 spec.ablation);
}

// Several observations stacked as disconnected blocks.
struct ObservationBatch {
  Matrix vv_features;
  nn::Neighborhoods vv_nb;
  Matrix ff_features;
  nn::Neighborhoods ff_nb;
  std::vector<int> cav_rows;        // global CAV vehicle rows, platoon order
  std::vector<int> vehicle_platoon;  // global vehicle row -> global platoon row, -1 for leaders
  std::vector<int> platoon_sample;   // global platoon row -> sample index
  int samples = 0;

  int platoons() const { return static_cast<int>(ff_features.rows()); }
};

inline ObservationBatch stack(const std::vector<const Observation*>& obs) {
  ObservationBatch b;
  b.samples = static_cast<int>(obs.size());
  Eigen::Index m = 0, n = 0;
  for (const auto* o : obs) {
    m += o->vv_features.rows();
    n += o->ff_features.rows();
  }
  b.vv_features.resize(m, graph::kVehicleFeatures);
  b.ff_features.resize(n, graph::kPlatoonFeatures);
  b.vehicle_platoon.reserve(static_cast<std::size_t>(m));
  Eigen::Index vm = 0, pn = 0;
  for (std::size_t s = 0; s < obs.size(); ++s) {
    const auto& o = *obs[s];
    b.vv_features.middleRows(vm, o.vv_features.rows()) = o.vv_features;
    b.ff_features.middleRows(pn, o.ff_features.rows()) = o.ff_features;
    b.vv_nb.append_block(o.vv_nb);
    b.ff_nb.append_block(o.ff_nb);
    for (int c : o.cav_nodes) b.cav_rows.push_back(static_cast<int>(vm) + c);
    for (int p : o.membership) b.vehicle_platoon.push_back(p < 0 ? -1 : static_cast<int>(pn) + p);
    for (int p = 0; p < o.platoons(); ++p) b.platoon_sample.push_back(static_cast<int>(s));
    vm += o.vv_features.rows();
    pn += o.ff_features.rows();
  }
  return b;
}

}  // namespace nstw::rl
