#pragma once

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nstw/graph/nested_graph.hpp"

namespace nstw::graph {

// Plain-text graph dump:
//
//   # nstw-graph v1
//   M <vehicles>
//   N <platoons>
//   F_v 6
//   F_f 4
//   norm <road_length> <speed> <accel> <gap>
//   membership <M ints, -1 for the leader>
//   kinds <M tokens TL|CAV|AV>
//   vv_features    followed by M rows of F_v numbers
//   vv_adjacency   followed by M rows of M numbers
//   ff_features    followed by N rows of F_f numbers
//   ff_adjacency   followed by N rows of N numbers
//
// Blank lines and lines starting with '#' are ignored.
struct GraphDump {
  NestedTrafficGraph graph;
  FeatureNorm norm;
};

struct DumpParseError : std::runtime_error {
  DumpParseError(std::size_t line, const std::string& msg)
      : std::runtime_error("graph dump line " + std::to_string(line) + ": " + msg), line_no(line) {}
  std::size_t line_no;
};

inline void write_graph_dump(std::ostream& out, const NestedTrafficGraph& g, const FeatureNorm& norm) {
  out << std::setprecision(17);
  out << "# nstw-graph v1\n";
  out << "M " << g.vehicle_count() << "\nN " << g.platoon_count() << "\nF_v " << kVehicleFeatures << "\nF_f "
      << kPlatoonFeatures << "\n";
  out << "norm " << norm.road_length << ' ' << norm.speed << ' ' << norm.accel << ' ' << norm.gap << "\n";
  out << "membership";
  for (int p : g.membership) out << ' ' << p;
  out << "\nkinds";
  for (auto k : g.vv.kinds) out << ' ' << sim::to_string(k);
  out << "\n";
  auto rows = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
      out << "\n";
    }
  };
  out << "vv_features\n";
  rows(g.vv.node_features);
  out << "vv_adjacency\n";
  rows(Matrix(g.vv.adjacency));
  out << "ff_features\n";
  rows(g.ff.node_features);
  out << "ff_adjacency\n";
  rows(g.ff.adjacency);
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank, non-comment line; throws at end of input.
  std::string next(const char* expecting) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      return line;
    }
    throw DumpParseError(line_no_ + 1, std::string("unexpected end of input, expecting ") + expecting);
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

inline std::istringstream keyed(LineReader& r, const std::string& key) {
  const auto line = r.next(key.c_str());
  std::istringstream ss(line);
  std::string k;
  ss >> k;
  if (k != key) throw DumpParseError(r.line_no(), "expected '" + key + "', found '" + k + "'");
  return ss;
}

inline long read_count(LineReader& r, const std::string& key) {
  auto ss = keyed(r, key);
  long v = -1;
  if (!(ss >> v) || v < 0) throw DumpParseError(r.line_no(), "bad value for " + key);
  return v;
}

inline Matrix read_block(LineReader& r, const std::string& key, long rows, long cols) {
  keyed(r, key);
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    std::istringstream ss(r.next(key.c_str()));
    for (long j = 0; j < cols; ++j) {
      std::string tok;
      if (!(ss >> tok)) throw DumpParseError(r.line_no(), key + ": row has fewer than " + std::to_string(cols) + " values");
      try {
        std::size_t used = 0;
        m(i, j) = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DumpParseError(r.line_no(), key + ": not a number '" + tok + "'");
      }
    }
    std::string extra;
    if (ss >> extra) throw DumpParseError(r.line_no(), key + ": row has more than " + std::to_string(cols) + " values");
  }
  return m;
}

}  // namespace detail

inline GraphDump read_graph_dump(std::istream& in) {
  detail::LineReader r(in);
  const long m = detail::read_count(r, "M");
  const long n = detail::read_count(r, "N");
  if (detail::read_count(r, "F_v") != kVehicleFeatures) throw DumpParseError(r.line_no(), "F_v must be 6");
  if (detail::read_count(r, "F_f") != kPlatoonFeatures) throw DumpParseError(r.line_no(), "F_f must be 4");
  GraphDump d;
  {
    auto ss = detail::keyed(r, "norm");
    if (!(ss >> d.norm.road_length >> d.norm.speed >> d.norm.accel >> d.norm.gap))
      throw DumpParseError(r.line_no(), "norm needs 4 numbers");
  }
  std::vector<int> membership;
  {
    auto ss = detail::keyed(r, "membership");
    int p = 0;
    while (ss >> p) membership.push_back(p);
    if (static_cast<long>(membership.size()) != m)
      throw DumpParseError(r.line_no(), "membership needs " + std::to_string(m) + " entries");
  }
  VVGraph vv;
  {
    auto ss = detail::keyed(r, "kinds");
    std::string k;
    while (ss >> k) {
      if (k == "TL") vv.kinds.push_back(sim::VehicleKind::TrajectoryLeader);
      else if (k == "CAV") vv.kinds.push_back(sim::VehicleKind::CAV);
      else if (k == "AV") vv.kinds.push_back(sim::VehicleKind::AV);
      else throw DumpParseError(r.line_no(), "unknown vehicle kind '" + k + "'");
    }
    if (static_cast<long>(vv.kinds.size()) != m)
      throw DumpParseError(r.line_no(), "kinds needs " + std::to_string(m) + " entries");
  }
  vv.node_features = detail::read_block(r, "vv_features", m, kVehicleFeatures);
  vv.adjacency = detail::read_block(r, "vv_adjacency", m, m).sparseView();
  FFGraph ff;
  ff.node_features = detail::read_block(r, "ff_features", n, kPlatoonFeatures);
  ff.adjacency = detail::read_block(r, "ff_adjacency", n, n);
  try {
    d.graph = nest(std::move(vv), std::move(ff), std::move(membership));
  } catch (const StructureError& e) {
    throw DumpParseError(r.line_no(), e.what());
  }
  return d;
}

}  // namespace nstw::graph
