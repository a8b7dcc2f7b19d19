#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nstw/eval/metrics.hpp"

namespace nstw::eval {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, int line) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw ParseError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

inline void put(std::ostream& o, double v) {
  if (!std::isnan(v)) o << v;
}

}  // namespace detail

// ---- space-time export: t,id,x,v sorted by (t, id) ----

inline void write_spacetime(std::ostream& o, const RunLog& log) {
  o << "t,id,x,v\n" << std::setprecision(17);
  for (const auto& f : log.frames)
    for (std::size_t i = 0; i < f.x.size(); ++i) o << f.time << ',' << i << ',' << f.x[i] << ',' << f.v[i] << '\n';
}

// Rebuilds positions and speeds only; accelerations are zero, id 0 is the leader.
inline RunLog read_spacetime(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,id,x,v") throw ParseError("line 1: expected header 't,id,x,v'");
  RunLog log;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 4) throw ParseError("line " + std::to_string(lineno) + ": expected 4 fields");
    const double t = detail::parse_number(cells[0], lineno);
    const double idd = detail::parse_number(cells[1], lineno);
    if (!(idd >= 0) || idd != std::floor(idd)) throw ParseError("line " + std::to_string(lineno) + ": bad id");
    const auto id = static_cast<std::size_t>(idd);
    if (log.frames.empty() || log.frames.back().time != t) {
      if (!log.frames.empty() && !(t > log.frames.back().time))
        throw ParseError("line " + std::to_string(lineno) + ": time not increasing");
      Frame f;
      f.time = t;
      log.frames.push_back(std::move(f));
    }
    auto& f = log.frames.back();
    if (id != f.x.size()) throw ParseError("line " + std::to_string(lineno) + ": ids must run 0.. within a time");
    f.x.push_back(detail::parse_number(cells[2], lineno));
    f.v.push_back(detail::parse_number(cells[3], lineno));
    f.a.push_back(0.0);
  }
  if (log.frames.empty()) throw ParseError("space-time file has no rows");
  const auto m = log.frames.front().x.size();
  for (std::size_t i = 0; i < m; ++i) {
    log.kind.push_back(i == 0 ? sim::VehicleKind::TrajectoryLeader : sim::VehicleKind::AV);
    log.group.push_back(-1);
  }
  if (log.frames.size() > 1) log.dt = log.frames[1].time - log.frames[0].time;
  log.validate();
  return log;
}

// Wide speed traces: t,v0,v1,... one row per frame.
inline void write_speed_traces(std::ostream& o, const RunLog& log) {
  o << 't';
  for (std::size_t i = 0; i < log.vehicles(); ++i) o << ",v" << i;
  o << '\n' << std::setprecision(17);
  for (const auto& f : log.frames) {
    o << f.time;
    for (double v : f.v) o << ',' << v;
    o << '\n';
  }
}

// ---- summary: JSON document and a one-row CSV in Table-2 column order ----

inline nlohmann::json to_json(const Summary& s) {
  nlohmann::json j;
  j["label"] = s.label;
  for (std::size_t k = 0; k < s.table.size(); ++k)
    j["columns"][kSummaryColumns[k]] = std::isnan(s.table[k]) ? nlohmann::json(nullptr) : nlohmann::json(s.table[k]);
  for (const auto& [key, v] : s.extra) j["extra"][key] = std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
  return j;
}

inline Summary summary_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) throw ParseError("summary: non-numeric value");
    return v.get<double>();
  };
  if (!j.is_object() || !j.contains("columns")) throw ParseError("summary: missing 'columns'");
  Summary s;
  s.label = j.value("label", "");
  const auto& cols = j.at("columns");
  if (cols.size() != kSummaryColumns.size()) throw ParseError("summary: expected 14 columns");
  for (std::size_t k = 0; k < kSummaryColumns.size(); ++k) {
    if (!cols.contains(kSummaryColumns[k]))
      throw ParseError(std::string("summary: missing column '") + kSummaryColumns[k] + "'");
    s.table[k] = num(cols.at(kSummaryColumns[k]));
  }
  if (j.contains("extra"))
    for (const auto& [key, v] : j.at("extra").items()) s.extra[key] = num(v);
  return s;
}

inline void write_summary_csv_header(std::ostream& o) {
  o << "label";
  for (const char* c : kSummaryColumns) o << ',' << c;
  o << '\n';
}

inline void write_summary_csv_row(std::ostream& o, const Summary& s) {
  o << s.label << std::setprecision(17);
  for (double v : s.table) {
    o << ',';
    detail::put(o, v);
  }
  o << '\n';
}

inline std::vector<Summary> read_summary_csv(std::istream& in) {
  std::string line;
  std::ostringstream expected;
  write_summary_csv_header(expected);
  if (!std::getline(in, line) || line + '\n' != expected.str())
    throw ParseError("line 1: summary header does not match the Table-2 column layout");
  std::vector<Summary> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != kSummaryColumns.size() + 1)
      throw ParseError("line " + std::to_string(lineno) + ": expected 15 fields");
    Summary s;
    s.label = cells[0];
    for (std::size_t k = 0; k < kSummaryColumns.size(); ++k) s.table[k] = detail::parse_number(cells[k + 1], lineno);
    out.push_back(std::move(s));
  }
  return out;
}

// Aligned side-by-side table; '*' marks the best value of each column.
inline std::string format_comparison(const std::vector<Summary>& rows) {
  if (rows.size() < 2) throw DomainError("compare: need at least two summaries");
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"run"};
  for (const char* c : kSummaryColumns) header.emplace_back(c);
  cells.push_back(header);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.label};
    for (std::size_t k = 0; k < kSummaryColumns.size(); ++k) {
      const double v = r.table[k];
      std::ostringstream s;
      if (std::isnan(v)) {
        s << '-';
      } else {
        s << std::fixed << std::setprecision(3) << v;
        bool best = kSummaryPreference[k] != 0;
        for (const auto& other : rows) {
          const double w = other.table[k];
          if (std::isnan(w)) continue;
          if ((kSummaryPreference[k] > 0 && w > v) || (kSummaryPreference[k] < 0 && w < v)) best = false;
        }
        if (best) s << '*';
      }
      line.push_back(s.str());
    }
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::ostringstream o;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) o << "  ";
      o << std::setw(static_cast<int>(width[c])) << (c == 0 ? std::left : std::right) << line[c];
    }
    o << '\n';
  }
  return o.str();
}

}  // namespace nstw::eval
