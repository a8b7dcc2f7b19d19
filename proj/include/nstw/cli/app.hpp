#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nstw/cli/config.hpp"
#include "nstw/eval/export.hpp"
#include "nstw/eval/log.hpp"
#include "nstw/eval/metrics.hpp"
#include "nstw/graph/cyclic_examples.hpp"
#include "nstw/graph/dump.hpp"
#include "nstw/graph/intensity.hpp"
#include "nstw/graph/spectral.hpp"
#include "nstw/graph/wl.hpp"
#include "nstw/rl/trainer.hpp"

namespace nstw::cli {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by the commands that take a configuration.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string ablation;
  std::string mode;
  std::vector<std::string> set;

  // Defaults, then the file, then NSTW_* variables, then flags.
  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    apply_env(c);
    for (const auto& kv : set) apply_assignment(c, kv);
    if (seed) set_key(c, "seed", static_cast<std::int64_t>(*seed));
    if (!ablation.empty()) set_key(c, "ablation", ablation);
    if (!mode.empty()) set_key(c, "st.mode", mode);
    c.validate();
    return c;
  }
};

inline void prepare_run_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw UsageError("run directory '" + dir.string() + "' is not empty (pass --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---- train ----

inline rl::TrainResult cmd_train(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
  write_json(dir / "config.json", to_json(cfg));
  rl::RunOptions o;
  o.run_dir = dir.string();
  o.config_hash = config_hash(cfg);
  o.config = to_json(cfg);
  o.on_episode = [&out](const rl::EpisodeRecord& e) {
    out << "episode " << e.episode << "  steps " << e.steps << "  mean reward " << e.mean_reward << "  noise "
        << e.noise_std << (e.collisions ? "  collision" : "") << '\n';
  };
  const auto traj = load_trajectory(cfg.trajectory, cfg.scenario.dt);
  auto res = rl::train(cfg.train, cfg.model, cfg.env(), traj, o);
  out << "trained " << res.steps << " steps over " << res.episodes.size() << " episodes; checkpoint "
      << (res.checkpoints.empty() ? std::string("-") : res.checkpoints.back()) << '\n';
  return res;
}

// ---- eval ----

struct EvalSource {
  std::string checkpoint;  // empty: IDM baseline
  bool check_shape = false;
};

inline void write_histogram(const fs::path& p, const eval::Histogram& h) {
  std::ostringstream o;
  o << "bin_low,bin_high,count\n" << std::setprecision(17);
  for (const auto& [k, c] : h.bins) o << k * h.width << ',' << (k + 1) * h.width << ',' << c << '\n';
  write_text(p, o.str());
}

// Plot-ready files for one rollout.
inline void write_exports(const fs::path& dir, const eval::RunLog& log) {
  std::ostringstream st, sp;
  eval::write_spacetime(st, log);
  eval::write_speed_traces(sp, log);
  write_text(dir / "spacetime.csv", st.str());
  write_text(dir / "speeds.csv", sp.str());
  const auto aj = eval::accel_jerk_distributions(log);
  write_histogram(dir / "accel_hist.csv", aj.accel);
  write_histogram(dir / "jerk_hist.csv", aj.jerk);
}

inline void write_summary(const fs::path& dir, const eval::Summary& s) {
  write_json(dir / "summary.json", eval::to_json(s));
  std::ostringstream o;
  eval::write_summary_csv_header(o);
  eval::write_summary_csv_row(o, s);
  write_text(dir / "summary.csv", o.str());
}

struct Evaluator {
  RunConfig cfg;
  std::optional<rl::LoadedAgent> loaded;
  std::string name;

  Evaluator(const RunConfig& c, const EvalSource& src) : cfg(c) {
    if (src.checkpoint.empty()) {
      name = "idm";
      return;
    }
    if (!fs::exists(src.checkpoint)) throw UsageError("checkpoint not found: " + src.checkpoint);
    loaded.emplace(rl::load_agent(src.checkpoint));
    const auto& m = loaded->agent.model();
    if (src.check_shape) {
      auto shape = [](rl::Ablation a, const rl::ModelConfig& x) {
        std::ostringstream o;
        o << "ablation=" << rl::to_string(a) << " heads=" << x.heads << " head_width=" << x.head_width
          << " hidden=" << x.hidden;
        return o.str();
      };
      const auto expected = shape(cfg.train.ablation, cfg.model);
      const auto found = shape(loaded->agent.ablation(), m);
      if (expected != found)
        throw ConfigError("checkpoint shape mismatch: config expects " + expected + ", checkpoint has " + found);
    }
    name = rl::to_string(loaded->agent.ablation());
  }

  eval::RunLog run(const sim::LeaderTrajectory& traj) {
    auto env = cfg.env();
    if (loaded) {
      env.observation = loaded->observation;
      return eval::rollout(env, traj, eval::policy_controller(loaded->agent, loaded->observation), cfg.train.seed);
    }
    return eval::rollout(env, traj, eval::idm_controller(env.scenario.idm), cfg.train.seed);
  }
};

// One rollout per trajectory. With several trajectories each gets its own
// subdirectory and the top-level summary.csv holds one row per trajectory.
inline std::vector<eval::Summary> cmd_eval(const RunConfig& cfg, const EvalSource& src,
                                           const std::vector<std::string>& trajectories, const fs::path& dir,
                                           std::ostream& out) {
  Evaluator ev(cfg, src);
  std::vector<eval::Summary> rows;
  const bool many = trajectories.size() > 1;
  for (const auto& t : trajectories) {
    const auto traj = load_trajectory(t, cfg.scenario.dt);
    const auto log = ev.run(traj);
    auto s = eval::summarize(log, cfg.metrics(), many ? ev.name + "/" + t : ev.name);
    const fs::path sub = many ? dir / t : dir;
    fs::create_directories(sub);
    write_summary(sub, s);
    write_exports(sub, log);
    json m;
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.train.seed;
    m["source"] = src.checkpoint.empty() ? std::string("baseline:idm") : src.checkpoint;
    m["trajectory"] = t;
    m["collided"] = log.collided;
    write_json(sub / "eval_manifest.json", m);
    rows.push_back(std::move(s));
  }
  std::ostringstream csv;
  eval::write_summary_csv_header(csv);
  for (const auto& s : rows) eval::write_summary_csv_row(csv, s);
  if (many) write_text(dir / "summary.csv", csv.str());
  out << csv.str();
  return rows;
}

// ---- compare ----

inline std::vector<eval::Summary> load_summaries(const fs::path& p) {
  auto from_csv = [](const fs::path& f) {
    std::ifstream in(f);
    return eval::read_summary_csv(in);
  };
  auto from_json = [](const fs::path& f) {
    std::ifstream in(f);
    try {
      return std::vector<eval::Summary>{eval::summary_from_json(json::parse(in))};
    } catch (const json::parse_error& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
  };
  std::vector<eval::Summary> rows;
  if (fs::is_directory(p)) {
    if (fs::exists(p / "summary.json"))
      rows = from_json(p / "summary.json");
    else if (fs::exists(p / "summary.csv"))
      rows = from_csv(p / "summary.csv");
    else
      throw UsageError("no summary.json or summary.csv in " + p.string());
  } else if (fs::exists(p)) {
    rows = p.extension() == ".csv" ? from_csv(p) : from_json(p);
  } else {
    throw UsageError("not found: " + p.string());
  }
  auto named = fs::is_directory(p) ? p : p.parent_path();
  if (named.filename().empty()) named = named.parent_path();
  const auto name = named.filename().string();
  for (auto& s : rows) s.label = rows.size() == 1 || s.label.empty() ? name : name + ":" + s.label;
  return rows;
}

inline std::string cmd_compare(const std::vector<std::string>& paths, std::ostream& out) {
  if (paths.size() < 2) throw UsageError("compare needs at least two run directories or summary files");
  std::vector<eval::Summary> rows;
  for (const auto& p : paths)
    for (auto& s : load_summaries(p)) rows.push_back(std::move(s));
  std::optional<std::vector<std::string>> extras;
  for (const auto& s : rows) {
    if (s.extra.empty()) continue;
    std::vector<std::string> k;
    for (const auto& [key, v] : s.extra) k.push_back(key);
    if (extras && *extras != k) throw UsageError("compare: summaries carry mismatched metric sets");
    extras = k;
  }
  const auto table = eval::format_comparison(rows);
  out << table;
  return table;
}

// ---- analyze-graph ----

inline void report_graph(const graph::NestedTrafficGraph& g, std::ostream& out) {
  const auto r = graph::nested_entropy(g);
  const auto in = graph::information_intensity(g);
  out << std::setprecision(10);
  out << "vehicles " << g.vehicle_count() << "  platoons " << g.platoon_count() << '\n';
  for (std::size_t p = 0; p < r.platoon_entropies.size(); ++p)
    out << "platoon " << p << " spectral entropy " << r.platoon_entropies[p] << '\n';
  out << "formation spectral entropy " << r.formation_entropy << '\n';
  out << "nested entropy " << r.nested << '\n';
  out << "intensity intra " << in.intra << "  inter " << in.inter << "  total " << in.total << '\n';
  out << "total >= intra: " << (in.total >= in.intra ? "yes" : "NO") << '\n';
}

inline void demo_fig4(std::ostream& out) {
  const auto g1 = graph::two_triangles();
  const auto g2 = graph::hexagon();
  const double h1 = graph::nested_entropy_of({g1});
  const double h2 = graph::nested_entropy_of({g2});
  const auto wl = graph::wl_color_histograms({g1, g2}, 3);
  out << std::setprecision(10);
  out << "G1 (two triangles) nested entropy " << h1 << '\n';
  out << "G2 (hexagon)       nested entropy " << h2 << '\n';
  out << "1-WL color multisets identical: " << (wl[0] == wl[1] ? "yes" : "no") << '\n';
  out << "distinguished by entropy: " << (std::abs(h1 - h2) > 1e-9 ? "yes" : "no") << '\n';
}

// ---- sweep ----

struct SweepRun {
  std::string name;
  fs::path dir;
  bool ok = false;
  std::string error;
  rl::EncodeCounters counters;
};

inline json counters_json(const rl::EncodeCounters& c) {
  return {{"raw_bypass", c.raw_bypass}, {"vv_binary", c.vv_binary}, {"vv_weighted", c.vv_weighted},
          {"ff_pass", c.ff_pass}};
}

inline std::vector<SweepRun> cmd_sweep(const RunConfig& base, const std::string& dimension, const fs::path& dir,
                                       std::ostream& out, std::ostream& err) {
  struct Plan {
    std::string name;
    RunConfig cfg;
    bool baseline;
  };
  std::vector<Plan> plan;
  if (dimension == "ablation") {
    plan.push_back({"idm", base, true});
    for (auto a : {rl::Ablation::DDPG, rl::Ablation::MGAT, rl::Ablation::STW, rl::Ablation::NSTW}) {
      RunConfig c = base;
      c.train.ablation = a;
      plan.push_back({rl::to_string(a), c, false});
    }
  } else if (dimension == "penetration") {
    for (double p : {5.0, 10.0, 20.0}) {
      RunConfig c = base;
      c.penetration = p;
      plan.push_back({"penetration_" + std::to_string(static_cast<int>(p)), c, false});
    }
  } else {
    throw UsageError("unknown sweep dimension '" + dimension + "' (expected ablation|penetration)");
  }

  std::vector<SweepRun> runs;
  std::vector<eval::Summary> rows;
  for (auto& p : plan) {
    SweepRun r;
    r.name = p.name;
    r.dir = dir / p.name;
    out << "== " << p.name << '\n';
    try {
      p.cfg.validate();
      fs::create_directories(r.dir);
      EvalSource src;
      if (p.baseline) {
        write_json(r.dir / "config.json", to_json(p.cfg));
        json m;
        m["config_hash"] = config_hash(p.cfg);
        m["seed"] = p.cfg.train.seed;
        m["baseline"] = "idm";
        m["encode_counters"] = counters_json({});
        write_json(r.dir / "manifest.json", m);
      } else {
        const auto res = cmd_train(p.cfg, r.dir, out);
        r.counters = res.counters;
        src.checkpoint = res.checkpoints.back();
      }
      auto s = cmd_eval(p.cfg, src, {p.cfg.trajectory}, r.dir, out);
      s.front().label = p.name;
      rows.push_back(s.front());
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
      err << "sweep run '" << p.name << "' failed: " << e.what() << '\n';
    }
    runs.push_back(std::move(r));
  }

  json j;
  j["dimension"] = dimension;
  for (const auto& r : runs) {
    json x;
    x["name"] = r.name;
    x["dir"] = r.dir.filename().string();
    x["ok"] = r.ok;
    if (!r.ok) x["error"] = r.error;
    x["encode_counters"] = counters_json(r.counters);
    j["runs"].push_back(x);
  }
  write_json(dir / "sweep.json", j);
  std::ostringstream csv;
  eval::write_summary_csv_header(csv);
  for (const auto& s : rows) eval::write_summary_csv_row(csv, s);
  write_text(dir / "rollup.csv", csv.str());
  if (rows.size() >= 2) {
    const auto table = eval::format_comparison(rows);
    write_text(dir / "comparison.txt", table);
    out << table;
  }
  return runs;
}

// ---- entry point ----

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Nested spatio-temporal graph RL for mixed platoons"};
  app.require_subcommand(1);
  ConfigFlags flags;
  auto add_config_flags = [&flags](CLI::App* c) {
    c->add_option("--config", flags.config_path, "flat JSON configuration file");
    c->add_option("--seed", flags.seed, "random seed");
    c->add_option("--ablation", flags.ablation, "ddpg|mgat|stw|nstw");
    c->add_option("--mode", flags.mode, "spatio-temporal weight mode: as-written|prose");
    c->add_option("--set", flags.set, "override one key, key=value (repeatable)");
  };
  std::string out_dir;
  bool force = false;

  auto* train = app.add_subcommand("train", "train an agent");
  add_config_flags(train);
  train->add_option("--out", out_dir, "run directory")->required();
  train->add_flag("--force", force, "overwrite a non-empty run directory");

  std::string checkpoint, baseline, trajectory;
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint or the IDM baseline");
  add_config_flags(evalc);
  evalc->add_option("--checkpoint", checkpoint, "checkpoint file");
  evalc->add_option("--baseline", baseline, "idm")->check(CLI::IsMember({"idm"}));
  evalc->add_option("--trajectory", trajectory, "scenario name, sinusoid:..., CSV path, or 'all'");
  evalc->add_option("--out", out_dir, "output directory")->required();
  evalc->add_flag("--force", force, "overwrite a non-empty output directory");

  std::vector<std::string> compare_paths;
  auto* compare = app.add_subcommand("compare", "side-by-side summary table");
  compare->add_option("runs", compare_paths, "run directories or summary files");
  compare->add_option("--out", out_dir, "also write the table to this file");

  std::string dump, demo;
  auto* analyze = app.add_subcommand("analyze-graph", "spectral entropy and information intensity");
  add_config_flags(analyze);
  analyze->add_option("--dump", dump, "graph dump file");
  analyze->add_option("--demo", demo, "fig4")->check(CLI::IsMember({"fig4"}));

  std::string dimension;
  auto* sweep = app.add_subcommand("sweep", "ablation or penetration sweep");
  add_config_flags(sweep);
  sweep->add_option("--dimension", dimension, "ablation|penetration")->required();
  sweep->add_option("--out", out_dir, "sweep directory")->required();
  sweep->add_flag("--force", force, "overwrite a non-empty sweep directory");

  auto* exportc = app.add_subcommand("export", "plot-ready exports of one rollout plus the initial graph");
  add_config_flags(exportc);
  exportc->add_option("--checkpoint", checkpoint, "checkpoint file");
  exportc->add_option("--baseline", baseline, "idm")->check(CLI::IsMember({"idm"}));
  exportc->add_option("--trajectory", trajectory, "scenario name, sinusoid:..., or CSV path");
  exportc->add_option("--out", out_dir, "output directory")->required();
  exportc->add_flag("--force", force, "overwrite a non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    auto source = [&] {
      if (checkpoint.empty() == baseline.empty()) throw UsageError("pass exactly one of --checkpoint or --baseline idm");
      return EvalSource{checkpoint, !flags.config_path.empty()};
    };
    if (train->parsed()) {
      const auto cfg = flags.resolve();
      prepare_run_dir(out_dir, force);
      cmd_train(cfg, out_dir, out);
    } else if (evalc->parsed()) {
      auto cfg = flags.resolve();
      const auto src = source();
      std::vector<std::string> trajs;
      if (trajectory == "all")
        trajs = builtin_trajectories();
      else
        trajs = {trajectory.empty() ? cfg.trajectory : trajectory};
      prepare_run_dir(out_dir, force);
      cmd_eval(cfg, src, trajs, out_dir, out);
    } else if (compare->parsed()) {
      const auto table = cmd_compare(compare_paths, out);
      if (!out_dir.empty()) write_text(out_dir, table);
    } else if (analyze->parsed()) {
      if (!dump.empty() && !demo.empty()) throw UsageError("pass at most one of --dump or --demo");
      if (demo == "fig4") {
        demo_fig4(out);
      } else if (!dump.empty()) {
        std::ifstream in(dump);
        if (!in) throw UsageError("graph dump not found: " + dump);
        report_graph(graph::read_graph_dump(in).graph, out);
      } else {
        const auto cfg = flags.resolve();
        const auto world = sim::build_scenario(cfg.effective_scenario(), load_trajectory(cfg.trajectory, cfg.scenario.dt));
        report_graph(graph::build_nested_graph(world, cfg.st, graph::EdgeWeighting::SpatioTemporal,
                                               graph::PlatoonWeighting::Binary, cfg.norm),
                     out);
      }
    } else if (sweep->parsed()) {
      const auto cfg = flags.resolve();
      if (dimension != "ablation" && dimension != "penetration")
        throw UsageError("unknown sweep dimension '" + dimension + "' (expected ablation|penetration)");
      prepare_run_dir(out_dir, force);
      const auto runs = cmd_sweep(cfg, dimension, out_dir, out, err);
      for (const auto& r : runs)
        if (!r.ok) return kRuntime;
    } else if (exportc->parsed()) {
      const auto cfg = flags.resolve();
      Evaluator ev(cfg, source());
      const auto traj = load_trajectory(trajectory.empty() ? cfg.trajectory : trajectory, cfg.scenario.dt);
      prepare_run_dir(out_dir, force);
      const auto log = ev.run(traj);
      write_exports(out_dir, log);
      std::ostringstream t;
      sim::write_trajectory_csv(t, traj);
      write_text(fs::path(out_dir) / "trajectory.csv", t.str());
      const auto world = sim::build_scenario(cfg.effective_scenario(), traj);
      const auto spec = ev.loaded ? ev.loaded->observation : cfg.env().observation;
      std::ostringstream g;
      graph::write_graph_dump(g,
                              graph::build_nested_graph(world, spec.st, graph::EdgeWeighting::SpatioTemporal,
                                                        graph::PlatoonWeighting::Binary, spec.norm),
                              spec.norm);
      write_text(fs::path(out_dir) / "graph_t0.txt", g.str());
      out << "wrote exports to " << out_dir << '\n';
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const graph::DumpParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace nstw::cli
