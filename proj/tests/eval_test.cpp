#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "nstw/eval/export.hpp"
#include "nstw/eval/log.hpp"
#include "nstw/eval/metrics.hpp"

using namespace nstw;
using namespace nstw::eval;
using sim::VehicleKind;

namespace {

// Vehicles moving at constant speed v, `headway` seconds apart, leader first.
RunLog convoy(int n, double v, double headway, double duration, double dt = 0.1, double x0 = 0.0) {
  RunLog log;
  log.dt = dt;
  log.trajectory_duration = duration;
  for (int i = 0; i < n; ++i) {
    log.kind.push_back(i == 0 ? VehicleKind::TrajectoryLeader : (i % 2 ? VehicleKind::CAV : VehicleKind::AV));
    log.group.push_back(i == 0 ? -1 : (i - 1) / 2);
  }
  const auto steps = static_cast<int>(std::lround(duration / dt));
  for (int k = 0; k <= steps; ++k) {
    Frame f;
    f.time = k * dt;
    for (int i = 0; i < n; ++i) {
      f.x.push_back(x0 + v * f.time - i * v * headway);
      f.v.push_back(v);
      f.a.push_back(0.0);
    }
    log.frames.push_back(std::move(f));
  }
  return log;
}

// One follower whose recorded accel follows the given samples.
RunLog accel_log(const std::vector<double>& a, double dt) {
  RunLog log;
  log.dt = dt;
  log.kind = {VehicleKind::TrajectoryLeader, VehicleKind::AV};
  log.group = {-1, -1};
  for (std::size_t k = 0; k < a.size(); ++k) {
    Frame f;
    f.time = static_cast<double>(k) * dt;
    f.x = {100.0 + f.time, f.time};
    f.v = {1.0, 1.0};
    f.a = {0.0, a[k]};
    log.frames.push_back(std::move(f));
  }
  return log;
}

}  // namespace

TEST(Stats, PopulationConvention) {
  const auto s = describe({30.0, 50.0});
  EXPECT_EQ(s.mean, 40.0);
  EXPECT_EQ(s.std, 10.0);
  EXPECT_EQ(s.max, 50.0);
  EXPECT_TRUE(std::isnan(describe({}).mean));
}

TEST(Throughput, CountAndScale) {
  // 10 vehicles cross x = 500 within a 360 s window.
  auto log = convoy(10, 10.0, 30.0, 360.0, 1.0, 200.0);
  EXPECT_NEAR(throughput(log, 500.0, {0.0, 360.0}), 100.0, 1e-12);
  EXPECT_EQ(throughput(log, 1e6, {0.0, 360.0}), 0.0);
  EXPECT_THROW(throughput(log, 500.0, {10.0, 10.0}), DomainError);
  EXPECT_THROW(throughput(log, 500.0, {0.0, 400.0}), DomainError);
}

TEST(Throughput, ConstantHeadwayIdentity) {
  for (double h : {1.2, 2.0, 3.7}) {
    auto log = convoy(700, 20.0, h, 600.0);
    const double q = throughput(log, 2000.0, {100.0, 600.0});
    const double count = q * 500.0 / 3600.0;
    EXPECT_LE(std::abs(count - 500.0 / h), 1.0) << h;
  }
}

TEST(Throughput, DefaultsUseLeaderStartAndWarmup) {
  auto log = convoy(5, 10.0, 2.0, 100.0);
  EXPECT_EQ(default_x_star(log), 0.0);
  const auto w = default_window(log);
  EXPECT_NEAR(w.t0, 10.0, 1e-12);
  EXPECT_EQ(w.t1, 100.0);
  MetricsOptions o;
  o.x_star = 7.0;
  EXPECT_EQ(default_x_star(log, o), 7.0);
}

TEST(Spacing, ConstantGaps) {
  auto log = convoy(5, 10.0, 4.5, 10.0);  // 45 m front-to-front, 40 m bumper gap
  const auto s = spacing_stats(log);
  EXPECT_NEAR(s.cav_gap.max, 40.0, 1e-9);
  EXPECT_NEAR(s.cav_gap.mean, 40.0, 1e-9);
  EXPECT_NEAR(s.cav_gap.std, 0.0, 1e-9);
  EXPECT_NEAR(s.platoon_headway.mean, 67.5, 1e-9);  // 45 to the leader, 90 between CAVs
  // theta_safe at equal speeds: gap - (v*t0 + d0) = 40 - 4.
  EXPECT_NEAR(s.theta_safe.mean, 40.0 - 10.0 * 0.2 - 2.0, 1e-9);
}

TEST(Spacing, TwoStepGaps) {
  RunLog log;
  log.kind = {VehicleKind::TrajectoryLeader, VehicleKind::CAV};
  log.group = {-1, 0};
  log.frames.push_back({0.0, {35.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {}});
  log.frames.push_back({0.1, {55.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {}});
  const auto s = spacing_stats(log);
  EXPECT_EQ(s.cav_gap.mean, 40.0);
  EXPECT_EQ(s.cav_gap.std, 10.0);
}

TEST(AccelJerk, ConstantSpeedMassAtZero) {
  auto log = convoy(4, 15.0, 2.0, 5.0);
  const auto s = accel_jerk_distributions(log);
  EXPECT_EQ(s.accel.bins.size(), 1u);
  EXPECT_EQ(s.accel.bins.at(0), s.accel.total());
  EXPECT_EQ(s.jerk.bins.at(0), s.jerk.total());
  EXPECT_EQ(s.j_max, 0.0);
  EXPECT_EQ(s.a_max, 0.0);
}

TEST(AccelJerk, SingleStep) {
  const auto s = accel_jerk_distributions(accel_log({0.0, 0.0, 0.5, 0.5}, 0.1));
  EXPECT_NEAR(s.j_max, 5.0, 1e-12);
  EXPECT_EQ(s.jerk.bins.at(100), 1);  // 5 / 0.05
  EXPECT_EQ(s.jerk.bins.at(0), 3);
  EXPECT_EQ(s.accel.bins.at(5), 2);
}

TEST(AccelJerk, SineHasCosineJerk) {
  const double dt = 0.01;
  std::vector<double> a;
  for (int k = 0; k <= 1000; ++k) a.push_back(std::sin(k * dt));
  const auto log = accel_log(a, dt);
  const auto s = accel_jerk_distributions(log);
  EXPECT_NEAR(s.j_max, 1.0, dt);
  for (std::size_t k = 1; k < log.frames.size(); ++k) {
    const double j = (a[k] - a[k - 1]) / dt;
    const double mid = (static_cast<double>(k) - 0.5) * dt;
    EXPECT_NEAR(j, std::cos(mid), dt * dt);
  }
}

TEST(Energy, PowerOverSpeed) {
  // 10 kW at 20 m/s: 1000 J and 2 m per 0.1 s step.
  RunLog log;
  log.kind = {VehicleKind::TrajectoryLeader, VehicleKind::CAV};
  log.group = {-1, 0};
  for (int k = 0; k <= 50; ++k) {
    Frame f;
    f.time = k * 0.1;
    f.x = {1000.0 + 2.0 * k, 2.0 * k};
    f.v = {20.0, 20.0};
    f.a = {0.0, 0.0};
    if (k > 0) f.ledger = {{f.time, 0, 5000.0, 0, 0, 0}, {f.time, 1, 600.0, 200.0, 0.0, 200.0}};
    log.frames.push_back(std::move(f));
  }
  const auto e = energy_per_meter(log);
  ASSERT_EQ(e.per_group.size(), 1u);
  EXPECT_NEAR(*e.per_group[0], 500.0, 500.0 * 1e-12);
  EXPECT_NEAR(*e.fleet, 500.0, 500.0 * 1e-12);

  log.frames.resize(1);
  EXPECT_FALSE(energy_per_meter(log).per_group[0].has_value());
  EXPECT_FALSE(energy_per_meter(log).fleet.has_value());
}

TEST(Energy, DuplicatedGroupInvariant) {
  rl::EnvConfig cfg;
  cfg.scenario.groups = 1;
  cfg.scenario.avs_per_group = 3;
  const auto traj = sim::sinusoid_profile(15.0, 2.0, 20.0, 20.0);
  const auto one = rollout(cfg, traj, idm_controller(cfg.scenario.idm));
  // The same log with every follower copied into a second group far behind.
  RunLog two = one;
  const std::size_t m = one.vehicles();
  for (std::size_t i = 1; i < m; ++i) {
    two.kind.push_back(one.kind[i]);
    two.group.push_back(1);
  }
  for (auto& f : two.frames) {
    for (std::size_t i = 1; i < m; ++i) {
      f.x.push_back(f.x[i] - 5000.0);
      f.v.push_back(f.v[i]);
      f.a.push_back(f.a[i]);
    }
    const auto n = f.ledger.size();
    for (std::size_t i = 1; i < n; ++i) {
      auto e = f.ledger[i];
      e.vehicle += static_cast<int>(m) - 1;
      f.ledger.push_back(e);
    }
  }
  const auto a = energy_per_meter(one), b = energy_per_meter(two);
  EXPECT_NEAR(*b.fleet, *a.fleet, 1e-12 * *a.fleet);
  EXPECT_NEAR(*b.per_group[0], *b.per_group[1], 1e-12 * *a.fleet);
}

TEST(Summary, ConstantConvoyHasNoVariability) {
  auto log = convoy(7, 12.0, 3.0, 60.0);
  const auto s = summarize(log, {}, "flat");
  EXPECT_EQ(s.table.size(), 14u);
  EXPECT_NEAR(s.at("x_std"), 0.0, 1e-9);
  EXPECT_NEAR(s.at("theta_safe_std"), 0.0, 1e-9);
  EXPECT_EQ(s.at("a_max"), 0.0);
  EXPECT_EQ(s.at("a_min"), 0.0);
  EXPECT_EQ(s.at("j_max"), 0.0);
  EXPECT_EQ(s.at("j_mean"), 0.0);
  EXPECT_EQ(s.at("v_min"), 12.0);
  EXPECT_EQ(s.at("E_max"), 0.0);  // no ledger in a synthetic log
  EXPECT_EQ(s.extra.at("follower_speed_variance"), 0.0);
}

TEST(Summary, ColumnLayout) {
  std::ostringstream o;
  write_summary_csv_header(o);
  EXPECT_EQ(o.str(),
            "label,x_max,x_mean,x_std,q_mean,v_min,a_max,a_min,j_max,j_mean,E_max,E_min,theta_safe_max,"
            "theta_safe_mean,theta_safe_std\n");
}

TEST(Summary, RoundTripsBitExactly) {
  rl::EnvConfig cfg;
  cfg.scenario.groups = 2;
  cfg.scenario.avs_per_group = 3;
  const auto log = rollout(cfg, sim::emergency_brake_profile(), idm_controller(cfg.scenario.idm));
  const auto s = summarize(log, {}, "idm");
  EXPECT_TRUE(identical(s, summarize(log, {}, "idm")));

  const auto j = summary_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_TRUE(identical(s, j));

  std::stringstream csv;
  write_summary_csv_header(csv);
  write_summary_csv_row(csv, s);
  const auto rows = read_summary_csv(csv);
  ASSERT_EQ(rows.size(), 1u);
  Summary table_only = s;
  table_only.extra.clear();
  EXPECT_TRUE(identical(table_only, rows[0]));
}

TEST(Summary, AbsentValuesSurviveRoundTrip) {
  auto log = convoy(3, 10.0, 2.0, 10.0);
  std::fill(log.group.begin(), log.group.end(), -1);  // no platoons, so no energy columns
  auto s = summarize(log, {}, "x");
  ASSERT_TRUE(std::isnan(s.at("E_min")));
  EXPECT_TRUE(identical(s, summary_from_json(nlohmann::json::parse(to_json(s).dump()))));
  std::stringstream csv;
  write_summary_csv_header(csv);
  write_summary_csv_row(csv, s);
  EXPECT_TRUE(std::isnan(read_summary_csv(csv)[0].at("E_min")));
}

TEST(Summary, ParseErrors) {
  std::istringstream bad("label,x\n");
  EXPECT_THROW(read_summary_csv(bad), ParseError);
  std::stringstream row;
  write_summary_csv_header(row);
  row << "a,1,2\n";
  EXPECT_THROW(read_summary_csv(row), ParseError);
  EXPECT_THROW(summary_from_json(nlohmann::json::object()), ParseError);
}

TEST(Export, SpacetimeRowsSorted) {
  auto log = convoy(2, 10.0, 2.0, 0.2);
  std::stringstream o;
  write_spacetime(o, log);
  std::string line;
  std::getline(o, line);
  EXPECT_EQ(line, "t,id,x,v");
  std::vector<std::string> rows;
  while (std::getline(o, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].substr(0, 4), "0,0,");
  EXPECT_EQ(rows[1].substr(0, 4), "0,1,");
  EXPECT_EQ(rows[2].substr(0, 6), "0.1000");
}

TEST(Export, SpacetimeReingestKeepsThroughput) {
  rl::EnvConfig cfg;
  cfg.scenario.groups = 2;
  cfg.scenario.avs_per_group = 4;
  const auto log = rollout(cfg, sim::rapid_accel_profile(), idm_controller(cfg.scenario.idm));
  std::stringstream io;
  write_spacetime(io, log);
  const auto back = read_spacetime(io);
  ASSERT_EQ(back.frames.size(), log.frames.size());
  const double xs = log.frames.front().x.front();
  const Window w{log.start_time(), log.end_time()};
  EXPECT_EQ(throughput(back, xs, w), throughput(log, xs, w));
  EXPECT_GT(throughput(log, xs, w), 0.0);
}

TEST(Export, SpacetimeParseErrors) {
  std::istringstream header("time,id,x,v\n");
  EXPECT_THROW(read_spacetime(header), ParseError);
  std::istringstream gap("t,id,x,v\n0,0,1,1\n0,2,1,1\n");
  EXPECT_THROW(read_spacetime(gap), ParseError);
  std::istringstream text("t,id,x,v\n0,0,abc,1\n");
  EXPECT_THROW(read_spacetime(text), ParseError);
}

TEST(Export, SpeedTraces) {
  auto log = convoy(3, 10.0, 2.0, 0.1);
  std::stringstream o;
  write_speed_traces(o, log);
  std::string line;
  std::getline(o, line);
  EXPECT_EQ(line, "t,v0,v1,v2");
  std::getline(o, line);
  EXPECT_EQ(line, "0,10,10,10");
}

TEST(Compare, MarksBestAndNeedsTwoRows) {
  Summary a, b;
  a.label = "idm";
  b.label = "nstw";
  a.table.fill(1.0);
  b.table.fill(2.0);
  const auto t = format_comparison({a, b});
  EXPECT_NE(t.find("2.000*"), std::string::npos);  // q_mean prefers higher
  EXPECT_NE(t.find("1.000*"), std::string::npos);  // x_max prefers lower
  EXPECT_THROW(format_comparison({a}), DomainError);
}

TEST(Rollout, IdmSettlesBehindConstantLeader) {
  rl::EnvConfig cfg;
  cfg.scenario.groups = 1;
  cfg.scenario.avs_per_group = 5;
  const auto log = rollout(cfg, sim::sinusoid_profile(20.0, 0.0, 10.0, 300.0), idm_controller(cfg.scenario.idm));
  EXPECT_FALSE(log.collided);
  EXPECT_EQ(log.frames.size(), 3001u);
  EXPECT_TRUE(log.frames.front().ledger.empty());
  EXPECT_EQ(log.frames.back().ledger.size(), 7u);
  for (double a : log.frames.back().a) EXPECT_LT(std::abs(a), 1e-3);
  EXPECT_NO_THROW(log.validate());
}

TEST(Rollout, PolicyRolloutIsDeterministic) {
  rl::EnvConfig cfg;
  cfg.scenario.groups = 2;
  cfg.scenario.avs_per_group = 2;
  rl::ModelConfig m;
  m.heads = 2;
  m.head_width = 4;
  m.hidden = 16;
  rl::Agent agent(rl::Ablation::NSTW, m, 3);
  const auto traj = sim::sinusoid_profile(15.0, 3.0, 10.0, 10.0);
  const auto a = summarize(rollout(cfg, traj, policy_controller(agent, cfg.observation)), {}, "p");
  const auto b = summarize(rollout(cfg, traj, policy_controller(agent, cfg.observation)), {}, "p");
  EXPECT_TRUE(identical(a, b));
}
