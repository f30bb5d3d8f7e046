#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tdsafe/common/error.hpp"
#include "tdsafe/model/config.hpp"
#include "tdsafe/poly/io.hpp"
#include "tdsafe/sim/sim.hpp"

namespace tdsafe::sim {
namespace {

using Eigen::VectorXd;
using nlohmann::json;

const std::string kConfigs = TDSAFE_CONFIG_DIR;

json read_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

json linear_config(json A, json A1, json E, int h) {
  json box = {{"box", {{"lo", {-1e6, -1e6}}, {"hi", {1e6, 1e6}}}}};
  return {{"name", "linear"},
          {"system", {{"n", 2}, {"m", 1}, {"h", h}, {"A", A}, {"A1", A1}, {"G", {{0}, {1}}}, {"E", E}}},
          {"sets",
           {{"X", box},
            {"Xa", {{"box", {{"lo", {-1, -1}}, {"hi", {1, 1}}}}}},
            {"Xb", json::array({{{"box", {{"lo", {1e5, 1e5}}, {"hi", {1e6, 1e6}}}}}})}}},
          {"input", {{"box", {{"lo", {-1}}, {"hi", {1}}}}}},
          {"spec", {{"T", 10}}}};
}

VectorXd v2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

TEST(HistoryTest, RingOrder) {
  HistoryBuffer h({v2(0, 0), v2(-1, 0), v2(-2, 0), v2(-3, 0)});
  EXPECT_EQ(h.size(), 4u);
  EXPECT_EQ(h.h(), 3);
  EXPECT_EQ(h.delayed()[0], -3);
  h.push(v2(1, 0));
  EXPECT_EQ(h.size(), 4u);
  EXPECT_EQ(h.current()[0], 1);
  EXPECT_EQ(h.at(1)[0], 0);
  EXPECT_EQ(h.delayed()[0], -2);
  for (int k = 2; k <= 9; ++k) h.push(v2(k, 0));
  for (int lag = 0; lag <= 3; ++lag) EXPECT_EQ(h.at(lag)[0], 9 - lag);
  EXPECT_THROW(h.at(4), Error);
  EXPECT_THROW(h.push(VectorXd::Zero(3)), ShapeError);
  HistoryBuffer c(2, v2(5, 6));
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.delayed(), v2(5, 6));
}

TEST(SimulateTest, OriginIsFixedWithoutNoise) {
  json cfg = read_json(kConfigs + "/academic.json");
  cfg["system"]["E"] = {{0, 0}, {0, 0}};
  auto prob = model::load_problem(cfg);
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  auto tr = simulate(prob.system, ctrl, HistoryBuffer(3, VectorXd::Zero(2)), 40, 1);
  ASSERT_EQ(tr.steps.size(), 41u);
  for (const auto& s : tr.steps) {
    EXPECT_EQ(s.x.norm(), 0.0);
    EXPECT_TRUE(s.safe);
  }
  EXPECT_FALSE(tr.first_violation);
}

// x+ = xh, so each state repeats the one stored h steps earlier.
TEST(SimulateTest, DelayedArgumentIsHStepsOld) {
  for (int h : {1, 3, 4}) {
    auto prob = model::load_problem(linear_config({{0, 0}, {0, 0}}, {{1, 0}, {0, 1}}, {{0, 0}, {0, 0}}, h));
    std::vector<VectorXd> init;
    for (int j = 0; j <= h; ++j) init.push_back(v2(-j, 10.0 * j));
    auto tr = simulate(prob.system, synth::Controller::zero(prob.system.space, 1), HistoryBuffer(init), 20, 0);
    ASSERT_EQ(tr.steps.size(), 21u);
    for (int k = 0; k < 20; ++k) {
      const VectorXd& expect = k >= h ? tr.steps[k - h].x : init[h - k];
      EXPECT_EQ(tr.steps[k + 1].x, expect) << "h=" << h << " k=" << k;
    }
  }
}

TEST(SimulateTest, InputEntersThroughG) {
  auto prob = model::load_problem(linear_config({{1, 0}, {0, 1}}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, 1));
  auto ctrl = synth::Controller::explicit_law({poly::parse("0.5", prob.system.space)});
  auto tr = simulate(prob.system, ctrl, HistoryBuffer(1, VectorXd::Zero(2)), 4, 0);
  EXPECT_DOUBLE_EQ(tr.steps[4].x[1], 2.0);
  EXPECT_DOUBLE_EQ(tr.steps[4].x[0], 0.0);
  EXPECT_DOUBLE_EQ(tr.steps[2].u[0], 0.5);
}

TEST(SimulateTest, SeedDeterminism) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  auto a = simulate(prob.system, ctrl, HistoryBuffer(3, v2(0.1, -0.2)), 40, 77);
  auto b = simulate(prob.system, ctrl, HistoryBuffer(3, v2(0.1, -0.2)), 40, 77);
  auto c = simulate(prob.system, ctrl, HistoryBuffer(3, v2(0.1, -0.2)), 40, 78);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) EXPECT_EQ(a.steps[k].x, b.steps[k].x);
  EXPECT_NE(a.steps.back().x, c.steps.back().x);
}

// x+ = w, so the states are the noise samples themselves.
TEST(SimulateTest, NoiseMarginals) {
  auto prob = model::load_problem(linear_config({{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, {{1, 0}, {0, 1}}, 1));
  auto tr = simulate(prob.system, synth::Controller::zero(prob.system.space, 1), HistoryBuffer(1, VectorXd::Zero(2)),
                     500000, 2024);
  double s = 0, s2 = 0;
  long cnt = 0;
  for (std::size_t k = 1; k < tr.steps.size(); ++k) {
    for (int i = 0; i < 2; ++i) {
      s += tr.steps[k].x[i];
      s2 += tr.steps[k].x[i] * tr.steps[k].x[i];
      ++cnt;
    }
  }
  ASSERT_EQ(cnt, 1000000);
  const double mean = s / cnt;
  const double var = s2 / cnt - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(SimulateTest, OverflowStopsTrace) {
  auto prob = model::load_problem(linear_config({{10, 0}, {0, 10}}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, 1));
  auto tr = simulate(prob.system, synth::Controller::zero(prob.system.space, 1), HistoryBuffer(1, v2(1, 1)), 40, 0);
  // |x_k| = sqrt(2) 10^k passes 1e12 at k = 12.
  EXPECT_EQ(tr.steps.size(), 12u);
  EXPECT_NE(tr.diagnostic.find("1e12"), std::string::npos);
}

TEST(SimulateTest, RejectsBadShapes) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  EXPECT_THROW(simulate(prob.system, ctrl, HistoryBuffer(2, VectorXd::Zero(2)), 5, 0), ShapeError);
  EXPECT_THROW(simulate(prob.system, ctrl, HistoryBuffer(3, VectorXd::Zero(3)), 5, 0), ShapeError);
  EXPECT_THROW(simulate(prob.system, synth::Controller::zero(prob.system.space, 2), HistoryBuffer(3, VectorXd::Zero(2)),
                        5, 0),
               ShapeError);
  EXPECT_THROW(simulate(prob.system, ctrl, HistoryBuffer(3, VectorXd::Zero(2)), 0, 0), PreconditionError);
}

TEST(ClopperPearsonTest, KnownValues) {
  // With no events the bound solves (1 - p)^n = alpha.
  EXPECT_NEAR(clopper_pearson_upper(0, 1000), 1.0 - std::pow(0.05, 1.0 / 1000), 1e-12);
  EXPECT_NEAR(clopper_pearson_upper(0, 1), 0.95, 1e-12);
  EXPECT_EQ(clopper_pearson_upper(5, 5), 1.0);
  double prev = 0;
  for (int k = 0; k <= 20; ++k) {
    double u = clopper_pearson_upper(k, 100);
    EXPECT_GT(u, k / 100.0);
    EXPECT_GT(u, prev);
    prev = u;
  }
  EXPECT_THROW(clopper_pearson_upper(3, 2), Error);
}

TEST(MonteCarloTest, LargeNoiseTriggersMonitor) {
  json cfg = read_json(kConfigs + "/academic.json");
  for (auto& row : cfg["system"]["E"])
    for (auto& e : row) e = e.get<double>() * 20.0;
  auto prob = model::load_problem(cfg);
  auto r = monte_carlo_safety(prob, synth::Controller::zero(prob.system.space, 1), 200, 5);
  EXPECT_GT(r.frequency, 0.0);
  EXPECT_EQ(r.runs, 200);
  int counted = 0;
  for (int f : r.first_violation) {
    if (f >= 0) {
      ++counted;
      EXPECT_GE(f, 1);
      EXPECT_LE(f, prob.spec.T);
    }
  }
  EXPECT_EQ(counted, r.unsafe);
}

TEST(MonteCarloTest, SingleRunAndThreadIndependence) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  auto one = monte_carlo_safety(prob, ctrl, 1, 3);
  EXPECT_TRUE(one.frequency == 0.0 || one.frequency == 1.0);
  auto a = monte_carlo_safety(prob, ctrl, 64, 9, MonteCarloOptions{.threads = 1});
  auto b = monte_carlo_safety(prob, ctrl, 64, 9, MonteCarloOptions{.threads = 4});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_THROW(monte_carlo_safety(prob, ctrl, 0, 1), PreconditionError);
}

TEST(MonteCarloTest, PublishedAcademicControllerStaysSafe) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto b = synth::load_bundle_file(kConfigs + "/certs/academic_qcbc.json", prob.system);
  auto r = monte_carlo_safety(prob, b.controller, 50, 1);
  EXPECT_EQ(r.unsafe, 0);
}

TEST(TraceCsvTest, ShapeAndRoundTrip) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto b = synth::load_bundle_file(kConfigs + "/certs/academic_qcbc.json", prob.system);
  auto tr = simulate(prob.system, b.controller, HistoryBuffer(3, v2(0.3, -0.4)), 2, 12);
  std::ostringstream os;
  write_trace_csv(tr, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "k,x1,x2,u1,safe");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);

  auto path = std::filesystem::temp_directory_path() / "tdsafe_trace_test.csv";
  auto longer = simulate(prob.system, b.controller, HistoryBuffer(3, v2(0.3, -0.4)), 40, 12);
  export_trace(longer, path);
  auto back = import_trace(path);
  ASSERT_EQ(back.steps.size(), longer.steps.size());
  for (std::size_t k = 0; k < back.steps.size(); ++k) {
    EXPECT_EQ(back.steps[k].k, longer.steps[k].k);
    EXPECT_EQ(back.steps[k].x, longer.steps[k].x);
    EXPECT_EQ(back.steps[k].u, longer.steps[k].u);
    EXPECT_EQ(back.steps[k].safe, longer.steps[k].safe);
  }
  EXPECT_EQ(back.first_violation, longer.first_violation);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace tdsafe::sim
