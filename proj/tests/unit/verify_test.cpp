#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "tdsafe/common/error.hpp"
#include "tdsafe/model/config.hpp"
#include "tdsafe/poly/io.hpp"
#include "tdsafe/synth/certificate.hpp"
#include "tdsafe/verify/check.hpp"

namespace tdsafe::verify {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

const std::string kConfigs = TDSAFE_CONFIG_DIR;

json box(std::vector<double> lo, std::vector<double> hi) { return {{"box", {{"lo", lo}, {"hi", hi}}}}; }

// Two-state system with constant matrices; sets chosen so that the contracting
// certificate below passes every condition.
json simple_config(json A, json A1, json E, int h = 1) {
  return {{"name", "simple"},
          {"system", {{"n", 2}, {"m", 1}, {"h", h}, {"A", A}, {"A1", A1}, {"G", {{0}, {0}}}, {"E", E}}},
          {"sets",
           {{"X", box({-10, -10}, {10, 10})},
            {"Xa", box({-0.5, -0.5}, {0.5, 0.5})},
            {"Xb", json::array({box({6, -10}, {10, 10})})}}},
          {"input", box({-1}, {1})},
          {"spec", {{"T", 10}}}};
}

synth::QcbcCertificate qcbc(MatrixXd P, MatrixXd P1, double ga, double gb, double eta) {
  synth::QcbcCertificate c;
  c.P = std::move(P);
  c.P1 = std::move(P1);
  c.gamma_a = ga;
  c.gamma_b = gb;
  c.eta = eta;
  return c;
}

VectorXd uniform(std::mt19937_64& rng, int n, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

TEST(DecreaseOracleTest, ZeroDynamicsFormula) {
  auto prob = model::load_problem(simple_config({{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, {{0.3, 0.1}, {-0.2, 0.4}}));
  const auto& sys = prob.system;
  MatrixXd P(2, 2), P1(2, 2);
  P << 2.0, 0.3, 0.3, 1.0;
  P1 << 0.5, -0.1, -0.1, 0.7;
  auto cert = qcbc(P, P1, 1, 2, 0);
  auto ctrl = synth::Controller::zero(sys.space, 1);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    VectorXd x = uniform(rng, 2, 10), xh = uniform(rng, 2, 10);
    double expect = (sys.E.transpose() * P * sys.E).trace() - x.dot(P * x) - xh.dot(P1 * xh) + x.dot(P1 * x);
    EXPECT_NEAR(decrease_oracle(sys, cert, ctrl, x, xh), expect, 1e-10);
  }
}

TEST(DecreaseOracleTest, NoiselessIdentityIsConstant) {
  auto prob = model::load_problem(simple_config({{1, 0}, {0, 1}}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}));
  auto cert = qcbc(MatrixXd::Identity(2, 2) * 3.0, MatrixXd::Zero(2, 2), 1, 2, 0);
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    EXPECT_NEAR(decrease_oracle(prob.system, cert, ctrl, uniform(rng, 2, 10), uniform(rng, 2, 10)), 0.0, 1e-12);
  }
}

TEST(DecreaseOracleTest, OutsidePointWarns) {
  auto prob = model::load_problem(simple_config({{1, 0}, {0, 1}}, {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}));
  auto cert = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 1, 2, 0);
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  std::string warning;
  double v = decrease_oracle(prob.system, cert, ctrl, VectorXd::Constant(2, 20.0), VectorXd::Zero(2), &warning);
  EXPECT_FALSE(warning.empty());
  EXPECT_NEAR(v, 0.0, 1e-12);
  warning.clear();
  decrease_oracle(prob.system, cert, ctrl, VectorXd::Zero(2), VectorXd::Zero(2), &warning);
  EXPECT_TRUE(warning.empty());
}

// The same quadratic barrier through the numeric and the symbolic path.
TEST(DecreaseOracleTest, QuadraticAndPolynomialPathsAgree) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  const auto& sys = prob.system;
  auto bundle = synth::load_bundle_file(kConfigs + "/certs/academic_qcbc.json", sys);
  const auto& q = std::get<synth::QcbcCertificate>(bundle.certificate);
  synth::PcbcCertificate p{poly::parse("0.01*x1^2 + 0.01*x2^2", sys.space),
                           poly::parse("0.005*x1^2 + 0.005*x2^2", sys.space), q.gamma_a, q.gamma_b, q.eta};
  DecreaseOracle sym(sys, p, bundle.controller);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    VectorXd x = uniform(rng, 2, 10), xh = uniform(rng, 2, 10);
    double a = decrease_oracle(sys, q, bundle.controller, x, xh);
    EXPECT_NEAR(a, sym(x, xh), 1e-10);
    EXPECT_NEAR(a, decrease_oracle(sys, p, bundle.controller, x, xh), 1e-10);
  }
}

TEST(CheckTest, ContractingSystemPasses) {
  auto prob = model::load_problem(simple_config({{0.5, 0}, {0, 0.5}}, {{0, 0}, {0, 0}}, {{0.1, 0}, {0, 0.1}}));
  // E[B+] - B = 0.25|x|^2 + 0.02 + 0.1|x|^2 - |x|^2 - 0.1|xh|^2 <= 0.02.
  // sup over Xa of |x|^2 + 0.1|x|^2 is 0.55; inf over Xb of |x|^2 is 36.
  auto cert = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 0.1, 0.55, 36.0, 0.02);
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  CheckOptions o;
  o.samples = 2000;
  auto r = check_certificate(prob, cert, ctrl, o);
  EXPECT_TRUE(r.pass) << r.to_json().dump(1);
  EXPECT_NE(r.note.find("not a proof"), std::string::npos);
  EXPECT_NEAR(r.find("initial")->violation, 0.0, 1e-9);
  EXPECT_NEAR(r.find("unsafe1")->violation, 0.0, 1e-9);
  EXPECT_NEAR(r.find("decrease")->violation, 0.0, 1e-9);
  EXPECT_GT(r.find("decrease")->samples, o.samples);
  EXPECT_NEAR(r.bound, 1.0 - (0.55 + 0.02 * 10) / 36.0, 1e-12);
  EXPECT_TRUE(barrier_is_sos(prob.system, cert));
}

TEST(CheckTest, InflatedUnsafeLevelFailsWithWitness) {
  auto prob = model::load_problem(simple_config({{0.5, 0}, {0, 0.5}}, {{0, 0}, {0, 0}}, {{0.1, 0}, {0, 0.1}}));
  auto cert = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 0.1, 0.55, 3600.0, 0.02);
  auto ctrl = synth::Controller::zero(prob.system.space, 1);
  CheckOptions o;
  o.samples = 2000;
  auto r = check_certificate(prob, cert, ctrl, o);
  EXPECT_FALSE(r.pass);
  const auto* u = r.find("unsafe1");
  ASSERT_NE(u, nullptr);
  EXPECT_FALSE(u->pass);
  EXPECT_NEAR(u->violation, 3600.0 - 36.0, 1e-6);
  EXPECT_TRUE(prob.system.Xb[0].contains(u->x));
  EXPECT_TRUE(r.find("initial")->pass);
  EXPECT_TRUE(r.find("decrease")->pass);
}

TEST(CheckTest, IndefiniteP1FailsSideCondition) {
  auto prob = model::load_problem(simple_config({{0.5, 0}, {0, 0.5}}, {{0, 0}, {0, 0}}, {{0.1, 0}, {0, 0.1}}));
  MatrixXd P1(2, 2);
  P1 << 0.1, 0.0, 0.0, -0.01;
  auto cert = qcbc(MatrixXd::Identity(2, 2), P1, 0.55, 36.0, 0.02);
  auto r = check_certificate(prob, cert, synth::Controller::zero(prob.system.space, 1), CheckOptions{.samples = 500});
  EXPECT_FALSE(r.pass);
  bool found = false;
  for (const auto& s : r.side) {
    if (s.name == "P1_psd") {
      found = true;
      EXPECT_FALSE(s.pass);
      EXPECT_NEAR(s.value, -0.01, 1e-12);
    }
  }
  EXPECT_TRUE(found);
  EXPECT_FALSE(barrier_is_sos(prob.system, cert));
}

TEST(CheckTest, ShapeMismatchThrows) {
  auto prob = model::load_problem(simple_config({{0.5, 0}, {0, 0.5}}, {{0, 0}, {0, 0}}, {{0.1, 0}, {0, 0.1}}));
  auto cert = qcbc(MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3), 1, 2, 0);
  EXPECT_THROW(check_certificate(prob, cert, synth::Controller::zero(prob.system.space, 1)), ShapeError);
  auto ok = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 1, 2, 0);
  EXPECT_THROW(check_certificate(prob, ok, synth::Controller::zero(prob.system.space, 2)), Error);
}

TEST(CheckTest, Deterministic) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto b = synth::load_bundle_file(kConfigs + "/certs/academic_qcbc.json", prob.system);
  CheckOptions o;
  o.samples = 1000;
  o.threads = 3;
  auto r1 = check_certificate(prob, b.certificate, b.controller, o);
  o.threads = 1;
  auto r2 = check_certificate(prob, b.certificate, b.controller, o);
  EXPECT_EQ(r1.to_json().dump(), r2.to_json().dump());
}

// The printed academic quadratic certificate violates its own level sets:
// sup over Xa of x'Px + 3 x'P1x is 0.0125 against gamma_a = 0.01, and
// x'Px reaches only 0.36 on the first unsafe box against gamma_b = 0.64.
TEST(PublishedTest, AcademicQuadraticLevelsAreInconsistent) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  auto b = synth::load_bundle_file(kConfigs + "/certs/academic_qcbc.json", prob.system);
  auto r = check_certificate(prob, b.certificate, b.controller, CheckOptions{.samples = 2000});
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.find("initial")->violation, 0.0025, 1e-12);
  EXPECT_NEAR(r.find("unsafe1")->violation, 0.64 - 0.36, 1e-12);
  EXPECT_TRUE(r.find("unsafe2")->pass);
  EXPECT_NEAR(r.bound, 1.0 - (0.01 + 0.001 * 40) / 0.64, 1e-12);
}

// At the origin the decrease equals Tr(E'PE). Elsewhere on Xa^2 the printed
// controller exceeds the printed eta by more than the 1e-3 slack allowed for
// rounded coefficients, so the failure is not a rounding artefact.
TEST(PublishedTest, AcademicDecreaseOnInitialSet) {
  auto prob = model::load_problem_file(kConfigs + "/academic.json");
  const auto& sys = prob.system;
  auto b = synth::load_bundle_file(kConfigs + "/certs/academic_qcbc.json", sys);
  const auto& q = std::get<synth::QcbcCertificate>(b.certificate);
  const double eta = (sys.E.transpose() * q.P * sys.E).trace();
  EXPECT_NEAR(eta, 0.01 * (0.0144 + 0.0196 + 0.0121 + 0.0225), 1e-15);
  DecreaseOracle f(sys, b.certificate, b.controller);
  EXPECT_NEAR(f(VectorXd::Zero(2), VectorXd::Zero(2)), eta, 1e-15);
  std::mt19937_64 rng(8);
  double worst = -1e300;
  for (int k = 0; k < 1000; ++k) worst = std::max(worst, f(uniform(rng, 2, 0.5), uniform(rng, 2, 0.5)));
  EXPECT_GT(worst, q.eta + 1e-3);
}

TEST(BoundTest, RecomputeMatchesTable) {
  synth::Certificate c = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 0.01, 0.83, 7.65e-4);
  EXPECT_NEAR(recompute_bound(c, 60), 0.9326, 1e-4);
  EXPECT_NEAR(recompute_bound(c, 60), 0.92, 0.03);
  double prev = recompute_bound(c, 1);
  for (int T = 2; T < 200; ++T) {
    double v = recompute_bound(c, T);
    EXPECT_LT(v, prev);
    prev = v;
  }
  synth::Certificate same = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 0.5, 0.5, 0.01);
  EXPECT_NEAR(recompute_bound(same, 10), -0.1 / 0.5, 1e-12);
  synth::Certificate bad = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 0.5, 0.0, 0.01);
  EXPECT_EQ(recompute_bound(bad, 10), -std::numeric_limits<double>::infinity());
}

TEST(ReportTest, JsonHasWitnessAndNote) {
  auto prob = model::load_problem(simple_config({{0.5, 0}, {0, 0.5}}, {{0, 0}, {0, 0}}, {{0.1, 0}, {0, 0.1}}));
  auto cert = qcbc(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 0.1, 0.55, 36.0, 0.02);
  auto r = check_certificate(prob, cert, synth::Controller::zero(prob.system.space, 1), CheckOptions{.samples = 300});
  auto j = r.to_json();
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_EQ(j.at("conditions").size(), r.conditions.size());
  EXPECT_TRUE(j.at("conditions")[0].contains("witness_x"));
  EXPECT_TRUE(j.contains("note"));
}

}  // namespace
}  // namespace tdsafe::verify
