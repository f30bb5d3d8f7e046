#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "tdsafe/model/config.hpp"
#include "tdsafe/poly/io.hpp"
#include "tdsafe/synth/bound.hpp"
#include "tdsafe/synth/certificate.hpp"
#include "tdsafe/synth/synthesis.hpp"

namespace tdsafe::synth {
namespace {

using Eigen::MatrixXd;
using nlohmann::json;

model::SemialgebraicSet box_set(const poly::SpacePtr& sp, std::vector<double> lo, std::vector<double> hi) {
  model::Box b{Eigen::Map<Eigen::VectorXd>(lo.data(), lo.size()), Eigen::Map<Eigen::VectorXd>(hi.data(), hi.size())};
  return model::SemialgebraicSet::from_box(sp, b);
}

TEST(BoundTest, TableRows) {
  EXPECT_NEAR(safety_bound(0.25, 3.77, 0.003, 20), 1.0 - 0.31 / 3.77, 1e-12);
  EXPECT_NEAR(safety_bound(0.25, 3.77, 0.003, 20), 0.9178, 1e-4);
  EXPECT_NEAR(safety_bound(0.1, 11.08, 6.31e-4, 40), 0.9887, 1e-4);
  EXPECT_NEAR(safety_bound(0.01, 0.83, 7.65e-4, 60), 0.9326, 1e-4);
  EXPECT_EQ(safety_bound(0.0, 2.0, 0.0, 1000), 1.0);
  EXPECT_THROW(safety_bound(0.1, 0.0, 0.0, 10), Error);
  EXPECT_THROW(safety_bound(0.1, -1.0, 0.0, 10), Error);
}

TEST(BoundTest, NegativeBoundIsKept) {
  EXPECT_LT(safety_bound(1.0, 1.0, 0.1, 10), 0.0);
}

TEST(BoundTest, ScaleInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    double ga = u(rng), gb = ga + 0.1 + 10 * u(rng), eta = 1e-3 * u(rng), c = std::exp(10 * u(rng) - 5);
    int T = 1 + t;
    double a = safety_bound(ga, gb, eta, T), b = safety_bound(c * ga, c * gb, c * eta, T);
    EXPECT_NEAR(a, b, 8 * std::numeric_limits<double>::epsilon());
  }
}

TEST(BoundTest, DecreasesInHorizon) {
  double prev = safety_bound(0.1, 2.0, 1e-3, 1);
  for (int T = 2; T < 50; ++T) {
    double b = safety_bound(0.1, 2.0, 1e-3, T);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(BoundTest, LevelSetsFromEigenvalues) {
  auto sp = poly::VarSpace::standard(2, 1, 6);
  MatrixXd P = 0.01 * MatrixXd::Identity(2, 2), P1 = 0.005 * MatrixXd::Identity(2, 2);
  auto Xa = box_set(sp, {-0.5, -0.5}, {0.5, 0.5});
  std::vector<model::SemialgebraicSet> Xb{box_set(sp, {6, -10}, {10, 6})};
  auto ls = level_sets(P, P1, 3, Xa, Xb);
  EXPECT_NEAR(ls.gamma_a, 0.0125, 1e-15);
  EXPECT_NEAR(ls.gamma_b, 0.36, 1e-15);
  EXPECT_TRUE(ls.separated());
  // Identity certificate reduces to squared norms; the closer region wins.
  Xb.push_back(box_set(sp, {-10, 6}, {-6, 10}));
  Xb.push_back(box_set(sp, {2, 2}, {3, 3}));
  auto id = level_sets(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), 7, Xa, Xb);
  EXPECT_NEAR(id.gamma_a, 0.5, 1e-15);
  EXPECT_NEAR(id.gamma_b, 8.0, 1e-15);
}

TEST(BoundTest, EtaIsTrace) {
  MatrixXd E(2, 2);
  E << 0.12, 0.14, 0.11, 0.15;
  EXPECT_NEAR(eta_from_P(0.01 * MatrixXd::Identity(2, 2), E), 6.86e-4, 1e-15);
  MatrixXd Ej = MatrixXd::Zero(2, 2);
  Ej.diagonal() << 0.3, 0.33;
  EXPECT_NEAR(eta_from_P(0.005 * MatrixXd::Identity(2, 2), Ej), 9.945e-4, 1e-15);
  EXPECT_EQ(eta_from_P(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)), 0.0);
  EXPECT_THROW(eta_from_P(MatrixXd::Identity(3, 3), E), ShapeError);
}

// Block matrix PSD <=> quadratic decrease matrix NSD, on random instances of
// both kinds.
TEST(SchurTest, Equivalence) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  int psd_count = 0;
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + t % 3;
    MatrixXd L = MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
    MatrixXd P = L * L.transpose() + 0.5 * MatrixXd::Identity(n, n);
    MatrixXd L1 = MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
    MatrixXd P1 = 0.2 * L1 * L1.transpose() / n;
    double scale = (t % 2) ? 0.05 : 0.6;
    MatrixXd M0 = scale * MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
    MatrixXd M1 = scale * MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
    MatrixXd R = schur_block(P, P1, M0, M1), Lam = decrease_matrix(P, P1, M0, M1);
    ASSERT_EQ(R.rows(), 3 * n);
    ASSERT_EQ(Lam.rows(), 2 * n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> er(R), el(Lam);
    bool r_psd = er.eigenvalues().minCoeff() >= -1e-8;
    bool l_nsd = el.eigenvalues().maxCoeff() <= 1e-8;
    EXPECT_EQ(r_psd, l_nsd) << t;
    psd_count += r_psd;
  }
  EXPECT_GT(psd_count, 0);
  EXPECT_LT(psd_count, 30);
}

TEST(ControllerTest, FeedbackEvaluatesAsLaw) {
  auto sp = poly::VarSpace::standard(2, 1, 6);
  poly::PolyMatrix F(sp, 1, 2), F1(sp, 1, 2);
  F(0, 0) = poly::parse("1 + x2", sp);
  F1(0, 1) = poly::parse("-2", sp);
  auto c = Controller::feedback(F, F1);
  EXPECT_EQ(c.kind(), Controller::Kind::kFeedback);
  EXPECT_EQ(poly::to_string(c.laws()[0]), poly::to_string(poly::parse("x1 + x1*x2 - 2*xh2", sp)));
  std::vector<double> pt(sp->size(), 0.0);
  pt[0] = 2;
  pt[1] = 3;
  pt[sp->index("xh", 2)] = 1;
  EXPECT_NEAR(c.evaluate(pt)[0], 2 + 6 - 2, 1e-15);
}

json academic_config() {
  return json::parse(R"({
    "system": {"n": 2, "m": 1, "h": 3,
      "A": [["1 + 0.1*x2", "0.1*xh1"], [-0.05, 1]],
      "A1": [["-0.1 + 0.1*x2", 0], [0, 0.1]],
      "G": [[0], [0.1]],
      "E": [[0.12, 0.14], [0.11, 0.15]]},
    "sets": {"X": {"box": {"lo": [-10, -10], "hi": [10, 10]}},
             "Xa": {"box": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]}},
             "Xb": [{"box": {"lo": [6, -10], "hi": [10, 6]}}]},
    "input": {"box": {"lo": [-10], "hi": [10]}},
    "spec": {"T": 40}})");
}

TEST(CertificateTest, BundleRoundTrip) {
  auto prob = model::load_problem(academic_config());
  const auto& sys = prob.system;
  QcbcCertificate q{0.01 * MatrixXd::Identity(2, 2), 0.005 * MatrixXd::Identity(2, 2), 0.01, 0.64, 0.001, 1e-5, std::nullopt};
  CertificateBundle b{"qcbc", q, Controller::explicit_law({poly::parse("0.00036*x1^2 - 1.57*x2 + 0.05*xh1", sys.space)}),
                      sys.fingerprint, 40, 0.9};
  json j = to_json(b);
  auto back = bundle_from_json(j, sys);
  EXPECT_EQ(to_json(back), j);
  const auto& qb = std::get<QcbcCertificate>(back.certificate);
  EXPECT_EQ(qb.P, q.P);
  EXPECT_EQ(*qb.alpha, 1e-5);
  EXPECT_EQ(back.controller.laws()[0], b.controller.laws()[0]);

  PcbcCertificate p{poly::parse("x1^4 + x2^2 + 0.5", sys.space), poly::parse("0.1*x1^2", sys.space), 0.1, 11.08, 6.31e-4};
  CertificateBundle bp{"pcbc", p, Controller::zero(sys.space, 1), sys.fingerprint, 40, 0.98};
  auto back2 = bundle_from_json(to_json(bp), sys);
  EXPECT_EQ(std::get<PcbcCertificate>(back2.certificate).g, p.g);

  json bad = j;
  bad["certificate"]["P"] = json::array({json::array({1.0})});
  EXPECT_THROW(bundle_from_json(bad, sys), ConfigError);
  json bad_poly = to_json(bp);
  bad_poly["certificate"]["g"] = "u1^2";
  EXPECT_THROW(bundle_from_json(bad_poly, sys), ConfigError);
}

// A contractive system whose unsafe set lies far outside anything the noise
// can reach.
json easy_config(bool with_input) {
  json c = json::parse(R"({
    "system": {"n": 2, "m": 2, "h": 1,
      "A": [[0.5, 0], [0, 0.5]],
      "A1": [[0.1, 0], [0, 0.1]],
      "G": [[1, 0], [0, 1]],
      "E": [[1e-4, 0], [0, 1e-4]]},
    "sets": {"X": {"box": {"lo": [-10, -10], "hi": [10, 10]}},
             "Xa": {"box": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]}},
             "Xb": [{"box": {"lo": [9, -10], "hi": [10, 10]}}]},
    "input": {"box": {"lo": [-1, -1], "hi": [1, 1]}},
    "spec": {"T": 20}})");
  if (!with_input) c["input"] = "unconstrained";
  return c;
}

TEST(SynthTest, ConstrainedQcbcOnEasySystem) {
  auto prob = model::load_problem(easy_config(true));
  QcbcOptions opt;
  opt.alpha_points = 6;
  auto rep = synth_qcbc_constrained(prob, opt);
  ASSERT_TRUE(rep.ok) << rep.failure << "\n" << rep.trace_json().dump(1);
  const auto& b = *rep.result;
  const auto& q = std::get<QcbcCertificate>(b.certificate);
  EXPECT_GE(b.bound, 0.99);
  EXPECT_EQ(b.bound, safety_bound(q.gamma_a, q.gamma_b, q.eta, 20));
  EXPECT_NEAR(q.eta, eta_from_P(q.P, prob.system.E), 1e-15);
  ASSERT_TRUE(q.alpha.has_value());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q.P);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 / *q.alpha * (1 + 1e-6));
  EXPECT_GE(rep.trace.size(), 6u);
}

TEST(SynthTest, ConstrainedQcbcNeedsPolytope) {
  auto prob = model::load_problem(easy_config(false));
  EXPECT_THROW(synth_qcbc_constrained(prob), PreconditionError);
}

TEST(SynthTest, SosGammaModeOnEasySystem) {
  auto prob = model::load_problem(easy_config(true));
  QcbcOptions opt;
  opt.alpha_points = 4;
  opt.refine = false;
  opt.gamma_mode = GammaMode::kSos;
  auto rep = synth_qcbc_constrained(prob, opt);
  ASSERT_TRUE(rep.ok) << rep.failure;
  const auto& q = std::get<QcbcCertificate>(rep.result->certificate);
  EXPECT_GT(q.gamma_b, q.gamma_a);
}

TEST(SynthTest, UnconstrainedRecoversFeedback) {
  json c = easy_config(false);
  c["system"]["A"] = json::parse("[[1, 0], [0, 1]]");
  c["system"]["A1"] = json::parse("[[0, 0], [0, 0]]");
  auto prob = model::load_problem(c);
  auto rep = synth_qcbc_unconstrained(prob);
  ASSERT_TRUE(rep.ok) << rep.failure;
  const auto& b = *rep.result;
  const auto& q = std::get<QcbcCertificate>(b.certificate);
  EXPECT_FALSE(q.alpha.has_value());
  EXPECT_EQ(b.mode, "qcbc-free");
  ASSERT_TRUE(b.diagnostics.contains("recovery"));
  EXPECT_LE(b.diagnostics["recovery"]["PC_minus_I"].get<double>(), 1e-8);
  EXPECT_LE(b.diagnostics["recovery"]["FC_minus_Z"].get<double>(), 1e-8);
  EXPECT_GT(b.bound, 0.9);
}

TEST(SynthTest, PcbcRejectsOddDegree) {
  auto prob = model::load_problem(easy_config(true));
  PcbcOptions opt;
  opt.g_degree = 3;
  EXPECT_THROW(synth_pcbc(prob, opt), PreconditionError);
}

TEST(SynthTest, PcbcOnScalarSystem) {
  json c = json::parse(R"({
    "system": {"n": 1, "m": 1, "h": 2,
      "A": [[0.6]], "A1": [[0.1]], "G": [[0.5]], "E": [[0.01]]},
    "sets": {"X": {"box": {"lo": [-5], "hi": [5]}},
             "Xa": {"box": {"lo": [-0.5], "hi": [0.5]}},
             "Xb": [{"box": {"lo": [4], "hi": [5]}}]},
    "input": {"box": {"lo": [-1], "hi": [1]}},
    "spec": {"T": 10}})");
  auto prob = model::load_problem(c);
  PcbcOptions opt;
  opt.controller_degree = 1;
  auto rep = synth_pcbc(prob, opt);
  ASSERT_TRUE(rep.ok) << rep.failure << "\n" << rep.trace_json().dump(1);
  const auto& p = std::get<PcbcCertificate>(rep.result->certificate);
  EXPECT_GT(p.gamma_b, p.gamma_a);
  EXPECT_GE(rep.result->bound, 0.5);
  EXPECT_EQ(rep.result->bound, safety_bound(p.gamma_a, p.gamma_b, p.eta, 10));
  // Control law stays inside the input polytope.
  const auto& law = rep.result->controller.laws()[0];
  for (double x = -5; x <= 5; x += 0.5) {
    for (double xh = -5; xh <= 5; xh += 0.5) {
      std::vector<double> pt(prob.system.space->size(), 0.0);
      pt[0] = x;
      pt[prob.system.space->index("xh", 1)] = xh;
      EXPECT_LE(std::abs(poly::evaluate(law, pt)), 1 + 1e-6);
    }
  }
}

}  // namespace
}  // namespace tdsafe::synth
