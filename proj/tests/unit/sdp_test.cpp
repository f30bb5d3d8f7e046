#include <random>

#include <gtest/gtest.h>

#include "tdsafe/common/error.hpp"
#include "tdsafe/sdp/solver.hpp"

namespace tdsafe::sdp {
namespace {

using sos::SdpEntry;
using sos::SdpProblem;
using sos::SdpRow;

// min t  s.t. [[t, 1], [1, t]] PSD, with t a free variable.
SdpProblem two_by_two() {
  SdpProblem p;
  p.block_sizes = {2};
  p.num_free = 1;
  p.rows.push_back(SdpRow{{{0, 0, 0, 1.0}}, {{0, -1.0}}, 0.0});
  p.rows.push_back(SdpRow{{{0, 1, 1, 1.0}}, {{0, -1.0}}, 0.0});
  p.rows.push_back(SdpRow{{{0, 0, 1, 1.0}}, {}, 1.0});
  p.objective_free = {{0, 1.0}};
  return p;
}

TEST(SdpTest, TwoByTwoOptimum) {
  SdpSolution s = solve(two_by_two());
  ASSERT_EQ(s.status, Status::kOptimal) << s.message;
  EXPECT_NEAR(s.f[0], 1.0, 1e-6);
  EXPECT_NEAR(s.primal_objective, 1.0, 1e-6);
  EXPECT_LE(s.eq_residual, 1e-7);
}

TEST(SdpTest, InfeasibleScalar) {
  // X = -1 with X PSD.
  SdpProblem p;
  p.block_sizes = {1};
  p.rows.push_back(SdpRow{{{0, 0, 0, 1.0}}, {}, -1.0});
  SdpSolution s = solve(p);
  EXPECT_EQ(s.status, Status::kInfeasible);
  ASSERT_EQ(s.certificate.size(), 1);
  EXPECT_LT(s.certificate[0], 0.0);
}

TEST(SdpTest, ZeroRowWithNonzeroRhsIsInfeasible) {
  SdpProblem p;
  p.block_sizes = {1};
  p.rows.push_back(SdpRow{{}, {}, 2.0});
  EXPECT_EQ(solve(p).status, Status::kInfeasible);
}

TEST(SdpTest, UnboundedFreeVariable) {
  SdpProblem p;
  p.block_sizes = {1};
  p.num_free = 2;
  p.rows.push_back(SdpRow{{{0, 0, 0, 1.0}}, {{0, 1.0}, {1, -1.0}}, 1.0});
  p.objective_free = {{0, 1.0}};
  // x0 = 1 - X + x1, x1 free: objective unbounded below.
  EXPECT_EQ(solve(p).status, Status::kUnbounded);
}

SdpProblem random_problem(std::mt19937_64& rng, bool with_objective) {
  std::uniform_int_distribution<int> nblocks(1, 3), bsize(1, 6), nrows(1, 12);
  std::normal_distribution<double> g;
  SdpProblem p;
  int nb = nblocks(rng);
  std::vector<Eigen::MatrixXd> X0;
  for (int k = 0; k < nb; ++k) {
    int s = bsize(rng);
    p.block_sizes.push_back(s);
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(s, s, [&] { return g(rng); });
    X0.push_back(a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(s, s));
  }
  p.num_free = std::uniform_int_distribution<int>(0, 2)(rng);
  Eigen::VectorXd f0 = Eigen::VectorXd::NullaryExpr(p.num_free, [&] { return g(rng); });
  int m = nrows(rng);
  for (int i = 0; i < m; ++i) {
    SdpRow row;
    double rhs = 0.0;
    for (int k = 0; k < nb; ++k) {
      for (int r = 0; r < p.block_sizes[k]; ++r) {
        for (int c = r; c < p.block_sizes[k]; ++c) {
          if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.5) continue;
          double v = g(rng);
          row.entries.push_back({k, r, c, v});
          rhs += v * X0[k](r, c);
        }
      }
    }
    for (int j = 0; j < p.num_free; ++j) {
      double v = g(rng);
      row.free.emplace_back(j, v);
      rhs += v * f0[j];
    }
    row.rhs = rhs;
    p.rows.push_back(row);
  }
  if (with_objective) {
    // Identity objective on every block keeps the problem bounded.
    for (int k = 0; k < nb; ++k) {
      for (int r = 0; r < p.block_sizes[k]; ++r) p.objective.push_back({k, r, r, 1.0});
    }
  }
  return p;
}

// Relative to 1 + max |rhs|, matching the solver's tolerance.
double row_residual(const SdpProblem& p, const SdpSolution& s) {
  double worst = 0.0, bmax = 0.0;
  for (const auto& row : p.rows) {
    double v = 0.0;
    for (const auto& e : row.entries) v += e.value * s.X[e.block](e.row, e.col);
    for (const auto& [j, c] : row.free) v += c * s.f[j];
    worst = std::max(worst, std::abs(v - row.rhs));
    bmax = std::max(bmax, std::abs(row.rhs));
  }
  return worst / (1.0 + bmax);
}

TEST(SdpTest, RandomFeasibleProblems) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 50; ++t) {
    SdpProblem p = random_problem(rng, t % 2 == 1);
    SdpSolution s = solve(p);
    ASSERT_TRUE(s.usable()) << "instance " << t << ": " << to_string(s.status) << " " << s.message;
    EXPECT_LE(row_residual(p, s), 1e-7) << t;
    for (const auto& x : s.X) EXPECT_GE(posdef_check(x).min_eig, -1e-8);
    if (p.has_objective()) {
      EXPECT_EQ(s.status, Status::kOptimal);
      EXPECT_NEAR(s.primal_objective, s.dual_objective, 1e-5 * (1 + std::abs(s.primal_objective)));
    }
  }
}

TEST(SdpTest, Deterministic) {
  std::mt19937_64 rng(99);
  SdpProblem p = random_problem(rng, true);
  SdpSolution a = solve(p), b = solve(p);
  ASSERT_EQ(a.X.size(), b.X.size());
  for (std::size_t k = 0; k < a.X.size(); ++k) EXPECT_TRUE(a.X[k] == b.X[k]);
  EXPECT_EQ(a.primal_objective, b.primal_objective);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SdpTest, TextRoundTrip) {
  std::mt19937_64 rng(5);
  SdpProblem p = random_problem(rng, true);
  SdpProblem q = sos::read_sdp_text(sos::write_sdp_text(p));
  EXPECT_EQ(sos::write_sdp_text(q), sos::write_sdp_text(p));
  EXPECT_THROW(sos::read_sdp_text("sdp 1\nblocks 1 2\nfoo\nend\n"), ParseError);
  EXPECT_THROW(sos::read_sdp_text("sdp 1\nblocks 1 2\nrow 1\nB 0 1 0 1\nend\n"), Error);
}

TEST(SdpTest, PosdefCheck) {
  Eigen::Matrix2d a;
  a << 2, 1, 1, 2;
  EXPECT_TRUE(posdef_check(a).psd);
  EXPECT_NEAR(posdef_check(a).min_eig, 1.0, 1e-12);
  a(0, 1) = 1 + 1e-6;
  EXPECT_THROW(posdef_check(a), Error);
  Eigen::Matrix2d b;
  b << 1, 2, 2, 1;
  EXPECT_FALSE(posdef_check(b).psd);
}

}  // namespace
}  // namespace tdsafe::sdp
