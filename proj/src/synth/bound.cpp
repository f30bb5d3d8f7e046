#include "tdsafe/synth/bound.hpp"

#include <algorithm>
#include <limits>

#include "tdsafe/common/error.hpp"

namespace tdsafe::synth {

using Eigen::MatrixXd;

namespace {

Eigen::VectorXd eigenvalues(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

LevelSets level_sets(const MatrixXd& P, const MatrixXd& P1, int h, const model::SemialgebraicSet& Xa,
                     const std::vector<model::SemialgebraicSet>& Xb) {
  if (P.rows() != P.cols() || P1.rows() != P.rows() || P1.cols() != P.cols()) {
    throw ShapeError("level_sets: P and P1 must be square of equal size");
  }
  if (Xb.empty()) throw Error("level_sets: no unsafe region");
  auto ep = eigenvalues(P), e1 = eigenvalues(P1);
  double rb = std::numeric_limits<double>::infinity();
  for (const auto& r : Xb) rb = std::min(rb, r.bounds().min_sq_norm());
  LevelSets ls;
  ls.gamma_a = (ep.maxCoeff() + h * e1.maxCoeff()) * Xa.bounds().max_sq_norm();
  ls.gamma_b = ep.minCoeff() * rb;
  return ls;
}

double eta_from_P(const MatrixXd& P, const MatrixXd& E) {
  if (P.rows() != P.cols() || E.rows() != P.rows()) throw ShapeError("eta_from_P: E and P do not conform");
  return (E.transpose() * P * E).trace();
}

double safety_bound(double gamma_a, double gamma_b, double eta, int T) {
  if (!(gamma_b > 0.0)) throw Error("safety_bound: gamma_b must be positive");
  return 1.0 - (gamma_a + eta * T) / gamma_b;
}

MatrixXd schur_block(const MatrixXd& P, const MatrixXd& P1, const MatrixXd& M0, const MatrixXd& M1) {
  const auto n = P.rows();
  MatrixXd R = MatrixXd::Zero(3 * n, 3 * n);
  R.block(0, 0, n, n) = P - P1;
  R.block(n, n, n, n) = P1;
  R.block(0, 2 * n, n, n) = M0.transpose();
  R.block(n, 2 * n, n, n) = M1.transpose();
  R.block(2 * n, 0, n, n) = M0;
  R.block(2 * n, n, n, n) = M1;
  R.block(2 * n, 2 * n, n, n) = P.llt().solve(MatrixXd::Identity(n, n));
  return 0.5 * (R + R.transpose());
}

MatrixXd decrease_matrix(const MatrixXd& P, const MatrixXd& P1, const MatrixXd& M0, const MatrixXd& M1) {
  const auto n = P.rows();
  MatrixXd M(n, 2 * n);
  M << M0, M1;
  MatrixXd L = M.transpose() * P * M;
  L.block(0, 0, n, n) -= P - P1;
  L.block(n, n, n, n) -= P1;
  return 0.5 * (L + L.transpose());
}

}  // namespace tdsafe::synth
