#pragma once

#include <vector>

#include <Eigen/Dense>

#include "tdsafe/model/sets.hpp"

namespace tdsafe::synth {

struct LevelSets {
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  bool separated() const { return gamma_b > gamma_a; }
};

// gamma_a = (lmax(P) + h lmax(P1)) max_{Xa} |x|^2, gamma_b = lmin(P) min_{Xb} |x|^2
// over all unsafe regions. Extrema of |x|^2 are taken over the bounding boxes,
// which is exact for box sets and conservative otherwise.
LevelSets level_sets(const Eigen::MatrixXd& P, const Eigen::MatrixXd& P1, int h,
                     const model::SemialgebraicSet& Xa, const std::vector<model::SemialgebraicSet>& Xb);

// Tr(E^T P E).
double eta_from_P(const Eigen::MatrixXd& P, const Eigen::MatrixXd& E);

// 1 - (gamma_a + eta T) / gamma_b. May be negative. Throws if gamma_b <= 0.
double safety_bound(double gamma_a, double gamma_b, double eta, int T);

// Closed-loop blocks M0 = A + G F and M1 = A1 + G F1 at one point.
//   R      = [[P - P1, 0, M0^T], [0, P1, M1^T], [M0, M1, P^-1]]
//   Lambda = [M0 M1]^T P [M0 M1] - diag(P - P1, P1)
// For P > 0, R >= 0 iff Lambda <= 0.
Eigen::MatrixXd schur_block(const Eigen::MatrixXd& P, const Eigen::MatrixXd& P1, const Eigen::MatrixXd& M0,
                            const Eigen::MatrixXd& M1);
Eigen::MatrixXd decrease_matrix(const Eigen::MatrixXd& P, const Eigen::MatrixXd& P1, const Eigen::MatrixXd& M0,
                                const Eigen::MatrixXd& M1);

}  // namespace tdsafe::synth
