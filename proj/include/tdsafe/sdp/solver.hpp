#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdsafe/sos/sdp_problem.hpp"

namespace tdsafe::sdp {

enum class Status { kOptimal, kFeasible, kInfeasible, kUnbounded, kNumericalFailure };

std::string to_string(Status s);

struct SolveOptions {
  double eq_tol = 1e-7;      // max |b - A(X) - B f| / (1 + max |b|), original row scaling
  double eig_tol = 1e-8;     // min eigenvalue of every X_k must be >= -eig_tol
  double gap_tol = 1e-7;     // relative duality gap for optimality
  double infeas_tol = 1e-8;  // dual ray quality needed to declare infeasibility
  int max_iters = 200;
  double time_limit = 600.0;  // seconds
  // Pure feasibility problems stop as soon as an interior feasible point is found.
  bool early_feasible_stop = true;
  bool verbose = false;
};

struct SdpSolution {
  Status status = Status::kNumericalFailure;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd f;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> Z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double eq_residual = 0.0;  // max abs equality residual, original scaling
  double min_eig = 0.0;      // smallest eigenvalue over all X blocks
  int iterations = 0;
  double seconds = 0.0;
  std::string message;
  // For kInfeasible: y with b^T y = 1, B^T y ~ 0 and -A*(y) ~ PSD.
  Eigen::VectorXd certificate;

  bool usable() const { return status == Status::kOptimal || status == Status::kFeasible; }
};

// Primal-dual interior point method (HKM direction, Mehrotra
// predictor-corrector, free variables through the KKT system).
SdpSolution solve(const sos::SdpProblem& problem, const SolveOptions& options = {});

struct PosdefReport {
  double min_eig = 0.0;
  bool psd = false;
};

// Eigenvalue test; throws if asymmetry exceeds 1e-10.
PosdefReport posdef_check(const Eigen::MatrixXd& m, double tol = 1e-8);

}  // namespace tdsafe::sdp
