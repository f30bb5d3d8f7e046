#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdsafe/model/sets.hpp"
#include "tdsafe/poly/poly_matrix.hpp"

namespace tdsafe::model {

// x+ = A(x,xh) x + A1(x,xh) xh + G(x,xh) u + E w,  w ~ N(0, I_n).
// All polynomials live in one space with groups x, xh, u, w, y (y has 3n
// entries and is used to scalarise matrix SOS constraints).
struct System {
  std::string name;
  int n = 0;
  int m = 0;
  int h = 1;
  poly::SpacePtr space;
  poly::PolyMatrix A;
  poly::PolyMatrix A1;
  poly::PolyMatrix G;
  Eigen::MatrixXd E;
  SemialgebraicSet X;
  SemialgebraicSet Xa;
  std::vector<SemialgebraicSet> Xb;
  InputSet U;

  // Full-length point with x and xh filled in (u, w, y zero).
  std::vector<double> point(const Eigen::VectorXd& x, const Eigen::VectorXd& xh) const;
  // Noise-free drift A x + A1 xh + G u at numeric arguments.
  Eigen::VectorXd drift(const Eigen::VectorXd& x, const Eigen::VectorXd& xh,
                        const Eigen::VectorXd& u) const;
  // Symbolic x+ as an n x 1 matrix in (x, xh, u, w).
  poly::PolyMatrix successor() const;
  bool in_unsafe(const Eigen::VectorXd& x) const;
  bool in_initial(const Eigen::VectorXd& x) const { return Xa.contains(x); }

  std::string fingerprint;  // hash of the canonical configuration
};

struct SafetySpec {
  int T = 1;
};

struct Problem {
  System system;
  SafetySpec spec;
};

}  // namespace tdsafe::model
