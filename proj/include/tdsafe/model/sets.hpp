#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tdsafe/poly/polynomial.hpp"

namespace tdsafe::model {

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  double max_sq_norm() const;  // max |x|^2 over the box
  double min_sq_norm() const;  // min |x|^2 over the box
  bool intersects(const Box& o) const;
};

// {x : J_i(x) >= 0 for all i}. Descriptors are polynomials in the "x" group
// of a system space. Sampling draws from `bounds` with rejection.
class SemialgebraicSet {
 public:
  SemialgebraicSet(poly::SpacePtr space, std::vector<poly::Polynomial> descriptors, Box bounds,
                   bool is_box = false);

  // (hi_i - x_i)(x_i - lo_i) >= 0 for each coordinate.
  static SemialgebraicSet from_box(const poly::SpacePtr& space, const Box& box);

  const poly::SpacePtr& space() const { return space_; }
  const std::vector<poly::Polynomial>& descriptors() const { return j_; }
  const Box& bounds() const { return bounds_; }
  bool is_box() const { return is_box_; }
  int dim() const { return bounds_.dim(); }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  // Descriptor values at x.
  std::vector<double> evaluate(const Eigen::VectorXd& x) const;

 private:
  poly::SpacePtr space_;
  std::vector<poly::Polynomial> j_;
  Box bounds_;
  bool is_box_;
};

// Uniform samples from the bounding box, rejected outside the set.
// Throws "set too thin to sample" if acceptance stays below 0.1% after 1e6 draws.
std::vector<Eigen::VectorXd> sample_set(const SemialgebraicSet& set, int count, std::mt19937_64& rng);

// Input polytope {u : b_j^T u <= 1}. Empty rows means unconstrained.
struct InputSet {
  Eigen::MatrixXd rows;  // one b_j^T per row, m columns
  int m = 0;

  bool unconstrained() const { return rows.rows() == 0; }
  bool contains(const Eigen::VectorXd& u, double tol = 0.0) const;
  double max_violation(const Eigen::VectorXd& u) const;  // max_j b_j^T u - 1
};

// 2m rows e_q/hi_q and e_q/lo_q. The origin must be interior.
InputSet box_to_polytope(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

}  // namespace tdsafe::model
