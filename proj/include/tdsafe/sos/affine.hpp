#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "tdsafe/poly/poly_matrix.hpp"

namespace tdsafe::sos {

// c0 + sum_k a_k v_k over decision variables v_k (ids), terms sorted by id.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(double c) : constant_(c) {}  // NOLINT: numbers are affine expressions

  static AffineExpr variable(int id, double coef = 1.0) {
    AffineExpr e;
    if (coef != 0.0) e.terms_.emplace_back(id, coef);
    return e;
  }

  double constant() const noexcept { return constant_; }
  const std::vector<std::pair<int, double>>& terms() const noexcept { return terms_; }
  bool is_constant() const noexcept { return terms_.empty(); }

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);
  AffineExpr& operator*=(double s);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  // Throws BilinearError when both factors contain unknowns.
  friend AffineExpr operator*(const AffineExpr& a, const AffineExpr& b);

  bool operator==(const AffineExpr& o) const {
    return constant_ == o.constant_ && terms_ == o.terms_;
  }

  double evaluate(std::span<const double> values) const;
  // Drop coefficients with magnitude <= tol.
  void prune(double tol);

 private:
  double constant_ = 0.0;
  std::vector<std::pair<int, double>> terms_;
};

using LinPolynomial = poly::BasicPolynomial<AffineExpr>;
using LinPolyMatrix = poly::BasicPolyMatrix<AffineExpr>;

}  // namespace tdsafe::sos

namespace tdsafe::poly {

template <>
struct CoeffOps<sos::AffineExpr> {
  static sos::AffineExpr zero() { return {}; }
  static sos::AffineExpr one() { return {1.0}; }
  static bool negligible(const sos::AffineExpr& c, double tol) {
    return c.is_constant() && std::abs(c.constant()) <= tol;
  }
  static void prune(sos::AffineExpr& c, double tol) { c.prune(tol); }
  static sos::AffineExpr mul(const sos::AffineExpr& a, const sos::AffineExpr& b) { return a * b; }
  static sos::AffineExpr scale(const sos::AffineExpr& a, double s) { return a * s; }
};

}  // namespace tdsafe::poly
