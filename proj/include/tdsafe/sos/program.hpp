#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdsafe/sdp/solver.hpp"
#include "tdsafe/sos/affine.hpp"
#include "tdsafe/sos/sdp_problem.hpp"

namespace tdsafe::sos {

struct DecisionVar {
  enum class Kind { kFree, kBlockEntry };
  Kind kind = Kind::kFree;
  std::string name;
  int block = -1;  // kBlockEntry
  int row = -1;
  int col = -1;
  int free_index = -1;  // kFree
};

// Symmetric matrix of unknowns, either a PSD block or free entries.
struct SymMatrixVar {
  int n = 0;
  int block = -1;  // -1 when the entries are free
  std::vector<AffineExpr> entries;  // row-major n x n, symmetric

  const AffineExpr& operator()(int i, int j) const { return entries[static_cast<std::size_t>(i) * n + j]; }
  LinPolyMatrix as_poly_matrix(const poly::SpacePtr& space) const;
};

// A Gram-matrix SOS constraint: target(x) = z(x)^T Q z(x), Q PSD.
struct SosHandle {
  std::string name;
  int block = -1;
  std::vector<poly::Exponent> basis;
};

struct SosOptions {
  // Prune Gram bases with the bounding box of the Newton polytope.
  bool newton_prune = false;
};

// Smallest even k >= max(2, target_degree - descriptor_degree), lowered by 2
// when k + descriptor_degree would overshoot target_degree by an odd amount.
int multiplier_degree(int target_degree, int descriptor_degree);

// Monomials of total degree <= max_degree in the listed groups (graded-lex).
std::vector<poly::Exponent> monomial_basis(const poly::VarSpace& space,
                                           const std::vector<std::string>& groups, int max_degree);

class SosProgram {
 public:
  explicit SosProgram(poly::SpacePtr space, SosOptions options = {});

  const poly::SpacePtr& space() const { return space_; }

  AffineExpr new_free(const std::string& name);
  AffineExpr new_nonneg(const std::string& name);
  SymMatrixVar new_psd(int n, const std::string& name);
  SymMatrixVar new_symmetric(int n, const std::string& name);
  // Polynomial with free coefficients on every monomial of degree
  // min_degree..degree in `groups`.
  LinPolynomial new_free_poly(const std::vector<std::string>& groups, int degree, const std::string& name,
                              int min_degree = 0);
  // z^T Q z with Q PSD, z all monomials of degree <= degree/2 in `groups`.
  LinPolynomial new_sos_poly(const std::vector<std::string>& groups, int degree, const std::string& name);
  LinPolynomial multiplier(const std::vector<std::string>& groups, int degree, bool sos,
                           const std::string& name);

  // target is SOS. Throws on odd degree.
  SosHandle add_sos(const LinPolynomial& target, const std::string& name);
  // y^T M(x) y is SOS, using the y group of the space for scalarisation.
  SosHandle add_matrix_sos(const LinPolyMatrix& M, const std::string& name);
  // Constant symmetric affine matrix is PSD (via a slack block).
  void add_psd(const LinPolyMatrix& M, const std::string& name);
  void add_equality(const AffineExpr& e, const std::string& name);
  void minimize(const AffineExpr& objective);

  // Product that reports the names of offending unknowns.
  LinPolynomial product(const LinPolynomial& a, const LinPolynomial& b) const;
  std::string describe(int id) const;

  SdpProblem compile() const;

  double value(const AffineExpr& e, const sdp::SdpSolution& s) const;
  Eigen::MatrixXd value(const SymMatrixVar& m, const sdp::SdpSolution& s) const;
  poly::Polynomial value(const LinPolynomial& p, const sdp::SdpSolution& s) const;
  poly::PolyMatrix value(const LinPolyMatrix& m, const sdp::SdpSolution& s) const;
  // Smallest eigenvalue of the Gram matrix of a constraint.
  double gram_min_eig(const SosHandle& h, const sdp::SdpSolution& s) const;

  int num_vars() const { return static_cast<int>(vars_.size()); }
  const DecisionVar& var(int id) const { return vars_.at(id); }
  const std::vector<SosHandle>& sos_constraints() const { return handles_; }
  const std::vector<int>& block_sizes() const { return block_sizes_; }

 private:
  int new_block(int n, const std::string& name, std::vector<int>& ids);
  std::vector<double> values(const sdp::SdpSolution& s) const;

  poly::SpacePtr space_;
  SosOptions options_;
  std::vector<DecisionVar> vars_;
  std::vector<int> block_sizes_;
  int num_free_ = 0;
  std::vector<AffineExpr> equalities_;
  std::vector<std::string> equality_names_;
  std::vector<SosHandle> handles_;
  AffineExpr objective_;
};

}  // namespace tdsafe::sos
