#include "tdsafe/poly/polynomial.hpp"

#include "tdsafe/poly/poly_matrix.hpp"

namespace tdsafe::poly {

double evaluate(const Polynomial& p, std::span<const double> point) {
  const int n = p.space()->size();
  if (static_cast<int>(point.size()) != n) throw ShapeError("evaluation point has wrong length");
  double sum = 0.0;
  for (const auto& [e, c] : p.terms()) {
    double t = c;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < e[i]; ++k) t *= point[i];
    }
    sum += t;
  }
  return sum;
}

std::vector<int> group_indices(const VarSpace& space, const std::vector<std::string>& groups) {
  std::vector<int> out;
  for (const auto& g : space.groups()) {
    for (const auto& name : groups) {
      if (g.name != name) continue;
      for (int k = 0; k < g.dim; ++k) out.push_back(g.offset + k);
    }
  }
  for (const auto& name : groups) space.group(name);  // throws on unknown names
  return out;
}

Eigen::MatrixXd evaluate(const PolyMatrix& m, std::span<const double> point) {
  Eigen::MatrixXd r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) r(i, j) = evaluate(m(i, j), point);
  }
  return r;
}

Eigen::MatrixXd to_numeric(const PolyMatrix& m) {
  if (!m.is_constant()) throw Error("matrix is not constant");
  Eigen::MatrixXd r(m.rows(), m.cols());
  Exponent zero(m.space()->size(), 0);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) r(i, j) = m(i, j).coefficient(zero);
  }
  return r;
}

}  // namespace tdsafe::poly
