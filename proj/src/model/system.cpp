#include "tdsafe/model/system.hpp"

#include "tdsafe/common/error.hpp"

namespace tdsafe::model {

std::vector<double> System::point(const Eigen::VectorXd& x, const Eigen::VectorXd& xh) const {
  std::vector<double> pt(space->size(), 0.0);
  int ox = space->group("x").offset, oh = space->group("xh").offset;
  for (int i = 0; i < n; ++i) {
    pt[ox + i] = x[i];
    pt[oh + i] = xh[i];
  }
  return pt;
}

Eigen::VectorXd System::drift(const Eigen::VectorXd& x, const Eigen::VectorXd& xh,
                              const Eigen::VectorXd& u) const {
  auto pt = point(x, xh);
  return poly::evaluate(A, pt) * x + poly::evaluate(A1, pt) * xh + poly::evaluate(G, pt) * u;
}

poly::PolyMatrix System::successor() const {
  auto x = poly::group_vector<double>(space, "x");
  auto xh = poly::group_vector<double>(space, "xh");
  auto u = poly::group_vector<double>(space, "u");
  auto w = poly::group_vector<double>(space, "w");
  return A * x + A1 * xh + G * u + poly::PolyMatrix::from_numeric(space, E) * w;
}

bool System::in_unsafe(const Eigen::VectorXd& x) const {
  for (const auto& r : Xb) {
    if (r.contains(x)) return true;
  }
  return false;
}

}  // namespace tdsafe::model
