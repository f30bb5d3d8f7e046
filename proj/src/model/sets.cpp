#include "tdsafe/model/sets.hpp"

#include <cmath>

#include "tdsafe/common/error.hpp"

namespace tdsafe::model {

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  for (int i = 0; i < dim(); ++i) {
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

double Box::max_sq_norm() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += std::max(lo[i] * lo[i], hi[i] * hi[i]);
  return s;
}

double Box::min_sq_norm() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (lo[i] <= 0.0 && hi[i] >= 0.0) continue;
    s += std::min(lo[i] * lo[i], hi[i] * hi[i]);
  }
  return s;
}

bool Box::intersects(const Box& o) const {
  for (int i = 0; i < dim(); ++i) {
    if (hi[i] < o.lo[i] || o.hi[i] < lo[i]) return false;
  }
  return true;
}

SemialgebraicSet::SemialgebraicSet(poly::SpacePtr space, std::vector<poly::Polynomial> descriptors,
                                   Box bounds, bool is_box)
    : space_(std::move(space)), j_(std::move(descriptors)), bounds_(std::move(bounds)), is_box_(is_box) {
  const auto& gx = space_->group("x");
  if (bounds_.lo.size() != gx.dim || bounds_.hi.size() != gx.dim) {
    throw ShapeError("set bounds must have the state dimension");
  }
  for (int i = 0; i < bounds_.dim(); ++i) {
    if (!(bounds_.lo[i] <= bounds_.hi[i])) throw ConfigError("set bounds have lo > hi");
  }
  std::vector<int> xs = poly::group_indices(*space_, {"x"});
  for (const auto& p : j_) {
    p.check_space(poly::Polynomial(space_));
    if (p.degree_in(xs) != p.degree()) throw ConfigError("set descriptors may only use x variables");
  }
}

SemialgebraicSet SemialgebraicSet::from_box(const poly::SpacePtr& space, const Box& box) {
  std::vector<poly::Polynomial> j;
  const auto& gx = space->group("x");
  for (int i = 0; i < box.dim() && i < gx.dim; ++i) {
    auto xi = poly::Polynomial::variable(space, gx.offset + i);
    auto c = [&](double v) { return poly::Polynomial::constant(space, v); };
    j.push_back((c(box.hi[i]) - xi) * (xi - c(box.lo[i])));
  }
  return SemialgebraicSet(space, std::move(j), box, true);
}

std::vector<double> SemialgebraicSet::evaluate(const Eigen::VectorXd& x) const {
  std::vector<double> pt(space_->size(), 0.0);
  int off = space_->group("x").offset;
  for (int i = 0; i < x.size(); ++i) pt[off + i] = x[i];
  std::vector<double> v;
  v.reserve(j_.size());
  for (const auto& p : j_) v.push_back(poly::evaluate(p, pt));
  return v;
}

bool SemialgebraicSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (is_box_) return bounds_.contains(x, tol);
  for (double v : evaluate(x)) {
    if (v < -tol) return false;
  }
  return true;
}

std::vector<Eigen::VectorXd> sample_set(const SemialgebraicSet& set, int count, std::mt19937_64& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  const Box& b = set.bounds();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  long draws = 0;
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd x(b.dim());
    for (int i = 0; i < b.dim(); ++i) x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * u01(rng);
    ++draws;
    if (set.contains(x)) out.push_back(std::move(x));
    if (draws >= 1000000 && static_cast<double>(out.size()) < 0.001 * draws) {
      throw Error("set too thin to sample");
    }
  }
  return out;
}

bool InputSet::contains(const Eigen::VectorXd& u, double tol) const {
  return max_violation(u) <= tol;
}

double InputSet::max_violation(const Eigen::VectorXd& u) const {
  if (unconstrained()) return -1.0;
  return ((rows * u).array() - 1.0).maxCoeff();
}

InputSet box_to_polytope(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int m = static_cast<int>(lo.size());
  if (hi.size() != m) throw ShapeError("input box bounds differ in length");
  InputSet s;
  s.m = m;
  s.rows = Eigen::MatrixXd::Zero(2 * m, m);
  for (int q = 0; q < m; ++q) {
    if (!(lo[q] < 0.0 && hi[q] > 0.0)) {
      throw ConfigError("input box must contain the origin in its interior");
    }
    s.rows(2 * q, q) = 1.0 / hi[q];
    s.rows(2 * q + 1, q) = 1.0 / lo[q];
  }
  return s;
}

}  // namespace tdsafe::model
