#include "internal.hpp"

#include <cmath>
#include <cstdio>

#include "tdsafe/common/error.hpp"

namespace tdsafe::synth::detail {

namespace {

// Bindings x_i -> s_i x_i, xh_i -> s_i xh_i.
std::vector<poly::Polynomial> scale_bindings(const poly::SpacePtr& sp, const Eigen::VectorXd& s) {
  std::vector<poly::Polynomial> b;
  for (int i = 0; i < sp->size(); ++i) b.push_back(poly::Polynomial::variable(sp, i));
  for (const char* g : {"x", "xh"}) {
    const auto& grp = sp->group(g);
    for (int k = 0; k < grp.dim; ++k) b[grp.offset + k] *= s[k];
  }
  return b;
}

poly::Polynomial subst(const poly::Polynomial& p, const std::vector<poly::Polynomial>& b) {
  std::vector<const poly::Polynomial*> ptrs;
  for (const auto& q : b) ptrs.push_back(&q);
  return poly::substitute(p, ptrs);
}

poly::Polynomial normalised(poly::Polynomial q) {
  double m = 0.0;
  for (const auto& [e, c] : q.terms()) m = std::max(m, std::abs(c));
  if (m > 0) q *= 1.0 / m;
  return q;
}

model::SemialgebraicSet scale_set(const model::SemialgebraicSet& s, const std::vector<poly::Polynomial>& b,
                                  const Eigen::VectorXd& d) {
  std::vector<poly::Polynomial> J;
  for (const auto& j : s.descriptors()) J.push_back(normalised(subst(j, b)));
  model::Box box{s.bounds().lo.cwiseQuotient(d), s.bounds().hi.cwiseQuotient(d)};
  return model::SemialgebraicSet(s.space(), std::move(J), box, s.is_box());
}

}  // namespace

ScaledSystem scale_system(const model::System& sys) {
  const auto& bx = sys.X.bounds();
  Eigen::VectorXd d = 0.5 * (bx.hi - bx.lo);
  for (int i = 0; i < d.size(); ++i) {
    d[i] = std::max({d[i], std::abs(bx.hi[i]), std::abs(bx.lo[i])});
    if (!(d[i] > 0) || !std::isfinite(d[i])) d[i] = 1.0;
  }
  auto b = scale_bindings(sys.space, d);
  ScaledSystem out{sys, d};
  auto& s = out.sys;
  for (int i = 0; i < sys.n; ++i) {
    for (int j = 0; j < sys.n; ++j) {
      s.A(i, j) = subst(sys.A(i, j), b) * (d[j] / d[i]);
      s.A1(i, j) = subst(sys.A1(i, j), b) * (d[j] / d[i]);
    }
    for (int q = 0; q < sys.m; ++q) s.G(i, q) = subst(sys.G(i, q), b) * (1.0 / d[i]);
  }
  s.E = d.cwiseInverse().asDiagonal() * sys.E;
  s.X = scale_set(sys.X, b, d);
  s.Xa = scale_set(sys.Xa, b, d);
  for (auto& r : s.Xb) r = scale_set(r, b, d);
  return out;
}

poly::Polynomial unscale(const poly::Polynomial& p, const Eigen::VectorXd& d) {
  return subst(p, scale_bindings(p.space(), d.cwiseInverse()));
}

poly::Polynomial rescale(const poly::Polynomial& p, const Eigen::VectorXd& d, bool normalise) {
  auto q = subst(p, scale_bindings(p.space(), d));
  return normalise ? normalised(std::move(q)) : q;
}

std::vector<sos::LinPolynomial> descriptors_in(const model::SemialgebraicSet& s, const std::string& group) {
  std::vector<sos::LinPolynomial> out;
  for (const auto& j : s.descriptors()) {
    auto q = group == "x" ? j : poly::rename_groups(j, {{"x", group}});
    out.push_back(poly::lift<sos::AffineExpr>(q));
  }
  return out;
}

sos::LinPolynomial localise(sos::SosProgram& prog, const std::vector<sos::LinPolynomial>& J,
                            const std::vector<std::string>& groups, int target_degree, int fixed_degree,
                            const std::string& name) {
  sos::LinPolynomial sum(prog.space());
  for (std::size_t i = 0; i < J.size(); ++i) {
    int k = fixed_degree >= 0 ? fixed_degree : sos::multiplier_degree(target_degree, J[i].degree());
    auto Y = prog.multiplier(groups, k, true, name + std::to_string(i + 1));
    sum += prog.product(Y, J[i]);
  }
  return sum;
}

int even_ceiling(int d) { return std::max(2, d + (d % 2)); }

Attempt attempt_of(const std::string& label, double parameter, const sdp::SdpSolution& s) {
  Attempt a;
  a.label = label;
  a.parameter = parameter;
  a.status = sdp::to_string(s.status);
  a.message = s.message;
  a.iterations = s.iterations;
  a.seconds = s.seconds;
  return a;
}

}  // namespace tdsafe::synth::detail
