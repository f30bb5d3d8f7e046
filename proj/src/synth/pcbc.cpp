#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal.hpp"
#include "tdsafe/common/error.hpp"
#include "tdsafe/synth/bound.hpp"
#include "tdsafe/synth/synthesis.hpp"

namespace tdsafe::synth {

using poly::Polynomial;
using sos::AffineExpr;
using sos::LinPolynomial;
using sos::SosProgram;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

int even_up(int k) { return k + (k % 2); }

struct DegreeResult {
  Attempt attempt;
  std::optional<CertificateBundle> bundle;
  bool separated = false;
};

DegreeResult solve_at_degree(const model::Problem& prob, const detail::ScaledSystem& ss, const Eigen::VectorXd& du,
                             int dg, const PcbcOptions& opt) {
  const auto& sys = prob.system;
  const auto& ts = ss.sys;
  const auto& sp = sys.space;
  const int n = sys.n, m = sys.m, h = sys.h;
  const double hd = static_cast<double>(h);
  const int cd = opt.controller_degree;
  const int fixed = opt.multiplier_degree;
  const std::vector<std::string> xx = {"x", "xh"};
  const std::vector<std::string> xxu = {"x", "xh", "u"};

  SosProgram prog(sp, sos::SosOptions{.newton_prune = opt.newton_prune});
  auto g = prog.new_sos_poly({"x"}, dg, "g");
  auto gt = prog.new_sos_poly({"x"}, dg, "gt");
  auto gth = poly::rename_groups(gt, {{"x", "xh"}});
  auto ga = prog.new_nonneg("gamma_a");
  auto gb = prog.new_nonneg("gamma_b");
  auto eta = prog.new_nonneg("eta");
  // Fixes the scale of the certificate. Everything but the coupling term is
  // homogeneous, so a free gamma_b lets the optimiser shrink B to zero.
  prog.add_equality(gb - opt.gamma_b_cap, "gamma_b_scale");
  const auto one = [&](const AffineExpr& a) { return LinPolynomial::constant(sp, a); };

  // Initial level on Xa^2.
  {
    LinPolynomial e = one(ga) - g - gth * hd;
    e -= detail::localise(prog, detail::descriptors_in(ts.Xa, "x"), xx, dg, fixed, "Ya");
    e -= detail::localise(prog, detail::descriptors_in(ts.Xa, "xh"), xx, dg, fixed, "Yah");
    prog.add_sos(e, "initial");
  }

  // Unsafe level per region. The delayed copy is localised by J(xh) - J_b(xh)
  // pairwise in the original coordinates.
  for (std::size_t r = 0; r < sys.Xb.size(); ++r) {
    const std::string nm = "unsafe" + std::to_string(r + 1);
    LinPolynomial e = g + gth * hd - one(gb);
    e -= detail::localise(prog, detail::descriptors_in(ts.Xb[r], "x"), {"x"}, dg, fixed, nm + "Y");
    const auto& JX = sys.X.descriptors();
    const auto& Jb = sys.Xb[r].descriptors();
    std::vector<LinPolynomial> diff;
    for (std::size_t i = 0; i < std::max(JX.size(), Jb.size()); ++i) {
      Polynomial p(sp);
      if (i < JX.size()) p += JX[i];
      if (i < Jb.size()) p -= Jb[i];
      if (p.is_zero()) continue;
      p = poly::rename_groups(detail::rescale(p, ss.d, true), {{"x", "xh"}});
      diff.push_back(poly::lift<AffineExpr>(p));
    }
    e -= detail::localise(prog, diff, xx, dg, fixed, nm + "Yh");
    prog.add_sos(e, nm);
  }

  // Closed dynamics in scaled coordinates with u = du .* u~.
  std::vector<Polynomial> f;
  for (int i = 0; i < n; ++i) {
    Polynomial fi(sp);
    for (int j = 0; j < n; ++j) {
      fi += ts.A(i, j) * Polynomial::variable(sp, sp->index("x", j + 1));
      fi += ts.A1(i, j) * Polynomial::variable(sp, sp->index("xh", j + 1));
      fi += Polynomial::constant(sp, ts.E(i, j)) * Polynomial::variable(sp, sp->index("w", j + 1));
    }
    for (int q = 0; q < m; ++q) fi += ts.G(i, q) * Polynomial::variable(sp, sp->index("u", q + 1)) * du[q];
    f.push_back(std::move(fi));
  }
  int deg_f = 1;
  for (const auto& fi : f) deg_f = std::max(deg_f, fi.degree());
  std::vector<const Polynomial*> bind(sp->size(), nullptr);
  for (int i = 0; i < n; ++i) bind[sp->index("x", i + 1)] = &f[i];
  LinPolynomial Eg = poly::gaussian_expectation(poly::substitute(g, bind), "w");

  std::vector<LinPolynomial> Yu;
  for (int q = 0; q < m; ++q) Yu.push_back(prog.new_free_poly(xx, cd, "Yu" + std::to_string(q + 1)));

  const int base = detail::even_ceiling(std::max({dg * deg_f, dg, cd}));
  {
    LinPolynomial e = one(eta) - Eg + g - gt + gth;
    for (int q = 0; q < m; ++q) {
      e -= (LinPolynomial::variable(sp, sp->index("u", q + 1)) - Yu[q]) * du[q];
    }
    e -= detail::localise(prog, detail::descriptors_in(ts.X, "x"), xxu, base, fixed, "Yx");
    e -= detail::localise(prog, detail::descriptors_in(ts.X, "xh"), xxu, base, fixed, "Yxh");
    const int kt = fixed >= 0 ? fixed : std::max(dg, even_up(base - 2));
    for (int j = 0; j < sys.U.rows.rows(); ++j) {
      LinPolynomial row = LinPolynomial::constant(sp, 1.0);
      for (int q = 0; q < m; ++q) {
        row -= LinPolynomial::variable(sp, sp->index("u", q + 1)) * (sys.U.rows(j, q) * du[q]);
      }
      auto Y = prog.multiplier(xxu, kt, true, "Yt" + std::to_string(j + 1));
      e -= prog.product(row, Y);
    }
    prog.add_sos(e, "decrease");
  }

  // Control laws inside the polytope on X^2.
  const int utarget = detail::even_ceiling(cd);
  for (int j = 0; j < sys.U.rows.rows(); ++j) {
    const std::string nm = "input" + std::to_string(j + 1);
    LinPolynomial e = LinPolynomial::constant(sp, 1.0);
    for (int q = 0; q < m; ++q) e -= Yu[q] * (sys.U.rows(j, q) * du[q]);
    e -= detail::localise(prog, detail::descriptors_in(ts.X, "x"), xx, utarget, fixed, nm + "Y");
    e -= detail::localise(prog, detail::descriptors_in(ts.X, "xh"), xx, utarget, fixed, nm + "Yh");
    prog.add_sos(e, nm);
  }

  prog.minimize(ga + eta * static_cast<double>(prob.spec.T) - opt.gamma_weight * gb);

  DegreeResult out;
  auto sol = sdp::solve(prog.compile(), opt.sdp);
  out.attempt = detail::attempt_of("degree=" + std::to_string(dg), dg, sol);
  if (!sol.usable()) return out;

  PcbcCertificate c{detail::unscale(prog.value(g, sol), ss.d), detail::unscale(prog.value(gt, sol), ss.d),
                    prog.value(ga, sol), prog.value(gb, sol), prog.value(eta, sol)};
  std::vector<Polynomial> laws;
  for (int q = 0; q < m; ++q) laws.push_back(detail::unscale(prog.value(Yu[q], sol), ss.d) * du[q]);

  out.separated = c.gamma_b > c.gamma_a && c.gamma_b > 0.0;
  double bound = c.gamma_b > 0.0 ? safety_bound(c.gamma_a, c.gamma_b, c.eta, prob.spec.T)
                                 : -std::numeric_limits<double>::infinity();
  out.attempt.bound = bound;
  if (!out.separated) out.attempt.message = "gamma_b " + fmt(c.gamma_b) + " <= gamma_a " + fmt(c.gamma_a);
  CertificateBundle b{"pcbc", c, Controller::explicit_law(std::move(laws)), sys.fingerprint, prob.spec.T, bound};
  b.diagnostics = {{"solver_status", sdp::to_string(sol.status)},
                   {"iterations", sol.iterations},
                   {"eq_residual", sol.eq_residual},
                   {"min_eig", sol.min_eig},
                   {"degrees", {{"g", dg}, {"controller", cd}, {"decrease", base}}}};
  out.bundle = std::move(b);
  return out;
}

}  // namespace

SynthesisReport synth_pcbc(const model::Problem& prob, const PcbcOptions& opt) {
  if (opt.g_degree < 2 || opt.g_degree % 2) {
    throw PreconditionError("barrier degree must be even and at least 2, got " + std::to_string(opt.g_degree));
  }
  if (opt.controller_degree < 1) throw Error("controller degree must be at least 1");
  if (opt.multiplier_degree >= 0 && opt.multiplier_degree % 2) throw Error("multiplier degree must be even");
  if (!(opt.gamma_b_cap > 0)) throw Error("gamma_b cap must be positive");
  const auto& sys = prob.system;
  const auto ss = detail::scale_system(sys);
  // Inputs are scaled so the polytope rows have unit size.
  Eigen::VectorXd du = Eigen::VectorXd::Ones(sys.m);
  for (int q = 0; q < sys.m && !sys.U.unconstrained(); ++q) {
    double b = sys.U.rows.col(q).cwiseAbs().maxCoeff();
    if (b > 0) du[q] = 1.0 / b;
  }

  SynthesisReport rep;
  std::optional<CertificateBundle> last;
  for (int dg = opt.g_degree; dg <= std::max(opt.g_degree, opt.max_g_degree); dg += 2) {
    auto r = solve_at_degree(prob, ss, du, dg, opt);
    rep.trace.push_back(r.attempt);
    if (r.bundle && r.separated) {
      r.bundle->options = {{"g_degree", opt.g_degree},
                           {"max_g_degree", opt.max_g_degree},
                           {"controller_degree", opt.controller_degree},
                           {"multiplier_degree", opt.multiplier_degree},
                           {"gamma_weight", opt.gamma_weight},
                           {"gamma_b_cap", opt.gamma_b_cap}};
      r.bundle->diagnostics["degree_trace"] = rep.trace_json();
      rep.ok = true;
      rep.result = std::move(r.bundle);
      return rep;
    }
    if (r.bundle) last = std::move(r.bundle);
  }
  if (last) {
    const auto& c = std::get<PcbcCertificate>(last->certificate);
    rep.failure = "level sets not separated: gamma_a = " + fmt(c.gamma_a) + ", gamma_b = " + fmt(c.gamma_b);
  } else {
    rep.failure = "infeasible at every degree:";
    for (const auto& a : rep.trace) rep.failure += " " + a.label + " " + a.status + ";";
  }
  return rep;
}

}  // namespace tdsafe::synth
