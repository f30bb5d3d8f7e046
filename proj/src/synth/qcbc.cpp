#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal.hpp"
#include "tdsafe/common/error.hpp"
#include "tdsafe/synth/bound.hpp"
#include "tdsafe/synth/synthesis.hpp"

namespace tdsafe::synth {

using poly::PolyMatrix;
using sos::AffineExpr;
using sos::LinPolyMatrix;
using sos::LinPolynomial;
using sos::SosProgram;
using sos::SymMatrixVar;

nlohmann::json SynthesisReport::trace_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& a : trace) {
    nlohmann::json j{{"label", a.label},   {"parameter", a.parameter},   {"status", a.status},
                     {"message", a.message}, {"iterations", a.iterations}, {"seconds", a.seconds}};
    j["bound"] = a.bound ? nlohmann::json(*a.bound) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

namespace {

LinPolynomial quad_form(const SymMatrixVar& P, const poly::SpacePtr& sp, const std::string& group) {
  const auto& g = sp->group(group);
  LinPolynomial q(sp);
  for (int i = 0; i < P.n; ++i) {
    for (int j = 0; j < P.n; ++j) {
      poly::Exponent e(sp->size(), 0);
      e[g.offset + i] += 1;
      e[g.offset + j] += 1;
      q.add_term(e, P(i, j));
    }
  }
  return q;
}

LinPolyMatrix numeric(const poly::SpacePtr& sp, const Eigen::MatrixXd& m) {
  return LinPolyMatrix::from_numeric(sp, m);
}

LinPolyMatrix free_matrix(SosProgram& prog, int rows, int cols, int degree, const std::string& name) {
  LinPolyMatrix m(prog.space(), rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      m(i, j) = prog.new_free_poly({"x", "xh"}, degree,
                                   name + "[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
  }
  return m;
}

// Entries of F(x~) map back to F(x / d) D^-1.
PolyMatrix unscale_gain(const PolyMatrix& Ft, const Eigen::VectorXd& d) {
  PolyMatrix F(Ft.space(), Ft.rows(), Ft.cols());
  for (int i = 0; i < Ft.rows(); ++i) {
    for (int j = 0; j < Ft.cols(); ++j) F(i, j) = detail::unscale(Ft(i, j), d) * (1.0 / d[j]);
  }
  return F;
}

void subtract_diagonal(LinPolyMatrix& M, const LinPolynomial& p) {
  for (int i = 0; i < M.rows(); ++i) M(i, i) -= p;
}

double min_sq_over(const std::vector<model::SemialgebraicSet>& regions) {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& s : regions) r = std::min(r, s.bounds().min_sq_norm());
  return r;
}

Eigen::MatrixXd sym(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// One solve of the input-constrained program at fixed alpha.
struct AlphaResult {
  Attempt attempt;
  std::optional<CertificateBundle> bundle;
  bool separated = false;
};

AlphaResult solve_at_alpha(const model::Problem& prob, const detail::ScaledSystem& ss, double alpha,
                           const QcbcOptions& opt) {
  const auto& sys = prob.system;
  const auto& ts = ss.sys;
  const auto& sp = sys.space;
  const int n = sys.n, m = sys.m, h = sys.h;
  const Eigen::VectorXd d2 = ss.d.cwiseProduct(ss.d);
  const Eigen::MatrixXd D2 = d2.asDiagonal();
  const Eigen::MatrixXd Dm2 = d2.cwiseInverse().asDiagonal();

  SosProgram prog(sp, sos::SosOptions{.newton_prune = opt.newton_prune});
  auto P = prog.new_psd(n, "P");
  auto P1 = prog.new_psd(n, "P1");
  auto S = prog.new_symmetric(n, "S");
  auto Pm = P.as_poly_matrix(sp), P1m = P1.as_poly_matrix(sp), Sm = S.as_poly_matrix(sp);
  auto F = free_matrix(prog, m, n, opt.controller_degree - 1, "F");
  auto F1 = free_matrix(prog, m, n, opt.controller_degree - 1, "F1");

  prog.add_psd(numeric(sp, D2 / alpha) - Pm, "P<=I/alpha");
  prog.add_psd(numeric(sp, alpha * Dm2) - Sm, "S<=alpha I");
  prog.add_psd(Pm - numeric(sp, 1e-6 / alpha * D2), "P>0");

  auto G = poly::lift<AffineExpr>(ts.G);
  auto K0 = poly::lift<AffineExpr>(ts.A) + G * F;
  auto K1 = poly::lift<AffineExpr>(ts.A1) + G * F1;
  LinPolyMatrix Z(sp, n, n);
  auto M = LinPolyMatrix::blocks({{Pm - P1m, Z, K0.transpose()}, {Z, P1m, K1.transpose()}, {K0, K1, Sm}});
  const int target = detail::even_ceiling(M.max_degree());
  auto Jx = detail::descriptors_in(ts.X, "x");
  auto Jxh = detail::descriptors_in(ts.X, "xh");
  subtract_diagonal(M, detail::localise(prog, Jx, {"x", "xh"}, target, opt.multiplier_degree, "Yc") +
                           detail::localise(prog, Jxh, {"x", "xh"}, target, opt.multiplier_degree, "Ych"));
  prog.add_matrix_sos(M, "decrease");

  // Input polytope rows on X^2.
  auto x = poly::group_vector<AffineExpr>(sp, "x");
  auto xh = poly::group_vector<AffineExpr>(sp, "xh");
  auto u = F * x + F1 * xh;
  const int utarget = detail::even_ceiling(opt.controller_degree);
  for (int j = 0; j < sys.U.rows.rows(); ++j) {
    LinPolynomial row = LinPolynomial::constant(sp, 1.0);
    for (int q = 0; q < m; ++q) row -= u(q, 0) * sys.U.rows(j, q);
    const std::string nm = "input" + std::to_string(j + 1);
    row -= detail::localise(prog, Jx, {"x", "xh"}, utarget, opt.multiplier_degree, nm + "Y");
    row -= detail::localise(prog, Jxh, {"x", "xh"}, utarget, opt.multiplier_degree, nm + "Yh");
    prog.add_sos(row, nm);
  }

  const double ra = sys.Xa.bounds().max_sq_norm();
  const double rb = min_sq_over(sys.Xb);
  const Eigen::MatrixXd EEt = ts.E * ts.E.transpose();
  AffineExpr eta_expr;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) eta_expr += P(i, j) * EEt(i, j);
  }
  AffineExpr ga, gb;
  if (opt.gamma_mode == GammaMode::kEigen) {
    auto s = prog.new_nonneg("s");
    auto t = prog.new_nonneg("t");
    auto t1 = prog.new_nonneg("t1");
    LinPolyMatrix sD(sp, n, n), tD(sp, n, n), t1D(sp, n, n);
    for (int i = 0; i < n; ++i) {
      sD(i, i) = LinPolynomial::constant(sp, s * d2[i]);
      tD(i, i) = LinPolynomial::constant(sp, t * d2[i]);
      t1D(i, i) = LinPolynomial::constant(sp, t1 * d2[i]);
    }
    prog.add_psd(Pm - sD, "lmin");
    prog.add_psd(tD - Pm, "lmax");
    prog.add_psd(t1D - P1m, "lmax1");
    prog.minimize(ra * (t + static_cast<double>(h) * t1) + eta_expr * static_cast<double>(prob.spec.T) - rb * s);
  } else {
    ga = prog.new_nonneg("gamma_a");
    gb = prog.new_nonneg("gamma_b");
    auto Ja = detail::descriptors_in(ts.Xa, "x");
    auto Jah = detail::descriptors_in(ts.Xa, "xh");
    LinPolynomial level = LinPolynomial::constant(sp, ga) - quad_form(P, sp, "x") -
                          quad_form(P1, sp, "xh") * static_cast<double>(h);
    level -= detail::localise(prog, Ja, {"x", "xh"}, 2, opt.multiplier_degree, "Ya");
    level -= detail::localise(prog, Jah, {"x", "xh"}, 2, opt.multiplier_degree, "Yah");
    prog.add_sos(level, "initial");
    for (std::size_t r = 0; r < ts.Xb.size(); ++r) {
      auto Jb = detail::descriptors_in(ts.Xb[r], "x");
      const std::string nm = "unsafe" + std::to_string(r + 1);
      LinPolynomial lb = quad_form(P, sp, "x") - LinPolynomial::constant(sp, gb);
      lb -= detail::localise(prog, Jb, {"x"}, 2, opt.multiplier_degree, nm + "Y");
      prog.add_sos(lb, nm);
    }
    prog.minimize(ga - opt.gamma_weight * gb);
  }

  AlphaResult out;
  auto sol = sdp::solve(prog.compile(), opt.sdp);
  out.attempt = detail::attempt_of("alpha=" + fmt(alpha), alpha, sol);
  if (!sol.usable()) return out;

  const Eigen::MatrixXd Dinv = ss.d.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd D = ss.d.asDiagonal();
  QcbcCertificate c;
  c.P = sym(Dinv * prog.value(P, sol) * Dinv);
  c.P1 = sym(Dinv * prog.value(P1, sol) * Dinv);
  c.S = sym(D * prog.value(S, sol) * D);
  c.alpha = alpha;
  auto pd = sdp::posdef_check(c.P, 0.0);
  if (pd.min_eig <= 0.0) {
    out.attempt.status = "numerical_failure";
    out.attempt.message = "recovered P is not positive definite";
    return out;
  }
  c.eta = eta_from_P(c.P, sys.E);
  if (opt.gamma_mode == GammaMode::kEigen) {
    auto ls = level_sets(c.P, c.P1, h, sys.Xa, sys.Xb);
    c.gamma_a = ls.gamma_a;
    c.gamma_b = ls.gamma_b;
  } else {
    c.gamma_a = prog.value(ga, sol);
    c.gamma_b = prog.value(gb, sol);
  }
  auto ctrl = Controller::feedback(unscale_gain(prog.value(F, sol), ss.d), unscale_gain(prog.value(F1, sol), ss.d));

  out.separated = c.gamma_b > c.gamma_a && c.gamma_b > 0.0;
  double bound = c.gamma_b > 0.0 ? safety_bound(c.gamma_a, c.gamma_b, c.eta, prob.spec.T)
                                 : -std::numeric_limits<double>::infinity();
  out.attempt.bound = bound;
  if (!out.separated) {
    out.attempt.message = "gamma_b " + fmt(c.gamma_b) + " <= gamma_a " + fmt(c.gamma_a);
  }
  CertificateBundle b{"qcbc", c, ctrl, sys.fingerprint, prob.spec.T, bound};
  b.diagnostics = {{"alpha", alpha},
                   {"solver_status", sdp::to_string(sol.status)},
                   {"iterations", sol.iterations},
                   {"eq_residual", sol.eq_residual},
                   {"min_eig", sol.min_eig},
                   {"degrees", {{"decrease", target}, {"controller", opt.controller_degree}}}};
  out.bundle = std::move(b);
  return out;
}

nlohmann::json options_json(const QcbcOptions& o) {
  return {{"alpha_grid", {o.alpha_lo, o.alpha_hi, o.alpha_points}},
          {"refine", o.refine},
          {"controller_degree", o.controller_degree},
          {"multiplier_degree", o.multiplier_degree},
          {"gamma_mode", o.gamma_mode == GammaMode::kEigen ? "eigen" : "sos"},
          {"gamma_weight", o.gamma_weight}};
}

void check_options(const QcbcOptions& o) {
  if (o.controller_degree < 1) throw Error("controller degree must be at least 1");
  if (o.multiplier_degree >= 0 && o.multiplier_degree % 2) throw Error("multiplier degree must be even");
  if (!(o.alpha_lo > 0) || !(o.alpha_hi >= o.alpha_lo) || o.alpha_points < 1) {
    throw Error("alpha grid needs 0 < lo <= hi and at least one point");
  }
}

}  // namespace

SynthesisReport synth_qcbc_constrained(const model::Problem& prob, const QcbcOptions& opt) {
  if (prob.system.U.unconstrained()) {
    throw PreconditionError("input-constrained synthesis needs an input polytope; use the unconstrained variant");
  }
  check_options(opt);
  const auto ss = detail::scale_system(prob.system);

  std::vector<double> grid;
  for (int k = 0; k < opt.alpha_points; ++k) {
    double f = opt.alpha_points == 1 ? 0.0 : static_cast<double>(k) / (opt.alpha_points - 1);
    grid.push_back(opt.alpha_lo * std::pow(opt.alpha_hi / opt.alpha_lo, f));
  }
  auto run = [&](const std::vector<double>& alphas) {
    std::vector<std::function<AlphaResult()>> jobs;
    for (double a : alphas) jobs.push_back([&, a] { return solve_at_alpha(prob, ss, a, opt); });
    return detail::run_jobs(jobs, opt.threads);
  };

  SynthesisReport rep;
  std::optional<CertificateBundle> best, best_any;
  int best_index = -1;
  auto absorb = [&](std::vector<AlphaResult>& rs, bool on_grid) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      rep.trace.push_back(rs[i].attempt);
      if (!rs[i].bundle) continue;
      if (!best_any) best_any = rs[i].bundle;
      if (rs[i].separated && (!best || rs[i].bundle->bound > best->bound)) {
        best = rs[i].bundle;
        if (on_grid) best_index = static_cast<int>(i);
      }
    }
  };
  auto first = run(grid);
  absorb(first, true);

  if (opt.refine && best_index >= 0 && grid.size() > 1) {
    std::vector<double> mids;
    if (best_index > 0) mids.push_back(std::sqrt(grid[best_index - 1] * grid[best_index]));
    if (best_index + 1 < static_cast<int>(grid.size())) mids.push_back(std::sqrt(grid[best_index] * grid[best_index + 1]));
    auto second = run(mids);
    absorb(second, false);
  }

  if (!best) {
    if (best_any) {
      const auto& q = std::get<QcbcCertificate>(best_any->certificate);
      rep.failure = "level sets not separated: gamma_a = " + fmt(q.gamma_a) + ", gamma_b = " + fmt(q.gamma_b);
    } else {
      rep.failure = "infeasible for every alpha:";
      for (const auto& a : rep.trace) rep.failure += " " + a.label + " " + a.status + ";";
    }
    return rep;
  }
  best->options = options_json(opt);
  best->diagnostics["alpha_trace"] = rep.trace_json();
  rep.ok = true;
  rep.result = std::move(best);
  return rep;
}

SynthesisReport synth_qcbc_unconstrained(const model::Problem& prob, const QcbcOptions& opt) {
  check_options(opt);
  const auto& sys = prob.system;
  const auto ss = detail::scale_system(sys);
  const auto& ts = ss.sys;
  const auto& sp = sys.space;
  const int n = sys.n, m = sys.m, h = sys.h;
  const Eigen::VectorXd dm2 = ss.d.cwiseProduct(ss.d).cwiseInverse();
  const Eigen::MatrixXd Dm2 = dm2.asDiagonal();

  SosProgram prog(sp, sos::SosOptions{.newton_prune = opt.newton_prune});
  auto C = prog.new_psd(n, "C");
  auto Pt = prog.new_psd(n, "P1t");
  auto Cm = C.as_poly_matrix(sp), Ptm = Pt.as_poly_matrix(sp);
  auto Zf = free_matrix(prog, m, n, opt.controller_degree - 1, "Z");
  auto Z1f = free_matrix(prog, m, n, opt.controller_degree - 1, "Z1");

  auto s = prog.new_nonneg("s");
  auto t1 = prog.new_nonneg("t1");
  LinPolyMatrix sD(sp, n, n), t1D(sp, n, n);
  for (int i = 0; i < n; ++i) {
    sD(i, i) = LinPolynomial::constant(sp, s * dm2[i]);
    t1D(i, i) = LinPolynomial::constant(sp, t1 * dm2[i]);
  }
  prog.add_psd(numeric(sp, Dm2) - Cm, "C<=I");
  prog.add_psd(Cm - sD, "C>=sI");
  prog.add_psd(Cm - numeric(sp, 1e-6 * Dm2), "C>0");
  prog.add_psd(t1D - Ptm, "P1t<=t1 I");

  auto G = poly::lift<AffineExpr>(ts.G);
  auto Gt = G.transpose();
  auto R0 = Cm * poly::lift<AffineExpr>(ts.A).transpose() + Zf.transpose() * Gt;
  auto R1 = Cm * poly::lift<AffineExpr>(ts.A1).transpose() + Z1f.transpose() * Gt;
  LinPolyMatrix O(sp, n, n);
  auto M = LinPolyMatrix::blocks({{Cm - Ptm, O, R0}, {O, Ptm, R1}, {R0.transpose(), R1.transpose(), Cm}});
  const int target = detail::even_ceiling(M.max_degree());
  subtract_diagonal(M, detail::localise(prog, detail::descriptors_in(ts.X, "x"), {"x", "xh"}, target,
                                        opt.multiplier_degree, "Yc") +
                           detail::localise(prog, detail::descriptors_in(ts.X, "xh"), {"x", "xh"}, target,
                                            opt.multiplier_degree, "Ych"));
  prog.add_matrix_sos(M, "decrease");
  prog.minimize(-s + static_cast<double>(h) * t1);

  SynthesisReport rep;
  auto sol = sdp::solve(prog.compile(), opt.sdp);
  rep.trace.push_back(detail::attempt_of("unconstrained", 0.0, sol));
  if (!sol.usable()) {
    rep.failure = "program infeasible: " + sdp::to_string(sol.status) + " " + sol.message;
    return rep;
  }

  const Eigen::MatrixXd D = ss.d.asDiagonal();
  Eigen::MatrixXd Cn = D * prog.value(C, sol) * D;
  sdp::posdef_check(Cn);  // throws on asymmetry
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Cn);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e10) {
    rep.failure = "C is numerically singular (condition number " + fmt(lo > 0 ? hi / lo : INFINITY) + ")";
    return rep;
  }
  QcbcCertificate c;
  c.P = sym(Cn.inverse());
  Eigen::MatrixXd P1t = D * prog.value(Pt, sol) * D;
  c.P1 = sym(c.P * P1t * c.P);

  // u = Z~(x~) C~^-1 x~ = Z~(x / d) D P x.
  auto unscale_z = [&](const PolyMatrix& Zt) {
    PolyMatrix Zo(sp, m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) Zo(i, j) = detail::unscale(Zt(i, j), ss.d) * ss.d[j];
    }
    return Zo;
  };
  PolyMatrix Z = unscale_z(prog.value(Zf, sol)), Z1 = unscale_z(prog.value(Z1f, sol));
  auto Pp = PolyMatrix::from_numeric(sp, c.P), Cp = PolyMatrix::from_numeric(sp, Cn);
  PolyMatrix F = Z * Pp, F1 = Z1 * Pp;

  auto max_coeff = [](const PolyMatrix& a) {
    double r = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) {
        for (const auto& [e, v] : a(i, j).terms()) r = std::max(r, std::abs(v));
      }
    }
    return r;
  };
  const double zscale = std::max(1.0, std::max(max_coeff(Z), max_coeff(Z1)));
  const double fc = std::max(max_coeff(F * Cp - Z), max_coeff(F1 * Cp - Z1)) / zscale;
  const double pc = (c.P * Cn - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();

  c.eta = eta_from_P(c.P, sys.E);
  auto ls = level_sets(c.P, c.P1, h, sys.Xa, sys.Xb);
  c.gamma_a = ls.gamma_a;
  c.gamma_b = ls.gamma_b;
  if (!ls.separated()) {
    rep.failure = "level sets not separated: gamma_a = " + fmt(c.gamma_a) + ", gamma_b = " + fmt(c.gamma_b);
    return rep;
  }
  double bound = safety_bound(c.gamma_a, c.gamma_b, c.eta, prob.spec.T);
  rep.trace.back().bound = bound;
  CertificateBundle b{"qcbc-free", c, Controller::feedback(F, F1), sys.fingerprint, prob.spec.T, bound};
  b.options = options_json(opt);
  b.options.erase("alpha_grid");
  b.options.erase("refine");
  b.diagnostics = {{"solver_status", sdp::to_string(sol.status)},
                   {"iterations", sol.iterations},
                   {"eq_residual", sol.eq_residual},
                   {"min_eig", sol.min_eig},
                   {"condition_C", hi / lo},
                   {"recovery", {{"PC_minus_I", pc}, {"FC_minus_Z", fc}}},
                   {"degrees", {{"decrease", target}, {"controller", opt.controller_degree}}}};
  rep.ok = true;
  rep.result = std::move(b);
  return rep;
}

}  // namespace tdsafe::synth
