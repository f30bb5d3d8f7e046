#include "tdsafe/verify/check.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <sstream>

#include "tdsafe/common/error.hpp"
#include "tdsafe/sdp/solver.hpp"
#include "tdsafe/sos/program.hpp"
#include "tdsafe/synth/bound.hpp"

namespace tdsafe::verify {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using poly::Polynomial;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Polynomial quad_poly(const poly::SpacePtr& sp, const MatrixXd& P, const std::string& group) {
  Polynomial p(sp);
  const int n = static_cast<int>(P.rows());
  for (int i = 0; i < n; ++i) {
    auto xi = Polynomial::variable(sp, sp->index(group, i + 1));
    for (int j = 0; j < n; ++j) {
      if (P(i, j) != 0.0) p += xi * Polynomial::variable(sp, sp->index(group, j + 1)) * P(i, j);
    }
  }
  return p;
}

// g and g~ in the x variables.
std::pair<Polynomial, Polynomial> parts_of(const model::System& sys, const synth::Certificate& cert) {
  if (const auto* q = std::get_if<synth::QcbcCertificate>(&cert)) {
    return {quad_poly(sys.space, q->P, "x"), quad_poly(sys.space, q->P1, "x")};
  }
  const auto& p = std::get<synth::PcbcCertificate>(cert);
  return {p.g, p.g_tilde};
}

void check_shapes(const model::System& sys, const synth::Certificate& cert, const synth::Controller& ctrl) {
  if (const auto* q = std::get_if<synth::QcbcCertificate>(&cert)) {
    if (q->P.rows() != sys.n || q->P.cols() != sys.n || q->P1.rows() != sys.n || q->P1.cols() != sys.n) {
      throw ShapeError("certificate matrices must be " + std::to_string(sys.n) + "x" + std::to_string(sys.n));
    }
  } else {
    const auto& p = std::get<synth::PcbcCertificate>(cert);
    for (const auto* g : {&p.g, &p.g_tilde}) {
      if (!poly::same_space(g->space(), sys.space)) throw ShapeError("certificate polynomial from another space");
      for (const auto& grp : sys.space->groups()) {
        if (grp.name != "x" && g->degree_in_group(grp.name) > 0) {
          throw ShapeError("certificate polynomials may only use x variables");
        }
      }
    }
  }
  ctrl.check(sys);
}

// Polynomial in (x, xh) flattened for fast repeated evaluation.
class Flat {
 public:
  Flat(const Polynomial& p, int n) : n_(n) {
    const auto& sp = *p.space();
    const int ox = sp.group("x").offset, oh = sp.group("xh").offset;
    for (const auto& [e, c] : p.terms()) {
      Term t{c, {}};
      for (int i = 0; i < sp.size(); ++i) {
        if (!e[i]) continue;
        int slot = -1;
        if (i >= ox && i < ox + n) slot = i - ox;
        if (i >= oh && i < oh + n) slot = n + i - oh;
        if (slot < 0) throw Error("polynomial depends on " + sp.name_of(i) + "; only x and xh allowed here");
        t.factors.emplace_back(slot, e[i]);
      }
      terms_.push_back(std::move(t));
    }
  }
  double operator()(const VectorXd& x, const VectorXd& xh) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double v = t.c;
      for (auto [slot, k] : t.factors) {
        double b = slot < n_ ? x[slot] : xh[slot - n_];
        double pw = b;
        for (int j = 1; j < k; ++j) pw *= b;
        v *= pw;
      }
      s += v;
    }
    return s;
  }

 private:
  struct Term {
    double c;
    std::vector<std::pair<int, int>> factors;
  };
  int n_;
  std::vector<Term> terms_;
};

VectorXd zero_like(int n) { return VectorXd::Zero(n); }

// Regular grid over a box with at most `cap` points, kept where `keep` holds.
template <class Keep>
std::vector<VectorXd> grid_points(const VectorXd& lo, const VectorXd& hi, int per_axis, long cap, Keep keep) {
  const int d = static_cast<int>(lo.size());
  int k = per_axis;
  while (k > 2 && std::pow(static_cast<double>(k), d) > static_cast<double>(cap)) --k;
  std::vector<VectorXd> out;
  if (k < 2) return out;
  std::vector<int> idx(d, 0);
  for (;;) {
    VectorXd p(d);
    for (int i = 0; i < d; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / (k - 1);
    if (keep(p)) out.push_back(std::move(p));
    int i = 0;
    while (i < d && ++idx[i] == k) idx[i++] = 0;
    if (i == d) break;
  }
  return out;
}

std::vector<VectorXd> sample_and_grid(const model::SemialgebraicSet& set, const CheckOptions& o, std::mt19937_64& rng) {
  auto pts = model::sample_set(set, o.samples, rng);
  auto g = grid_points(set.bounds().lo, set.bounds().hi, o.grid, o.max_grid_points,
                       [&](const VectorXd& p) { return set.contains(p, 1e-12); });
  pts.insert(pts.end(), g.begin(), g.end());
  return pts;
}

// X minus one unsafe region, by rejection.
std::vector<VectorXd> sample_outside(const model::SemialgebraicSet& X, const model::SemialgebraicSet& bad,
                                     const CheckOptions& o, std::mt19937_64& rng) {
  std::vector<VectorXd> out;
  for (int round = 0; round < 50 && static_cast<int>(out.size()) < o.samples; ++round) {
    for (auto& p : model::sample_set(X, o.samples, rng)) {
      if (!bad.contains(p)) out.push_back(std::move(p));
      if (static_cast<int>(out.size()) == o.samples) break;
    }
  }
  auto g = grid_points(X.bounds().lo, X.bounds().hi, o.grid, o.max_grid_points,
                       [&](const VectorXd& p) { return X.contains(p, 1e-12) && !bad.contains(p); });
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

struct Extremum {
  double value = -kInf;
  std::size_t at = 0;
};

// max over points of f(i), split across threads.
template <class F>
Extremum max_over(std::size_t count, int threads, F f) {
  threads = std::max(1, threads);
  auto chunk = [&](std::size_t lo, std::size_t hi) {
    Extremum e;
    for (std::size_t i = lo; i < hi; ++i) {
      double v = f(i);
      if (std::isnan(v)) v = kInf;
      if (v > e.value) e = {v, i};
    }
    return e;
  };
  if (threads == 1 || count < 1000) return chunk(0, count);
  std::vector<std::future<Extremum>> futs;
  const std::size_t step = (count + threads - 1) / threads;
  for (std::size_t lo = 0; lo < count; lo += step) {
    futs.push_back(std::async(std::launch::async, chunk, lo, std::min(count, lo + step)));
  }
  Extremum best;
  for (auto& fu : futs) {
    auto e = fu.get();
    if (e.value > best.value || (e.value == best.value && e.at < best.at)) best = e;
  }
  return best;
}

double min_eig(const MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

double max_eig(const MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

nlohmann::json vec_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

DecreaseOracle::DecreaseOracle(const model::System& sys, const synth::Certificate& cert,
                               const synth::Controller& ctrl)
    : sys_(&sys), poly_(sys.space) {
  check_shapes(sys, cert, ctrl);
  const auto& sp = sys.space;
  auto succ = sys.successor();
  std::vector<const Polynomial*> ubind(sp->size(), nullptr);
  for (int q = 0; q < sys.m; ++q) ubind[sp->index("u", q + 1)] = &ctrl.laws()[q];
  std::vector<Polynomial> next;
  for (int i = 0; i < sys.n; ++i) next.push_back(poly::substitute(succ(i, 0), ubind));
  std::vector<const Polynomial*> xbind(sp->size(), nullptr);
  for (int i = 0; i < sys.n; ++i) xbind[sp->index("x", i + 1)] = &next[i];

  auto [g, gt] = parts_of(sys, cert);
  poly_ = poly::gaussian_expectation(poly::substitute(g, xbind), "w");
  poly_ += gt - g - poly::rename_groups(gt, {{"x", "xh"}});
}

double DecreaseOracle::operator()(const VectorXd& x, const VectorXd& xh) const {
  return poly::evaluate(poly_, sys_->point(x, xh));
}

double decrease_oracle(const model::System& sys, const synth::Certificate& cert, const synth::Controller& ctrl,
                       const VectorXd& x, const VectorXd& xh, std::string* warning) {
  check_shapes(sys, cert, ctrl);
  if (x.size() != sys.n || xh.size() != sys.n) throw ShapeError("point has the wrong dimension");
  if (warning) {
    warning->clear();
    if (!sys.X.contains(x, 1e-12) || !sys.X.contains(xh, 1e-12)) *warning = "point outside X";
  }
  if (const auto* q = std::get_if<synth::QcbcCertificate>(&cert)) {
    auto pt = sys.point(x, xh);
    VectorXd mu = sys.drift(x, xh, ctrl.evaluate(pt));
    return mu.dot(q->P * mu) + synth::eta_from_P(q->P, sys.E) + x.dot(q->P1 * x) - x.dot(q->P * x) -
           xh.dot(q->P1 * xh);
  }
  return DecreaseOracle(sys, cert, ctrl)(x, xh);
}

double recompute_bound(const synth::Certificate& cert, int T) {
  const double gb = synth::gamma_b_of(cert);
  if (!(gb > 0.0)) return -kInf;
  return synth::safety_bound(synth::gamma_a_of(cert), gb, synth::eta_of(cert), T);
}

bool barrier_is_sos(const model::System& sys, const synth::Certificate& cert) {
  if (const auto* q = std::get_if<synth::QcbcCertificate>(&cert)) {
    return min_eig(q->P) >= -1e-9 && min_eig(q->P1) >= -1e-9;
  }
  const auto& p = std::get<synth::PcbcCertificate>(cert);
  Polynomial b = p.g + poly::rename_groups(p.g_tilde, {{"x", "xh"}}) * static_cast<double>(sys.h);
  if (b.is_zero()) return true;
  try {
    sos::SosProgram prog(sys.space);
    prog.add_sos(poly::lift<sos::AffineExpr>(b), "barrier");
    return sdp::solve(prog.compile()).usable();
  } catch (const Error&) {
    return false;  // odd degree or no Gram variables: not SOS
  }
}

const ConditionReport* CheckReport::find(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["pass"] = pass;
  j["bound"] = std::isfinite(bound) ? nlohmann::json(bound) : nlohmann::json(nullptr);
  j["note"] = note;
  for (const auto& c : conditions) {
    nlohmann::json e = {{"name", c.name},
                        {"pass", c.pass},
                        {"worst_violation", std::isfinite(c.violation) ? nlohmann::json(c.violation) : nlohmann::json(nullptr)},
                        {"tolerance", c.tolerance},
                        {"samples", c.samples},
                        {"enforced", c.enforced}};
    if (c.x.size()) e["witness_x"] = vec_json(c.x);
    if (c.xh.size()) e["witness_xh"] = vec_json(c.xh);
    j["conditions"].push_back(e);
  }
  for (const auto& s : side) {
    j["side_conditions"].push_back({{"name", s.name}, {"pass", s.pass}, {"value", s.value}, {"detail", s.detail}});
  }
  return j;
}

CheckReport check_certificate(const model::Problem& prob, const synth::Certificate& cert,
                              const synth::Controller& ctrl, const CheckOptions& o) {
  const auto& sys = prob.system;
  check_shapes(sys, cert, ctrl);
  if (o.samples < 1) throw PreconditionError("at least one sample is needed");
  const int n = sys.n;
  const double h = sys.h;
  const double ga = synth::gamma_a_of(cert), gb = synth::gamma_b_of(cert), eta = synth::eta_of(cert);
  const bool quadratic = std::holds_alternative<synth::QcbcCertificate>(cert);
  std::mt19937_64 rng(o.seed);

  auto [g, gt] = parts_of(sys, cert);
  const Flat fg(g, n), fgt(gt, n);
  const VectorXd z = zero_like(n);
  CheckReport rep;

  auto finish = [&](ConditionReport& c) {
    c.pass = c.violation <= c.tolerance;
    rep.conditions.push_back(c);
  };

  // Level on the initial set. B is separable, so the supremum over Xa^(h+1)
  // is the sum of the separate suprema.
  {
    auto pts = sample_and_grid(sys.Xa, o, rng);
    auto eg = max_over(pts.size(), o.threads, [&](std::size_t i) { return fg(pts[i], z); });
    auto et = max_over(pts.size(), o.threads, [&](std::size_t i) { return fgt(pts[i], z); });
    ConditionReport c;
    c.name = "initial";
    c.violation = eg.value + h * et.value - ga;
    c.tolerance = o.tolerance;
    c.x = pts[eg.at];
    c.xh = pts[et.at];
    c.samples = static_cast<long>(pts.size());
    finish(c);
  }

  // Level on each unsafe region. For a quadratic certificate the delayed part
  // is nonnegative and dropped; otherwise it is minimised over X \ Xb.
  for (std::size_t r = 0; r < sys.Xb.size(); ++r) {
    auto pts = sample_and_grid(sys.Xb[r], o, rng);
    auto eg = max_over(pts.size(), o.threads, [&](std::size_t i) { return -fg(pts[i], z); });
    ConditionReport c;
    c.name = "unsafe" + std::to_string(r + 1);
    c.tolerance = o.tolerance;
    c.x = pts[eg.at];
    c.samples = static_cast<long>(pts.size());
    double delayed = 0.0;
    if (!quadratic) {
      auto out = sample_outside(sys.X, sys.Xb[r], o, rng);
      if (!out.empty()) {
        auto et = max_over(out.size(), o.threads, [&](std::size_t i) { return -fgt(out[i], z); });
        delayed = -et.value;
        c.xh = out[et.at];
      }
    }
    c.violation = gb - (-eg.value + h * delayed);
    finish(c);
  }

  // Decrease and input membership on X^2.
  std::vector<std::pair<VectorXd, VectorXd>> pairs;
  {
    auto a = model::sample_set(sys.X, o.samples, rng);
    auto b = model::sample_set(sys.X, o.samples, rng);
    for (int i = 0; i < o.samples; ++i) pairs.emplace_back(a[i], b[i]);
    const auto& bx = sys.X.bounds();
    VectorXd lo(2 * n), hi(2 * n);
    lo << bx.lo, bx.lo;
    hi << bx.hi, bx.hi;
    auto grid = grid_points(lo, hi, o.grid, o.max_grid_points, [&](const VectorXd& p) {
      return sys.X.contains(p.head(n), 1e-12) && sys.X.contains(p.tail(n), 1e-12);
    });
    for (const auto& p : grid) pairs.emplace_back(p.head(n), p.tail(n));
  }
  {
    DecreaseOracle oracle(sys, cert, ctrl);
    const Flat fd(oracle.polynomial(), n);
    auto e = max_over(pairs.size(), o.threads, [&](std::size_t i) { return fd(pairs[i].first, pairs[i].second); });
    ConditionReport c;
    c.name = "decrease";
    c.violation = e.value - eta;
    c.tolerance = o.decrease_tolerance;
    c.x = pairs[e.at].first;
    c.xh = pairs[e.at].second;
    c.samples = static_cast<long>(pairs.size());
    finish(c);
  }
  {
    ConditionReport c;
    c.name = "input";
    c.tolerance = o.tolerance;
    c.enforced = o.enforce_input;
    if (!sys.U.unconstrained()) {
      std::vector<Flat> laws;
      for (const auto& l : ctrl.laws()) laws.emplace_back(l, n);
      auto e = max_over(pairs.size(), o.threads, [&](std::size_t i) {
        VectorXd u(sys.m);
        for (int q = 0; q < sys.m; ++q) u[q] = laws[q](pairs[i].first, pairs[i].second);
        return sys.U.max_violation(u);
      });
      c.violation = e.value;
      c.x = pairs[e.at].first;
      c.xh = pairs[e.at].second;
      c.samples = static_cast<long>(pairs.size());
    } else {
      c.violation = 0.0;
    }
    finish(c);
  }
  if (!quadratic) {
    // B >= 0 on X^(h+1), by the same separable reduction.
    auto pts = sample_and_grid(sys.X, o, rng);
    auto eg = max_over(pts.size(), o.threads, [&](std::size_t i) { return -fg(pts[i], z); });
    auto et = max_over(pts.size(), o.threads, [&](std::size_t i) { return -fgt(pts[i], z); });
    ConditionReport c;
    c.name = "nonnegative";
    c.violation = eg.value + h * et.value;
    c.tolerance = o.tolerance;
    c.x = pts[eg.at];
    c.xh = pts[et.at];
    c.samples = static_cast<long>(pts.size());
    finish(c);
  }

  auto side = [&](std::string name, double value, bool pass, std::string detail) {
    rep.side.push_back({std::move(name), value, pass, std::move(detail)});
  };
  if (const auto* q = std::get_if<synth::QcbcCertificate>(&cert)) {
    double lp = min_eig(q->P), lp1 = min_eig(q->P1);
    side("P_positive_definite", lp, lp > 0.0, "smallest eigenvalue of P");
    side("P1_psd", lp1, lp1 >= -o.tolerance, "smallest eigenvalue of P1");
    if (q->alpha) {
      const double a = *q->alpha;
      double v = max_eig(q->P) - 1.0 / a;
      side("P_below_inv_alpha", v, a > 0 && v <= o.tolerance * (1.0 + 1.0 / a), "lmax(P) - 1/alpha");
      if (q->S) {
        double s = max_eig(*q->S) - a;
        side("S_below_alpha", s, s <= o.tolerance * (1.0 + a), "lmax(S) - alpha");
      }
    }
  }
  side("levels_nonnegative", std::min({ga, gb, eta}), ga >= 0 && gb >= 0 && eta >= 0, "min(gamma_a, gamma_b, eta)");
  side("levels_separated", gb - ga, gb > ga, "gamma_b - gamma_a");
  if (o.sos_recheck) {
    bool ok = barrier_is_sos(sys, cert);
    side("barrier_sos", ok ? 1.0 : 0.0, ok, "g(x) + h g~(xh) is a sum of squares");
  }

  rep.pass = std::all_of(rep.conditions.begin(), rep.conditions.end(), [](const auto& c) { return c.pass || !c.enforced; }) &&
             std::all_of(rep.side.begin(), rep.side.end(), [](const auto& s) { return s.pass; });
  rep.bound = recompute_bound(cert, prob.spec.T);
  std::ostringstream note;
  long total = 0;
  for (const auto& c : rep.conditions) total += c.samples;
  note << (rep.pass ? "no violation found among " : "violations found; ") << total
       << " sampled points; a sampled check is not a proof";
  rep.note = note.str();
  return rep;
}

}  // namespace tdsafe::verify
