#include "tdsafe/sdp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>

#include "tdsafe/common/error.hpp"

namespace tdsafe::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kFeasible: return "feasible";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

PosdefReport posdef_check(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw ShapeError("posdef_check needs a square matrix");
  if (m.size() == 0) return {0.0, true};
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) throw Error("posdef_check: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues()(0);
  return {lmin, lmin >= -tol};
}

namespace {

// One constraint restricted to one block. Values have symmetric-matrix
// meaning: off-diagonal (r, c) stands for both A[r][c] and A[c][r].
struct Part {
  int row = 0;
  std::vector<int> r, c;
  std::vector<double> v;
  std::vector<int> support;
};

struct Data {
  int m = 0;
  int nf = 0;
  std::vector<int> sizes;
  std::vector<std::vector<Part>> parts;  // per block
  MatrixXd B;                            // m x nf
  VectorXd b;
  std::vector<MatrixXd> C;
  VectorXd c;
  VectorXd row_norm;  // scaled row = original row / row_norm
  std::vector<int> row_origin;
  double obj_scale = 1.0;
  bool has_objective = false;
};

double frob(const std::vector<MatrixXd>& ms) {
  double s = 0.0;
  for (const auto& m : ms) s += m.squaredNorm();
  return std::sqrt(s);
}

double inner(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

// Returns false if some row reduces to 0 = b with b != 0.
bool build(const sos::SdpProblem& p, Data& d, std::string& why) {
  p.validate();
  d.sizes = p.block_sizes;
  d.nf = p.num_free;
  const int nb = static_cast<int>(d.sizes.size());

  // Objective.
  d.C.assign(nb, MatrixXd());
  for (int k = 0; k < nb; ++k) d.C[k] = MatrixXd::Zero(d.sizes[k], d.sizes[k]);
  d.c = VectorXd::Zero(d.nf);
  for (const auto& e : p.objective) {
    double v = e.row == e.col ? e.value : 0.5 * e.value;
    d.C[e.block](e.row, e.col) += v;
    if (e.row != e.col) d.C[e.block](e.col, e.row) += v;
  }
  for (const auto& [i, v] : p.objective_free) d.c[i] += v;
  d.has_objective = p.has_objective();
  double cmax = d.c.size() ? d.c.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& m : d.C) {
    if (m.size()) cmax = std::max(cmax, m.cwiseAbs().maxCoeff());
  }
  d.obj_scale = std::max(1.0, cmax);
  for (auto& m : d.C) m /= d.obj_scale;
  d.c /= d.obj_scale;

  // Rows: merge duplicate coordinates, convert, scale.
  d.parts.assign(nb, {});
  std::vector<std::vector<std::pair<int, double>>> free_rows;
  std::vector<double> rhs;
  std::vector<double> norms;
  for (int i = 0; i < p.num_rows(); ++i) {
    const auto& row = p.rows[i];
    std::map<std::tuple<int, int, int>, double> acc;
    for (const auto& e : row.entries) acc[{e.block, e.row, e.col}] += e.value;
    std::map<int, double> facc;
    for (const auto& [j, v] : row.free) facc[j] += v;
    double sq = 0.0;
    for (auto& [key, v] : acc) {
      auto [k, r, c] = key;
      if (r == c) {
        sq += v * v;
      } else {
        v *= 0.5;
        sq += 2 * v * v;
      }
    }
    for (const auto& [j, v] : facc) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm == 0.0) {
      if (std::abs(row.rhs) > 0.0) {
        why = "equality " + std::to_string(i) + " reads 0 = " + std::to_string(row.rhs);
        return false;
      }
      continue;
    }
    const int idx = static_cast<int>(rhs.size());
    int cur_block = -1;
    for (const auto& [key, v] : acc) {
      auto [k, r, c] = key;
      if (v == 0.0) continue;
      if (k != cur_block) {
        d.parts[k].push_back(Part{idx, {}, {}, {}, {}});
        cur_block = k;
      }
      Part& part = d.parts[k].back();
      part.r.push_back(r);
      part.c.push_back(c);
      part.v.push_back(v / norm);
    }
    std::vector<std::pair<int, double>> fr;
    for (const auto& [j, v] : facc) {
      if (v != 0.0) fr.emplace_back(j, v / norm);
    }
    free_rows.push_back(std::move(fr));
    rhs.push_back(row.rhs / norm);
    norms.push_back(norm);
    d.row_origin.push_back(i);
  }
  d.m = static_cast<int>(rhs.size());
  d.b = Eigen::Map<VectorXd>(rhs.data(), d.m);
  d.row_norm = Eigen::Map<VectorXd>(norms.data(), d.m);
  d.B = MatrixXd::Zero(d.m, d.nf);
  for (int i = 0; i < d.m; ++i) {
    for (const auto& [j, v] : free_rows[i]) d.B(i, j) = v;
  }
  for (auto& bp : d.parts) {
    for (auto& part : bp) {
      std::vector<int> s = part.r;
      s.insert(s.end(), part.c.begin(), part.c.end());
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      part.support = std::move(s);
    }
  }
  return true;
}

// <A_i, H> for every constraint, H not necessarily symmetric.
VectorXd apply_A(const Data& d, const std::vector<MatrixXd>& H) {
  VectorXd out = VectorXd::Zero(d.m);
  for (std::size_t k = 0; k < d.parts.size(); ++k) {
    const MatrixXd& h = H[k];
    for (const auto& part : d.parts[k]) {
      double s = 0.0;
      for (std::size_t e = 0; e < part.v.size(); ++e) {
        int r = part.r[e], c = part.c[e];
        s += r == c ? part.v[e] * h(r, r) : part.v[e] * (h(r, c) + h(c, r));
      }
      out[part.row] += s;
    }
  }
  return out;
}

std::vector<MatrixXd> apply_At(const Data& d, const VectorXd& y) {
  std::vector<MatrixXd> out(d.sizes.size());
  for (std::size_t k = 0; k < d.sizes.size(); ++k) {
    out[k] = MatrixXd::Zero(d.sizes[k], d.sizes[k]);
    for (const auto& part : d.parts[k]) {
      double yi = y[part.row];
      if (yi == 0.0) continue;
      for (std::size_t e = 0; e < part.v.size(); ++e) {
        int r = part.r[e], c = part.c[e];
        out[k](r, c) += yi * part.v[e];
        if (r != c) out[k](c, r) += yi * part.v[e];
      }
    }
  }
  return out;
}

// Largest step a with M + a D still PSD, M = L L^T.
double max_step(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& D) {
  if (D.rows() == 1) {
    double m = llt.matrixL()(0, 0);
    m *= m;
    return D(0, 0) < 0 ? -m / D(0, 0) : std::numeric_limits<double>::infinity();
  }
  MatrixXd t = llt.matrixL().solve(D);
  MatrixXd w = llt.matrixL().solve(t.transpose());
  w = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(w, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

MatrixXd sym(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

class InteriorPoint {
 public:
  InteriorPoint(const Data& d, const SolveOptions& o) : d_(d), o_(o) {}

  SdpSolution run();

 private:
  void initial_point();
  void assemble_schur(const std::vector<MatrixXd>& Xm, const std::vector<MatrixXd>& Zinv);
  double eq_residual_original(const VectorXd& rp) const {
    return d_.m ? (rp.cwiseProduct(d_.row_norm)).cwiseAbs().maxCoeff() : 0.0;
  }

  const Data& d_;
  const SolveOptions& o_;
  std::vector<MatrixXd> X_, Z_;
  VectorXd y_, f_;
  void factor();
  VectorXd kkt_solve(const VectorXd& rhs) const;

  MatrixXd kkt_;     // scaled Schur matrix S M S
  MatrixXd bs_;      // scaled free-variable coupling S B S_f
  VectorXd kscale_;  // diagonal of S (rows) and S_f (free variables)
  Eigen::LLT<MatrixXd> llt_;
  MatrixXd w_;
  Eigen::PartialPivLU<MatrixXd> free_lu_, lu_;
  bool chol_ = false;
  int N_ = 0;
 public:
  double mu0_ = 1.0;
  double rp0_ = 1.0;
  double bscale_ = 1.0;  // 1 + max |b|, original row scaling
};

void InteriorPoint::initial_point() {
  const int nb = static_cast<int>(d_.sizes.size());
  X_.resize(nb);
  Z_.resize(nb);
  N_ = 0;
  for (int k = 0; k < nb; ++k) {
    const int s = d_.sizes[k];
    N_ += s;
    double xi = std::max(10.0, std::sqrt(static_cast<double>(s)));
    double eta = std::max({10.0, std::sqrt(static_cast<double>(s)), d_.C[k].norm()});
    for (const auto& part : d_.parts[k]) {
      double an = 0.0;
      for (std::size_t e = 0; e < part.v.size(); ++e) {
        an += (part.r[e] == part.c[e] ? 1.0 : 2.0) * part.v[e] * part.v[e];
      }
      an = std::sqrt(an);
      xi = std::max(xi, s * (1.0 + std::abs(d_.b[part.row])) / (1.0 + an));
      eta = std::max(eta, an);
    }
    X_[k] = xi * MatrixXd::Identity(s, s);
    Z_[k] = eta * MatrixXd::Identity(s, s);
  }
  y_ = VectorXd::Zero(d_.m);
  f_ = VectorXd::Zero(d_.nf);
}

void InteriorPoint::assemble_schur(const std::vector<MatrixXd>& Xm, const std::vector<MatrixXd>& Zinv) {
  const int m = d_.m, nf = d_.nf;
  kkt_ = MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < d_.parts.size(); ++k) {
    const auto& parts = d_.parts[k];
    if (parts.empty()) continue;
    const MatrixXd& X = Xm[k];
    const MatrixXd& Zi = Zinv[k];
    const int s = d_.sizes[k];
    MatrixXd K, G;
    std::vector<int> pos(s, -1);
    for (const auto& pj : parts) {
      const int t = static_cast<int>(pj.support.size());
      for (int a = 0; a < t; ++a) pos[pj.support[a]] = a;
      // K = (A_j Z^{-1}) restricted to the support rows.
      K.setZero(t, s);
      for (std::size_t e = 0; e < pj.v.size(); ++e) {
        int r = pj.r[e], c = pj.c[e];
        K.row(pos[r]) += pj.v[e] * Zi.row(c);
        if (r != c) K.row(pos[c]) += pj.v[e] * Zi.row(r);
      }
      MatrixXd Xs(s, t);
      for (int a = 0; a < t; ++a) Xs.col(a) = X.col(pj.support[a]);
      G.noalias() = Xs * K;
      for (const auto& pi : parts) {
        double v = 0.0;
        for (std::size_t e = 0; e < pi.v.size(); ++e) {
          int r = pi.r[e], c = pi.c[e];
          v += r == c ? pi.v[e] * G(r, r) : pi.v[e] * (G(r, c) + G(c, r));
        }
        kkt_(pi.row, pj.row) += v;
      }
      for (int a = 0; a < t; ++a) pos[pj.support[a]] = -1;
    }
  }
  // Symmetric diagonal scaling. The Schur diagonal can span many orders of
  // magnitude once some blocks are near their boundary, and a regularisation
  // relative to the largest entry would swamp the small ones.
  kscale_.resize(m + nf);
  for (int i = 0; i < m; ++i) {
    double dii = kkt_(i, i);
    kscale_[i] = dii > 0 ? 1.0 / std::sqrt(dii) : 1.0;
  }
  kkt_ = kscale_.head(m).asDiagonal() * kkt_ * kscale_.head(m).asDiagonal();
  for (int i = 0; i < m; ++i) kkt_(i, i) += 1e-13;
  bs_ = kscale_.head(m).asDiagonal() * d_.B;
  for (int j = 0; j < nf; ++j) {
    double c = bs_.col(j).cwiseAbs().maxCoeff();
    kscale_[m + j] = c > 0 ? 1.0 / c : 1.0;
  }
  bs_ = bs_ * kscale_.tail(nf).asDiagonal();
}

// Solves [M B; B^T -d I] in the scaled variables: Cholesky of M, then the
// small Schur complement on the free block. Falls back to LU on the full
// matrix when M is not numerically positive definite.
void InteriorPoint::factor() {
  const int m = d_.m, nf = d_.nf;
  llt_.compute(kkt_);
  chol_ = llt_.info() == Eigen::Success;
  if (chol_) {
    if (nf) {
      w_ = llt_.solve(bs_);
      MatrixXd S = bs_.transpose() * w_;
      S.diagonal().array() += 1e-13;
      free_lu_.compute(S);
    }
  } else {
    MatrixXd K = MatrixXd::Zero(m + nf, m + nf);
    K.topLeftCorner(m, m) = kkt_;
    K.topRightCorner(m, nf) = bs_;
    K.bottomLeftCorner(nf, m) = bs_.transpose();
    K.bottomRightCorner(nf, nf).diagonal().setConstant(-1e-13);
    lu_.compute(K);
  }
}

VectorXd InteriorPoint::kkt_solve(const VectorXd& rhs) const {
  const int m = d_.m, nf = d_.nf;
  VectorXd r = kscale_.cwiseProduct(rhs), z(m + nf);
  if (!chol_) {
    z = lu_.solve(r);
  } else {
    VectorXd v = llt_.solve(r.head(m));
    if (nf) {
      VectorXd df = free_lu_.solve(bs_.transpose() * v - r.tail(nf));
      z.head(m) = v - w_ * df;
      z.tail(nf) = df;
    } else {
      z = v;
    }
  }
  return kscale_.cwiseProduct(z);
}

SdpSolution InteriorPoint::run() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const int nb = static_cast<int>(d_.sizes.size());
  const double cnorm = frob(d_.C) + d_.c.norm();
  initial_point();
  bscale_ = 1.0 + (d_.m ? d_.b.cwiseProduct(d_.row_norm).cwiseAbs().maxCoeff() : 0.0);
  mu0_ = inner(X_, Z_) / std::max(1, N_);

  SdpSolution sol;
  sol.status = Status::kNumericalFailure;
  int stalls = 0;
  int it = 0;
  double eqres = 0.0;

  auto finish = [&](Status st, const std::string& msg) {
    sol.status = st;
    sol.message = msg;
  };
  // Last primal-feasible iterate with the smallest gap. Near a degenerate
  // optimum the iterates can drift off the affine set again.
  struct Snapshot {
    std::vector<MatrixXd> X, Z;
    VectorXd y, f;
    double eqres = 0.0, gap = 0.0;
    int it = 0;
  };
  std::optional<Snapshot> best;

  for (;; ++it) {
    // Residuals.
    VectorXd Ax = apply_A(d_, X_);
    VectorXd rp = d_.b - Ax - (d_.nf ? VectorXd(d_.B * f_) : VectorXd::Zero(d_.m));
    std::vector<MatrixXd> Aty = apply_At(d_, y_);
    std::vector<MatrixXd> Rd(nb);
    for (int k = 0; k < nb; ++k) Rd[k] = d_.C[k] - Aty[k] - Z_[k];
    VectorXd rf = d_.c - (d_.nf ? VectorXd(d_.B.transpose() * y_) : VectorXd::Zero(0));
    const double pobj = inner(d_.C, X_) + d_.c.dot(f_);
    const double dobj = d_.b.dot(y_);
    const double xz = inner(X_, Z_);
    const double mu = xz / std::max(1, N_);
    const double reld = (frob(Rd) + rf.norm()) / (1.0 + cnorm);
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    eqres = eq_residual_original(rp);
    if (it == 0) rp0_ = std::max(1e-300, rp.norm());
    const bool primal_ok = eqres <= 0.5 * o_.eq_tol * bscale_;

    if (o_.verbose) {
      std::fprintf(stderr, "%3d pobj %+.6e dobj %+.6e eq %.2e reld %.2e gap %.2e mu %.2e\n", it, pobj,
                   dobj, eqres, reld, relgap, mu);
    }

    if (primal_ok && (!best || relgap < best->gap)) best = Snapshot{X_, Z_, y_, f_, eqres, relgap, it};
    if (best && eqres > o_.eq_tol * bscale_ && eqres > 1e3 * best->eqres) {
      finish(Status::kNumericalFailure, "diverged from the affine set");
      break;
    }
    if (!d_.has_objective && o_.early_feasible_stop && primal_ok) {
      finish(Status::kFeasible, "interior feasible point found");
      break;
    }
    if (primal_ok && reld <= o_.gap_tol && (relgap <= o_.gap_tol || mu <= o_.gap_tol * 1e-2)) {
      finish(d_.has_objective ? Status::kOptimal : Status::kFeasible, "converged");
      break;
    }
    // Dual ray: b^T y > 0 with -A*(y) nearly PSD and B^T y nearly zero.
    if (dobj > 0) {
      double q = std::max((frob(Rd) + frob(d_.C)) / dobj, (d_.c - rf).norm() / dobj);
      if (q < o_.infeas_tol) {
        sol.certificate = y_ / dobj;
        finish(Status::kInfeasible, "dual ray certifies primal infeasibility");
        break;
      }
    }
    if (pobj < 0 && d_.has_objective) {
      double q = (d_.b - rp).norm() / -pobj;
      if (q < o_.infeas_tol) {
        finish(Status::kUnbounded, "primal ray certifies unboundedness");
        break;
      }
    }
    double elapsed = std::chrono::duration<double>(clock::now() - start).count();
    if (it >= o_.max_iters || elapsed > o_.time_limit || stalls >= 6) {
      std::string why = it >= o_.max_iters ? "iteration limit" : elapsed > o_.time_limit ? "time limit" : "stalled";
      if (eqres <= o_.eq_tol * bscale_) {
        finish(Status::kFeasible, why + "; returning feasible iterate");
      } else {
        finish(Status::kNumericalFailure, why + " before reaching feasibility");
      }
      break;
    }

    // Newton system.
    std::vector<MatrixXd> Zinv(nb);
    std::vector<Eigen::LLT<MatrixXd>> lx(nb), lz(nb);
    bool ok = true;
    for (int k = 0; k < nb; ++k) {
      lx[k].compute(X_[k]);
      lz[k].compute(Z_[k]);
      if (lx[k].info() != Eigen::Success || lz[k].info() != Eigen::Success) {
        ok = false;
        break;
      }
      Zinv[k] = lz[k].solve(MatrixXd::Identity(d_.sizes[k], d_.sizes[k]));
      Zinv[k] = sym(Zinv[k]);
    }
    if (!ok) {
      finish(primal_ok ? Status::kFeasible : Status::kNumericalFailure, "lost positive definiteness");
      break;
    }
    assemble_schur(X_, Zinv);
    factor();

    auto direction = [&](const std::vector<MatrixXd>& Rc, std::vector<MatrixXd>& dX, VectorXd& dy,
                         VectorXd& df, std::vector<MatrixXd>& dZ) {
      std::vector<MatrixXd> H(nb);
      for (int k = 0; k < nb; ++k) H[k] = (Rc[k] - X_[k] * Rd[k]) * Zinv[k] - X_[k];
      VectorXd rhs(d_.m + d_.nf);
      rhs.head(d_.m) = rp - apply_A(d_, H);
      rhs.tail(d_.nf) = rf;
      VectorXd sol_v = kkt_solve(rhs);
      dZ.resize(nb);
      dX.resize(nb);
      // The Schur matrix loses accuracy as X Z^-1 degenerates; refine against
      // the operator itself so that A(dX) + B df matches rp.
      for (int pass = 0;; ++pass) {
        dy = sol_v.head(d_.m);
        df = sol_v.tail(d_.nf);
        std::vector<MatrixXd> Atdy = apply_At(d_, dy);
        for (int k = 0; k < nb; ++k) {
          dZ[k] = Rd[k] - Atdy[k];
          dX[k] = sym((Rc[k] - X_[k] * dZ[k]) * Zinv[k] - X_[k]);
        }
        if (pass == 4 || !sol_v.allFinite()) break;
        VectorXd r(d_.m + d_.nf);
        r.head(d_.m) = rp - apply_A(d_, dX) - (d_.nf ? VectorXd(d_.B * df) : VectorXd::Zero(d_.m));
        r.tail(d_.nf) = rf - d_.B.transpose() * dy;
        if (r.norm() <= 1e-14 * (1.0 + rhs.norm())) break;
        sol_v += kkt_solve(r);
      }
      return dy.allFinite() && df.allFinite();
    };
    auto steps = [&](const std::vector<MatrixXd>& dX, const std::vector<MatrixXd>& dZ) {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(lx[k], dX[k]));
        ad = std::min(ad, max_step(lz[k], dZ[k]));
      }
      return std::pair<double, double>(ap, ad);
    };

    std::vector<MatrixXd> Rc(nb), dXa, dZa;
    for (int k = 0; k < nb; ++k) Rc[k] = MatrixXd::Zero(d_.sizes[k], d_.sizes[k]);
    VectorXd dya, dfa;
    if (!direction(Rc, dXa, dya, dfa, dZa)) {
      finish(primal_ok ? Status::kFeasible : Status::kNumericalFailure, "singular Newton system");
      break;
    }
    auto [apa, ada] = steps(dXa, dZa);
    apa = std::min(1.0, apa);
    ada = std::min(1.0, ada);
    double mu_aff = 0.0;
    for (int k = 0; k < nb; ++k) {
      mu_aff += (X_[k] + apa * dXa[k]).cwiseProduct(Z_[k] + ada * dZa[k]).sum();
    }
    mu_aff /= std::max(1, N_);
    double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);
    // Do not let the duality measure fall faster than the primal residual;
    // without a Slater point the iterates otherwise stall off the affine set.
    sigma = std::min(1.0, std::max(sigma, (rp.norm() / rp0_) * mu0_ / mu));

    for (int k = 0; k < nb; ++k) {
      Rc[k] = sigma * mu * MatrixXd::Identity(d_.sizes[k], d_.sizes[k]) - dXa[k] * dZa[k];
    }
    std::vector<MatrixXd> dX, dZ;
    VectorXd dy, df;
    if (!direction(Rc, dX, dy, df, dZ)) {
      finish(primal_ok ? Status::kFeasible : Status::kNumericalFailure, "singular Newton system");
      break;
    }
    auto [ap, ad] = steps(dX, dZ);
    ap = ad = std::min(1.0, 0.98 * std::min(ap, ad));
    for (int k = 0; k < nb; ++k) {
      X_[k] = sym(X_[k] + ap * dX[k]);
      Z_[k] = sym(Z_[k] + ad * dZ[k]);
    }
    f_ += ap * df;
    y_ += ad * dy;
    stalls = (ap < 1e-8 && ad < 1e-8) ? stalls + 1 : 0;
  }

  if (sol.status == Status::kNumericalFailure && best) {
    X_ = best->X;
    Z_ = best->Z;
    y_ = best->y;
    f_ = best->f;
    eqres = best->eqres;
    sol.status = Status::kFeasible;
    sol.message += "; returning feasible iterate " + std::to_string(best->it);
  }

  // Map back to the caller's scaling.
  sol.iterations = it;
  sol.X = X_;
  sol.f = f_;
  sol.y = VectorXd::Zero(d_.m);
  for (int i = 0; i < d_.m; ++i) sol.y[i] = y_[i] * d_.obj_scale / d_.row_norm[i];
  sol.Z.resize(nb);
  for (int k = 0; k < nb; ++k) sol.Z[k] = Z_[k] * d_.obj_scale;
  if (sol.certificate.size()) {
    for (int i = 0; i < d_.m; ++i) sol.certificate[i] /= d_.row_norm[i];
  }
  sol.primal_objective = d_.obj_scale * (inner(d_.C, X_) + d_.c.dot(f_));
  sol.dual_objective = d_.obj_scale * d_.b.dot(y_);
  sol.eq_residual = eqres;
  double lmin = std::numeric_limits<double>::infinity();
  for (const auto& x : X_) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(x, Eigen::EigenvaluesOnly);
    lmin = std::min(lmin, es.eigenvalues()(0));
  }
  sol.min_eig = nb ? lmin : 0.0;
  sol.seconds = std::chrono::duration<double>(clock::now() - start).count();
  if (sol.usable() && (sol.eq_residual > o_.eq_tol * bscale_ || sol.min_eig < -o_.eig_tol)) {
    sol.status = Status::kNumericalFailure;
    sol.message += "; final point violates tolerances";
  }
  return sol;
}

}  // namespace

SdpSolution solve(const sos::SdpProblem& problem, const SolveOptions& options) {
  Data d;
  std::string why;
  if (!build(problem, d, why)) {
    SdpSolution s;
    s.status = Status::kInfeasible;
    s.message = why;
    for (int sz : problem.block_sizes) s.X.push_back(MatrixXd::Zero(sz, sz));
    s.f = VectorXd::Zero(problem.num_free);
    return s;
  }
  InteriorPoint ip(d, options);
  SdpSolution s = ip.run();
  // Report the dual vector indexed by the caller's rows.
  VectorXd y = VectorXd::Zero(problem.num_rows());
  VectorXd cert = VectorXd::Zero(s.certificate.size() ? problem.num_rows() : 0);
  for (int i = 0; i < d.m; ++i) {
    y[d.row_origin[i]] = s.y[i];
    if (cert.size()) cert[d.row_origin[i]] = s.certificate[i];
  }
  s.y = std::move(y);
  s.certificate = std::move(cert);
  if (options.verbose) {
    std::fprintf(stderr, "sdp: %s after %d iterations, %.2fs (%s)\n", to_string(s.status).c_str(),
                 s.iterations, s.seconds, s.message.c_str());
  }
  return s;
}

}  // namespace tdsafe::sdp
