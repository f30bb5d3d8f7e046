#include "tdsafe/sos/program.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "tdsafe/common/error.hpp"

namespace tdsafe::sos {

using poly::Exponent;

namespace {

std::string monomial_name(const poly::VarSpace& sp, const Exponent& e) {
  std::string s;
  for (int i = 0; i < sp.size(); ++i) {
    if (!e[i]) continue;
    if (!s.empty()) s += "*";
    s += sp.name_of(i);
    if (e[i] > 1) s += "^" + std::to_string(e[i]);
  }
  return s.empty() ? "1" : s;
}

std::vector<int> appearing_vars(const LinPolynomial& p, const std::vector<int>& exclude) {
  const int n = p.space()->size();
  std::vector<bool> used(n, false);
  for (const auto& [e, c] : p.terms()) {
    for (int i = 0; i < n; ++i) {
      if (e[i]) used[i] = true;
    }
  }
  for (int i : exclude) used[i] = false;
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (used[i]) out.push_back(i);
  }
  return out;
}

// Keep z only if 2z lies in the bounding box of the target's Newton polytope.
void newton_filter(const LinPolynomial& target, std::vector<Exponent>& basis) {
  const int n = target.space()->size();
  std::vector<int> lo(n, 1 << 20), hi(n, 0);
  int dlo = 1 << 20, dhi = 0;
  for (const auto& [e, c] : target.terms()) {
    for (int i = 0; i < n; ++i) {
      lo[i] = std::min<int>(lo[i], e[i]);
      hi[i] = std::max<int>(hi[i], e[i]);
    }
    int d = poly::total_degree(e);
    dlo = std::min(dlo, d);
    dhi = std::max(dhi, d);
  }
  std::erase_if(basis, [&](const Exponent& z) {
    for (int i = 0; i < n; ++i) {
      if (2 * z[i] > hi[i] || 2 * z[i] < lo[i]) return true;
    }
    int d = 2 * poly::total_degree(z);
    return d < dlo || d > dhi;
  });
}

}  // namespace

int multiplier_degree(int target_degree, int descriptor_degree) {
  int k = std::max(2, target_degree - descriptor_degree);
  if (k % 2) ++k;
  if ((k + descriptor_degree) % 2 && k + descriptor_degree > target_degree) k -= 2;
  return std::max(0, k);
}

std::vector<Exponent> monomial_basis(const poly::VarSpace& space, const std::vector<std::string>& groups,
                                     int max_degree) {
  return poly::monomials_up_to(space.size(), poly::group_indices(space, groups), max_degree);
}

LinPolyMatrix SymMatrixVar::as_poly_matrix(const poly::SpacePtr& space) const {
  LinPolyMatrix m(space, n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = LinPolynomial::constant(space, (*this)(i, j));
  }
  return m;
}

SosProgram::SosProgram(poly::SpacePtr space, SosOptions options)
    : space_(std::move(space)), options_(options) {}

int SosProgram::new_block(int n, const std::string& name, std::vector<int>& ids) {
  if (n < 1) throw Error("PSD block " + name + " must have size >= 1");
  const int block = static_cast<int>(block_sizes_.size());
  block_sizes_.push_back(n);
  ids.assign(static_cast<std::size_t>(n) * n, -1);
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      DecisionVar v;
      v.kind = DecisionVar::Kind::kBlockEntry;
      v.name = name + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
      v.block = block;
      v.row = r;
      v.col = c;
      const int id = static_cast<int>(vars_.size());
      vars_.push_back(std::move(v));
      ids[r * n + c] = ids[c * n + r] = id;
    }
  }
  return block;
}

AffineExpr SosProgram::new_free(const std::string& name) {
  DecisionVar v;
  v.kind = DecisionVar::Kind::kFree;
  v.name = name;
  v.free_index = num_free_++;
  const int id = static_cast<int>(vars_.size());
  vars_.push_back(std::move(v));
  return AffineExpr::variable(id);
}

AffineExpr SosProgram::new_nonneg(const std::string& name) {
  std::vector<int> ids;
  new_block(1, name, ids);
  vars_[ids[0]].name = name;
  return AffineExpr::variable(ids[0]);
}

SymMatrixVar SosProgram::new_psd(int n, const std::string& name) {
  std::vector<int> ids;
  SymMatrixVar m;
  m.n = n;
  m.block = new_block(n, name, ids);
  for (int id : ids) m.entries.push_back(AffineExpr::variable(id));
  return m;
}

SymMatrixVar SosProgram::new_symmetric(int n, const std::string& name) {
  SymMatrixVar m;
  m.n = n;
  m.entries.assign(static_cast<std::size_t>(n) * n, AffineExpr());
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      AffineExpr v = new_free(name + "[" + std::to_string(r) + "," + std::to_string(c) + "]");
      m.entries[r * n + c] = m.entries[c * n + r] = v;
    }
  }
  return m;
}

LinPolynomial SosProgram::new_free_poly(const std::vector<std::string>& groups, int degree,
                                        const std::string& name, int min_degree) {
  LinPolynomial p(space_);
  for (const auto& e : poly::monomials_up_to(space_->size(), poly::group_indices(*space_, groups), degree,
                                             min_degree)) {
    p.add_term(e, new_free(name + "[" + monomial_name(*space_, e) + "]"));
  }
  return p;
}

LinPolynomial SosProgram::new_sos_poly(const std::vector<std::string>& groups, int degree,
                                       const std::string& name) {
  auto basis = monomial_basis(*space_, groups, degree / 2);
  std::vector<int> ids;
  const int n = static_cast<int>(basis.size());
  new_block(n, name, ids);
  LinPolynomial p(space_);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      p.add_term(poly::add_exponents(basis[i], basis[j]), AffineExpr::variable(ids[i * n + j], i == j ? 1.0 : 2.0));
    }
  }
  return p;
}

LinPolynomial SosProgram::multiplier(const std::vector<std::string>& groups, int degree, bool sos,
                                     const std::string& name) {
  return sos ? new_sos_poly(groups, degree, name) : new_free_poly(groups, degree, name);
}

namespace {

void gram_equalities(const LinPolynomial& target, const std::vector<Exponent>& basis,
                     const std::vector<int>& ids, std::vector<AffineExpr>& eqs) {
  std::map<Exponent, AffineExpr, poly::GrlexLess> acc;
  for (const auto& [e, c] : target.terms()) acc[e] += c;
  const int n = static_cast<int>(basis.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      acc[poly::add_exponents(basis[i], basis[j])] -= AffineExpr::variable(ids[i * n + j], i == j ? 1.0 : 2.0);
    }
  }
  for (auto& [e, c] : acc) eqs.push_back(std::move(c));
}

}  // namespace

SosHandle SosProgram::add_sos(const LinPolynomial& target, const std::string& name) {
  target.check_space(LinPolynomial(space_));
  if (target.is_zero()) return SosHandle{name, -1, {}};
  int D = target.degree();
  if (D % 2) {
    // An odd top part with unknown coefficients may still cancel, and must:
    // the basis stops at (D - 1) / 2 and the top coefficients are pinned to
    // zero. One with numeric coefficients cannot cancel.
    bool numeric = true;
    for (const auto& [e, c] : target.terms()) {
      if (poly::total_degree(e) == D && !c.is_constant()) numeric = false;
    }
    if (numeric) throw Error("SOS constraint " + name + " has odd degree " + std::to_string(D));
    --D;
  }
  auto vars = appearing_vars(target, {});
  auto basis = poly::monomials_up_to(space_->size(), vars, D / 2);
  if (options_.newton_prune) newton_filter(target, basis);
  if (basis.empty()) basis.push_back(Exponent(space_->size(), 0));
  std::vector<int> ids;
  SosHandle h{name, new_block(static_cast<int>(basis.size()), name, ids), basis};
  gram_equalities(target, basis, ids, equalities_);
  equality_names_.resize(equalities_.size(), name);
  handles_.push_back(h);
  return h;
}

SosHandle SosProgram::add_matrix_sos(const LinPolyMatrix& M, const std::string& name) {
  if (M.rows() != M.cols()) throw ShapeError("matrix SOS " + name + " needs a square matrix");
  const int r = M.rows();
  for (int i = 0; i < r; ++i) {
    for (int j = i + 1; j < r; ++j) {
      if (!(M(i, j) == M(j, i))) throw ShapeError("matrix SOS " + name + " needs a symmetric matrix");
    }
  }
  const auto& gy = space_->group("y");
  if (gy.dim < r) throw ShapeError("space has too few y variables for matrix SOS " + name);
  std::vector<int> ys;
  for (int k = 0; k < gy.dim; ++k) ys.push_back(gy.offset + k);

  LinPolynomial q(space_);
  int D = 0;
  for (int i = 0; i < r; ++i) {
    for (int j = i; j < r; ++j) {
      if (M(i, j).is_zero()) continue;
      D = std::max(D, M(i, j).degree());
      Exponent e(space_->size(), 0);
      e[gy.offset + i] += 1;
      e[gy.offset + j] += 1;
      auto yy = LinPolynomial::monomial(space_, e, AffineExpr(i == j ? 1.0 : 2.0));
      q += yy * M(i, j);
    }
  }
  if (D % 2) throw Error("matrix SOS constraint " + name + " has odd degree " + std::to_string(D));
  auto vars = appearing_vars(q, ys);
  auto half = poly::monomials_up_to(space_->size(), vars, D / 2);
  std::vector<Exponent> basis;
  for (int i = 0; i < r; ++i) {
    for (const auto& m : half) {
      Exponent e = m;
      e[gy.offset + i] = 1;
      basis.push_back(std::move(e));
    }
  }
  if (options_.newton_prune) newton_filter(q, basis);
  std::sort(basis.begin(), basis.end(), poly::GrlexLess{});
  std::vector<int> ids;
  SosHandle h{name, new_block(static_cast<int>(basis.size()), name, ids), basis};
  gram_equalities(q, basis, ids, equalities_);
  equality_names_.resize(equalities_.size(), name);
  handles_.push_back(h);
  return h;
}

void SosProgram::add_psd(const LinPolyMatrix& M, const std::string& name) {
  if (M.rows() != M.cols()) throw ShapeError("PSD constraint " + name + " needs a square matrix");
  if (!(M.max_degree() == 0)) throw Error("PSD constraint " + name + " must be constant in the state");
  SymMatrixVar W = new_psd(M.rows(), name);
  Exponent zero(space_->size(), 0);
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = i; j < M.cols(); ++j) {
      if (!(M(i, j) == M(j, i))) throw ShapeError("PSD constraint " + name + " needs a symmetric matrix");
      add_equality(W(i, j) - M(i, j).coefficient(zero), name);
    }
  }
}

void SosProgram::add_equality(const AffineExpr& e, const std::string& name) {
  equalities_.push_back(e);
  equality_names_.push_back(name);
}

void SosProgram::minimize(const AffineExpr& objective) { objective_ = objective; }

LinPolynomial SosProgram::product(const LinPolynomial& a, const LinPolynomial& b) const {
  try {
    return a * b;
  } catch (const BilinearError& e) {
    throw BilinearError(e.lhs(), e.rhs(),
                        "bilinear term: " + describe(e.lhs()) + " multiplied by " + describe(e.rhs()));
  }
}

std::string SosProgram::describe(int id) const {
  if (id < 0 || id >= num_vars()) return "unknown#" + std::to_string(id);
  return vars_[id].name;
}

SdpProblem SosProgram::compile() const {
  if (equalities_.empty() && block_sizes_.empty()) throw Error("empty SOS program");
  SdpProblem p;
  p.block_sizes = block_sizes_;
  p.num_free = num_free_;
  auto to_row = [&](const AffineExpr& e, std::vector<SdpEntry>& entries,
                    std::vector<std::pair<int, double>>& free) {
    for (const auto& [id, c] : e.terms()) {
      const auto& v = vars_[id];
      if (v.kind == DecisionVar::Kind::kBlockEntry) {
        entries.push_back({v.block, v.row, v.col, c});
      } else {
        free.emplace_back(v.free_index, c);
      }
    }
  };
  std::set<std::pair<std::vector<std::pair<int, double>>, double>> seen;
  for (const auto& e : equalities_) {
    if (e.is_constant() && std::abs(e.constant()) <= space_->prune_threshold()) continue;
    if (!seen.insert({e.terms(), e.constant()}).second) continue;
    SdpRow row;
    to_row(e, row.entries, row.free);
    row.rhs = -e.constant();
    p.rows.push_back(std::move(row));
  }
  to_row(objective_, p.objective, p.objective_free);
  p.objective_offset = objective_.constant();
  return p;
}

std::vector<double> SosProgram::values(const sdp::SdpSolution& s) const {
  std::vector<double> v(vars_.size(), 0.0);
  for (std::size_t id = 0; id < vars_.size(); ++id) {
    const auto& d = vars_[id];
    if (d.kind == DecisionVar::Kind::kBlockEntry) {
      if (d.block < static_cast<int>(s.X.size())) v[id] = s.X[d.block](d.row, d.col);
    } else if (d.free_index < s.f.size()) {
      v[id] = s.f[d.free_index];
    }
  }
  return v;
}

double SosProgram::value(const AffineExpr& e, const sdp::SdpSolution& s) const {
  return e.evaluate(values(s));
}

Eigen::MatrixXd SosProgram::value(const SymMatrixVar& m, const sdp::SdpSolution& s) const {
  auto v = values(s);
  Eigen::MatrixXd r(m.n, m.n);
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j < m.n; ++j) r(i, j) = m(i, j).evaluate(v);
  }
  return r;
}

poly::Polynomial SosProgram::value(const LinPolynomial& p, const sdp::SdpSolution& s) const {
  auto v = values(s);
  return p.map_coefficients([&](const AffineExpr& c) { return c.evaluate(v); });
}

poly::PolyMatrix SosProgram::value(const LinPolyMatrix& m, const sdp::SdpSolution& s) const {
  auto v = values(s);
  return m.map_entries(
      [&](const LinPolynomial& p) { return p.map_coefficients([&](const AffineExpr& c) { return c.evaluate(v); }); });
}

double SosProgram::gram_min_eig(const SosHandle& h, const sdp::SdpSolution& s) const {
  if (h.block < 0 || h.block >= static_cast<int>(s.X.size())) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.X[h.block], Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace tdsafe::sos
