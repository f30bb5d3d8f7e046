#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdsafe/common/error.hpp"
#include "tdsafe/poly/monomial.hpp"
#include "tdsafe/poly/var_space.hpp"

namespace tdsafe::poly {

// Arithmetic a coefficient type must provide. Specialised for double here and
// for affine expressions of decision variables in the sos module.
template <class C>
struct CoeffOps;

template <>
struct CoeffOps<double> {
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static bool negligible(double c, double tol) { return std::abs(c) <= tol; }
  static void prune(double&, double) {}
  static double mul(double a, double b) { return a * b; }
  static double scale(double a, double s) { return a * s; }
};

template <class C>
class BasicPolynomial {
 public:
  using Coeff = C;
  using Ops = CoeffOps<C>;
  using TermMap = std::map<Exponent, C, GrlexLess>;

  explicit BasicPolynomial(SpacePtr space) : space_(std::move(space)) {
    if (!space_) throw Error("polynomial needs a variable space");
  }

  static BasicPolynomial constant(SpacePtr space, const C& c) {
    BasicPolynomial p(std::move(space));
    p.add_term(Exponent(p.space_->size(), 0), c);
    return p;
  }

  static BasicPolynomial variable(SpacePtr space, int index) {
    BasicPolynomial p(std::move(space));
    if (index < 0 || index >= p.space_->size()) throw Error("variable index out of range");
    Exponent e(p.space_->size(), 0);
    e[index] = 1;
    p.add_term(e, Ops::one());
    return p;
  }

  static BasicPolynomial monomial(SpacePtr space, const Exponent& e, const C& c) {
    BasicPolynomial p(std::move(space));
    p.add_term(e, c);
    return p;
  }

  const SpacePtr& space() const noexcept { return space_; }
  const TermMap& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  std::size_t size() const noexcept { return terms_.size(); }

  // The zero polynomial has degree 0.
  int degree() const {
    return terms_.empty() ? 0 : total_degree(terms_.rbegin()->first);
  }

  // Largest total degree counted over the given global variable indices.
  int degree_in(const std::vector<int>& vars) const {
    int best = 0;
    for (const auto& [e, c] : terms_) {
      int d = 0;
      for (int v : vars) d += e[v];
      best = std::max(best, d);
    }
    return best;
  }

  int degree_in_group(const std::string& group) const {
    const auto& g = space_->group(group);
    std::vector<int> vars;
    for (int k = 0; k < g.dim; ++k) vars.push_back(g.offset + k);
    return degree_in(vars);
  }

  C coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Ops::zero() : it->second;
  }

  void add_term(const Exponent& e, const C& c) {
    if (static_cast<int>(e.size()) != space_->size()) throw Error("exponent length mismatch");
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) it->second += c;
    Ops::prune(it->second, space_->prune_threshold());
    if (Ops::negligible(it->second, space_->prune_threshold())) terms_.erase(it);
  }

  BasicPolynomial& operator+=(const BasicPolynomial& o) {
    check_space(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }

  BasicPolynomial& operator-=(const BasicPolynomial& o) {
    check_space(o);
    for (const auto& [e, c] : o.terms_) add_term(e, Ops::scale(c, -1.0));
    return *this;
  }

  BasicPolynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second = Ops::scale(it->second, s);
      Ops::prune(it->second, space_->prune_threshold());
      if (Ops::negligible(it->second, space_->prune_threshold())) {
        it = terms_.erase(it);
      } else {
        ++it;
      }
    }
    return *this;
  }

  friend BasicPolynomial operator+(BasicPolynomial a, const BasicPolynomial& b) { return a += b; }
  friend BasicPolynomial operator-(BasicPolynomial a, const BasicPolynomial& b) { return a -= b; }
  friend BasicPolynomial operator-(BasicPolynomial a) { return a *= -1.0; }
  friend BasicPolynomial operator*(BasicPolynomial a, double s) { return a *= s; }
  friend BasicPolynomial operator*(double s, BasicPolynomial a) { return a *= s; }

  friend BasicPolynomial operator*(const BasicPolynomial& a, const BasicPolynomial& b) {
    a.check_space(b);
    BasicPolynomial r(a.space_);
    std::map<Exponent, C, GrlexLess> acc;
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        Exponent e = add_exponents(ea, eb);
        C prod = Ops::mul(ca, cb);
        auto [it, inserted] = acc.try_emplace(std::move(e), prod);
        if (!inserted) it->second += prod;
      }
    }
    for (auto& [e, c] : acc) {
      Ops::prune(c, a.space_->prune_threshold());
      if (!Ops::negligible(c, a.space_->prune_threshold())) r.terms_.emplace(e, std::move(c));
    }
    return r;
  }

  BasicPolynomial& operator*=(const BasicPolynomial& o) { return *this = *this * o; }

  BasicPolynomial pow(int k) const {
    if (k < 0) throw Error("negative polynomial power");
    BasicPolynomial r = constant(space_, Ops::one());
    for (int i = 0; i < k; ++i) r *= *this;
    return r;
  }

  // Coefficient-wise map into another coefficient type.
  template <class F>
  auto map_coefficients(F&& f) const {
    using D = std::decay_t<decltype(f(std::declval<const C&>()))>;
    BasicPolynomial<D> r(space_);
    for (const auto& [e, c] : terms_) r.add_term(e, f(c));
    return r;
  }

  bool operator==(const BasicPolynomial& o) const {
    return same_space(space_, o.space_) && terms_ == o.terms_;
  }

  void check_space(const BasicPolynomial& o) const {
    if (!same_space(space_, o.space_)) throw SpaceMismatch("polynomials from different variable spaces");
  }

 private:
  template <class>
  friend class BasicPolynomial;

  SpacePtr space_;
  TermMap terms_;
};

using Polynomial = BasicPolynomial<double>;

// Evaluate a numeric polynomial at a full-length point.
double evaluate(const Polynomial& p, std::span<const double> point);

// Lift a numeric polynomial to another coefficient type.
template <class C>
BasicPolynomial<C> lift(const Polynomial& p) {
  return p.map_coefficients([](double c) { return C(c); });
}

// Move a polynomial into another space by group name. Every group used by
// `p` must exist in `to` with at least the same dimension.
template <class C>
BasicPolynomial<C> embed(const BasicPolynomial<C>& p, const SpacePtr& to) {
  const auto& from = *p.space();
  std::vector<int> map(from.size(), -1);
  for (const auto& g : from.groups()) {
    const auto* tg = to->find(g.name);
    for (int k = 0; k < g.dim; ++k) {
      if (tg && k < tg->dim) map[g.offset + k] = tg->offset + k;
    }
  }
  BasicPolynomial<C> r(to);
  for (const auto& [e, c] : p.terms()) {
    Exponent ne(to->size(), 0);
    for (int i = 0; i < from.size(); ++i) {
      if (e[i] == 0) continue;
      if (map[i] < 0) throw SpaceMismatch("variable " + from.name_of(i) + " missing in target space");
      ne[map[i]] = e[i];
    }
    r.add_term(ne, c);
  }
  return r;
}

// Rename variable groups inside one space, e.g. x -> xh. Groups must have
// equal dimension.
template <class C>
BasicPolynomial<C> rename_groups(const BasicPolynomial<C>& p,
                                 const std::vector<std::pair<std::string, std::string>>& renames) {
  const auto& sp = *p.space();
  std::vector<int> map(sp.size());
  for (int i = 0; i < sp.size(); ++i) map[i] = i;
  for (const auto& [a, b] : renames) {
    const auto& ga = sp.group(a);
    const auto& gb = sp.group(b);
    if (ga.dim != gb.dim) throw ShapeError("cannot rename " + a + " to " + b + ": dimensions differ");
    for (int k = 0; k < ga.dim; ++k) map[ga.offset + k] = gb.offset + k;
  }
  BasicPolynomial<C> r(p.space());
  for (const auto& [e, c] : p.terms()) {
    Exponent ne(sp.size(), 0);
    for (int i = 0; i < sp.size(); ++i) {
      int s = ne[map[i]] + e[i];
      if (s > 255) throw Error("monomial exponent overflow");
      ne[map[i]] = static_cast<std::uint8_t>(s);
    }
    r.add_term(ne, c);
  }
  return r;
}

// Simultaneous substitution: bindings[v] (if non-empty) replaces variable v.
// Unbound variables are kept. Bindings must live in the polynomial's space.
template <class C>
BasicPolynomial<C> substitute(const BasicPolynomial<C>& p,
                              const std::vector<const Polynomial*>& bindings) {
  const auto& sp = p.space();
  if (static_cast<int>(bindings.size()) != sp->size()) throw ShapeError("binding table size mismatch");
  std::vector<int> max_pow(sp->size(), 0);
  for (const auto& [e, c] : p.terms()) {
    for (int i = 0; i < sp->size(); ++i) max_pow[i] = std::max<int>(max_pow[i], e[i]);
  }
  // powers[v][k] = bindings[v]^k
  std::vector<std::vector<Polynomial>> powers(sp->size());
  for (int v = 0; v < sp->size(); ++v) {
    if (!bindings[v] || max_pow[v] == 0) continue;
    if (!same_space(bindings[v]->space(), sp)) throw SpaceMismatch("binding from a different space");
    powers[v].push_back(Polynomial::constant(sp, 1.0));
    for (int k = 1; k <= max_pow[v]; ++k) powers[v].push_back(powers[v].back() * *bindings[v]);
  }
  BasicPolynomial<C> r(sp);
  for (const auto& [e, c] : p.terms()) {
    Exponent kept(sp->size(), 0);
    Polynomial factor = Polynomial::constant(sp, 1.0);
    for (int v = 0; v < sp->size(); ++v) {
      if (e[v] == 0) continue;
      if (bindings[v]) {
        factor = factor * powers[v][e[v]];
      } else {
        kept[v] = e[v];
      }
    }
    for (const auto& [fe, fc] : factor.terms()) {
      r.add_term(add_exponents(kept, fe), CoeffOps<C>::scale(c, fc));
    }
  }
  return r;
}

// E_w[p] for w ~ N(0, I) over the variables of `group`:
// E[prod w_i^k_i] = prod (k_i - 1)!! when every k_i is even, else 0.
template <class C>
BasicPolynomial<C> gaussian_expectation(const BasicPolynomial<C>& p, const std::string& group = "w") {
  const auto& g = p.space()->group(group);
  BasicPolynomial<C> r(p.space());
  for (const auto& [e, c] : p.terms()) {
    double m = 1.0;
    bool odd = false;
    Exponent ne = e;
    for (int k = 0; k < g.dim; ++k) {
      int power = e[g.offset + k];
      if (power % 2) {
        odd = true;
        break;
      }
      for (int j = power - 1; j > 1; j -= 2) m *= j;
      ne[g.offset + k] = 0;
    }
    if (odd) continue;
    r.add_term(ne, CoeffOps<C>::scale(c, m));
  }
  return r;
}

// Global indices of the listed groups, in space order.
std::vector<int> group_indices(const VarSpace& space, const std::vector<std::string>& groups);

}  // namespace tdsafe::poly
