#include "tdsafe/sos/affine.hpp"

#include "tdsafe/common/error.hpp"

namespace tdsafe::sos {

namespace {

void merge(std::vector<std::pair<int, double>>& into, const std::vector<std::pair<int, double>>& from,
           double sign) {
  if (from.empty()) return;
  if (into.empty()) {
    into = from;
    if (sign != 1.0) {
      for (auto& t : into) t.second *= sign;
    }
    return;
  }
  // Fast path: single new term.
  if (from.size() == 1) {
    auto it = std::lower_bound(into.begin(), into.end(), from[0].first,
                               [](const auto& t, int id) { return t.first < id; });
    if (it != into.end() && it->first == from[0].first) {
      it->second += sign * from[0].second;
      if (it->second == 0.0) into.erase(it);
    } else {
      into.insert(it, {from[0].first, sign * from[0].second});
    }
    return;
  }
  std::vector<std::pair<int, double>> out;
  out.reserve(into.size() + from.size());
  std::size_t i = 0, j = 0;
  while (i < into.size() || j < from.size()) {
    if (j == from.size() || (i < into.size() && into[i].first < from[j].first)) {
      out.push_back(into[i++]);
    } else if (i == into.size() || from[j].first < into[i].first) {
      out.emplace_back(from[j].first, sign * from[j].second);
      ++j;
    } else {
      double v = into[i].second + sign * from[j].second;
      if (v != 0.0) out.emplace_back(into[i].first, v);
      ++i;
      ++j;
    }
  }
  into = std::move(out);
}

}  // namespace

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  constant_ += o.constant_;
  merge(terms_, o.terms_, 1.0);
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) {
  constant_ -= o.constant_;
  merge(terms_, o.terms_, -1.0);
  return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  if (s == 0.0) {
    terms_.clear();
  } else {
    for (auto& t : terms_) t.second *= s;
  }
  return *this;
}

AffineExpr operator*(const AffineExpr& a, const AffineExpr& b) {
  if (!a.is_constant() && !b.is_constant()) {
    int l = a.terms_.front().first, r = b.terms_.front().first;
    throw BilinearError(l, r, "product of two unknowns (ids " + std::to_string(l) + " and " +
                                  std::to_string(r) + ") is not affine");
  }
  if (a.is_constant()) return b * a.constant_;
  return a * b.constant_;
}

double AffineExpr::evaluate(std::span<const double> values) const {
  double v = constant_;
  for (const auto& [id, c] : terms_) v += c * values[id];
  return v;
}

void AffineExpr::prune(double tol) {
  std::erase_if(terms_, [tol](const auto& t) { return std::abs(t.second) <= tol; });
  if (std::abs(constant_) <= tol) constant_ = 0.0;
}

}  // namespace tdsafe::sos
