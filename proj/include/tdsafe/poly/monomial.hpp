#pragma once

#include <cstdint>
#include <vector>

namespace tdsafe::poly {

// Exponent vector over all variables of a space.
using Exponent = std::vector<std::uint8_t>;

inline int total_degree(const Exponent& e) {
  int d = 0;
  for (auto k : e) d += k;
  return d;
}

// Graded lexicographic order: lower total degree first, ties broken so that
// x1 > x2 > ... (the first differing exponent decides).
struct GrlexLess {
  bool operator()(const Exponent& a, const Exponent& b) const {
    int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  }
};

Exponent add_exponents(const Exponent& a, const Exponent& b);

// All exponents over `vars` (global indices) with total degree <= max_degree,
// in ascending graded-lex order. Size is C(k + d, d).
std::vector<Exponent> monomials_up_to(int space_size, const std::vector<int>& vars,
                                      int max_degree, int min_degree = 0);

}  // namespace tdsafe::poly
