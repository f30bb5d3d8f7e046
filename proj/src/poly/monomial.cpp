#include "tdsafe/poly/monomial.hpp"

#include <algorithm>

#include "tdsafe/common/error.hpp"

namespace tdsafe::poly {

Exponent add_exponents(const Exponent& a, const Exponent& b) {
  Exponent r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    int s = a[i] + b[i];
    if (s > 255) throw Error("monomial exponent overflow");
    r[i] = static_cast<std::uint8_t>(s);
  }
  return r;
}

namespace {

void enumerate(int space_size, const std::vector<int>& vars, std::size_t pos, int remaining,
               Exponent& cur, std::vector<Exponent>& out) {
  if (pos == vars.size()) {
    out.push_back(cur);
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    cur[vars[pos]] = static_cast<std::uint8_t>(k);
    enumerate(space_size, vars, pos + 1, remaining - k, cur, out);
  }
  cur[vars[pos]] = 0;
}

}  // namespace

std::vector<Exponent> monomials_up_to(int space_size, const std::vector<int>& vars,
                                      int max_degree, int min_degree) {
  if (max_degree < 0) return {};
  std::vector<Exponent> out;
  Exponent cur(space_size, 0);
  enumerate(space_size, vars, 0, max_degree, cur, out);
  std::erase_if(out, [&](const Exponent& e) { return total_degree(e) < min_degree; });
  std::sort(out.begin(), out.end(), GrlexLess{});
  return out;
}

}  // namespace tdsafe::poly
