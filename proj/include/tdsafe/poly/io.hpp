#pragma once

#include <string>
#include <string_view>

#include "tdsafe/poly/polynomial.hpp"

namespace tdsafe::poly {

// expr := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
// factor := base ('^' uint)? ; base := number | ident | '(' expr ')'.
// Unary minus and exponent notation in numbers are also accepted.
Polynomial parse(std::string_view text, const SpacePtr& space);

// Canonical text: descending graded-lex order, shortest round-trip numbers.
std::string to_string(const Polynomial& p);

std::string format_number(double v);

}  // namespace tdsafe::poly
