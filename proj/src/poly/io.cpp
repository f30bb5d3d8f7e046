#include "tdsafe/poly/io.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace tdsafe::poly {

namespace {

class Parser {
 public:
  Parser(std::string_view text, const SpacePtr& space) : s_(text), space_(space) {}

  Polynomial run() {
    Polynomial p = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial p = term();
    for (;;) {
      if (accept('+')) {
        p += term();
      } else if (accept('-')) {
        p -= term();
      } else {
        return p;
      }
    }
  }

  Polynomial term() {
    Polynomial p = factor();
    while (accept('*')) p = p * factor();
    return p;
  }

  Polynomial factor() {
    if (accept('-')) return -factor();
    if (accept('+')) return factor();
    Polynomial b = base();
    if (accept('^')) {
      skip();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("exponent must be a non-negative integer literal");
      if (pos_ < s_.size() && (s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E')) {
        pos_ = start;
        fail("exponent must be a non-negative integer literal");
      }
      int k = 0;
      auto res = std::from_chars(s_.data() + start, s_.data() + pos_, k);
      if (res.ec != std::errc() || k > 255) {
        pos_ = start;
        fail("exponent out of range");
      }
      b = b.pow(k);
    }
    return b;
  }

  Polynomial base() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      if (!accept(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return ident();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Polynomial number() {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      std::size_t exp_start = pos_;
      digits();
      if (exp_start == pos_) pos_ = save;
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Polynomial::constant(space_, v);
  }

  Polynomial ident() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    std::size_t num_start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (num_start == pos_) {
      pos_ = start;
      fail("unknown variable '" + name + "'");
    }
    int k = 0;
    std::from_chars(s_.data() + num_start, s_.data() + pos_, k);
    const auto* g = space_->find(name);
    if (!g || k < 1 || k > g->dim) {
      std::string full(s_.substr(start, pos_ - start));
      pos_ = start;
      fail("unknown variable '" + full + "'");
    }
    return Polynomial::variable(space_, g->offset + k - 1);
  }

  std::string_view s_;
  const SpacePtr& space_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse(std::string_view text, const SpacePtr& space) { return Parser(text, space).run(); }

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  const auto& sp = *p.space();
  std::string out;
  bool first = true;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [e, c] = *it;
    double mag = c;
    if (first) {
      if (c < 0) {
        out += "-";
        mag = -c;
      }
    } else {
      out += c < 0 ? " - " : " + ";
      if (c < 0) mag = -c;
    }
    first = false;
    std::string mono;
    for (int i = 0; i < sp.size(); ++i) {
      if (e[i] == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += sp.name_of(i);
      if (e[i] > 1) mono += "^" + std::to_string(e[i]);
    }
    if (mono.empty()) {
      out += format_number(mag);
    } else if (mag == 1.0) {
      out += mono;
    } else {
      out += format_number(mag) + "*" + mono;
    }
  }
  return out;
}

}  // namespace tdsafe::poly
