#pragma once

// Recursive-descent parser for the expression grammar:
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-'|'+') factor | base ('^' integer)?
//   base   := number | 'x' integer | '(' expr ')' | func '(' expr ')'
//   func   := 'sin' | 'cos' | 'exp' | 'ln'
//
// Decimal literals are stored as exact rationals whenever they fit; "3/4" folds to the
// exact rational 3/4 during simplification. The exponent may be signed and parenthesized.

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>

#include "sdstab/errors.hpp"
#include "sdstab/expr.hpp"

namespace sdstab {

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, 0, pos_ + 1); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = Expr::binary(Op::Add, lhs, term());
      else if (accept('-'))
        lhs = Expr::binary(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(Op::Mul, lhs, factor());
      } else if (peek() == '/') {
        std::size_t at = pos_;
        ++pos_;
        Expr rhs = factor();
        if (rhs.is_zero()) {
          pos_ = at;
          fail("division by literal zero");
        }
        lhs = Expr::binary(Op::Div, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    if (accept('-')) return Expr::unary(Op::Neg, factor());
    if (accept('+')) return factor();
    Expr b = base();
    if (accept('^')) {
      bool paren = accept('(');
      int sign = 1;
      if (accept('-'))
        sign = -1;
      else
        accept('+');
      skip_ws();
      long n = integer("integer exponent");
      if (paren) expect(')');
      b = Expr::power(b, static_cast<int>(sign * n));
    }
    return b;
  }

  long integer(const char* what) {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail(std::string("expected ") + what);
    if (pos_ - start > 9) {
      pos_ = start;
      fail(std::string(what) + " too large");
    }
    return std::stol(std::string(text_.substr(start, pos_ - start)));
  }

  Expr base() {
    char c = peek();
    if (c == '\0') fail("unexpected end of input");
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      std::string_view word = text_.substr(start, pos_ - start);
      if (word == "x" && pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        long idx = integer("variable index");
        if (idx < 1 || idx > dim_) {
          pos_ = start;
          fail("variable index out of range: x" + std::to_string(idx) + " with dimension " +
               std::to_string(dim_));
        }
        return Expr::variable(static_cast<int>(idx));
      }
      Op op;
      if (word == "sin")
        op = Op::Sin;
      else if (word == "cos")
        op = Op::Cos;
      else if (word == "exp")
        op = Op::Exp;
      else if (word == "ln")
        op = Op::Ln;
      else {
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::string ident(text_.substr(start, pos_ - start));
        pos_ = start;
        fail("unknown identifier '" + ident + "'");
      }
      expect('(');
      Expr arg = expr();
      expect(')');
      return Expr::unary(op, arg);
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    std::string digits;
    std::int64_t scale = 0;
    bool seen_dot = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits += c;
        if (seen_dot) ++scale;
      } else if (c == '.' && !seen_dot) {
        seen_dot = true;
      } else {
        break;
      }
      ++pos_;
    }
    if (digits.empty()) fail("malformed number");
    std::int64_t exp10 = 0;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      int sign = 1;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) sign = text_[pos_++] == '-' ? -1 : 1;
      if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        pos_ = save;
        fail("malformed exponent in number");
      }
      exp10 = sign * integer("exponent");
    }
    std::string literal(text_.substr(start, pos_ - start));
    // Exact when the significand and power of ten fit in int64.
    std::size_t first = digits.find_first_not_of('0');
    std::string sig = first == std::string::npos ? "0" : digits.substr(first);
    std::int64_t p = exp10 - scale;
    if (sig.size() <= 18 && p > -19 && p < 19) {
      std::int64_t m = std::stoll(sig);
      std::int64_t ten = 1;
      for (std::int64_t i = 0; i < (p < 0 ? -p : p); ++i) ten *= 10;
      std::optional<Rational> q = p >= 0 ? (Rational(m) * Rational(ten)) : Rational::make(m, ten);
      if (q) return Expr(Number(*q));
    }
    return Expr(Number::real(std::strtod(literal.c_str(), nullptr)));
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `text` into an expression over x1..x{dim}. Throws ParseError with a 1-based column.
inline Expr parse(std::string_view text, int dim) {
  if (dim < 1) throw DimensionError("dimension must be positive");
  return detail::ExprParser(text, dim).parse();
}

}  // namespace sdstab
