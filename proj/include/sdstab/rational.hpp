#pragma once

#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

namespace sdstab {

/// Reduced fraction over int64 with a positive denominator. Arithmetic is checked:
/// operations that would overflow return std::nullopt so callers can fall back to floats.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n) {}  // NOLINT(google-explicit-constructor)

  static std::optional<Rational> make(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return normalize(num, den);
  }

  constexpr std::int64_t num() const { return num_; }
  constexpr std::int64_t den() const { return den_; }
  constexpr bool is_zero() const { return num_ == 0; }
  constexpr bool is_one() const { return num_ == 1 && den_ == 1; }
  constexpr bool is_integer() const { return den_ == 1; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend std::optional<Rational> operator+(const Rational& a, const Rational& b) {
    return normalize(static_cast<Wide>(a.num_) * b.den_ + static_cast<Wide>(b.num_) * a.den_,
                     static_cast<Wide>(a.den_) * b.den_);
  }
  friend std::optional<Rational> operator-(const Rational& a, const Rational& b) {
    return normalize(static_cast<Wide>(a.num_) * b.den_ - static_cast<Wide>(b.num_) * a.den_,
                     static_cast<Wide>(a.den_) * b.den_);
  }
  friend std::optional<Rational> operator*(const Rational& a, const Rational& b) {
    return normalize(static_cast<Wide>(a.num_) * b.num_, static_cast<Wide>(a.den_) * b.den_);
  }
  friend std::optional<Rational> operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) return std::nullopt;
    return normalize(static_cast<Wide>(a.num_) * b.den_, static_cast<Wide>(a.den_) * b.num_);
  }
  std::optional<Rational> negated() const {
    if (num_ == std::numeric_limits<std::int64_t>::min()) return std::nullopt;
    Rational r;
    r.num_ = -num_;
    r.den_ = den_;
    return r;
  }

  /// Integer power; negative exponents invert. nullopt on overflow or 0^negative.
  std::optional<Rational> pow(int exponent) const {
    Rational base = *this;
    if (exponent < 0) {
      auto inv = Rational(1) / base;
      if (!inv) return std::nullopt;
      base = *inv;
      exponent = -exponent;
    }
    Rational result(1);
    while (exponent > 0) {
      if (exponent & 1) {
        auto r = result * base;
        if (!r) return std::nullopt;
        result = *r;
      }
      exponent >>= 1;
      if (exponent > 0) {
        auto sq = base * base;
        if (!sq) return std::nullopt;
        base = *sq;
      }
    }
    return result;
  }

  friend bool operator==(const Rational& a, const Rational& b) = default;

 private:
  using Wide = __int128;

  static std::optional<Rational> normalize(Wide num, Wide den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
      num = -num;
      den = -den;
    }
    Wide a = num < 0 ? -num : num;
    Wide b = den;
    while (b != 0) {
      Wide t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      num /= a;
      den /= a;
    }
    constexpr Wide lo = std::numeric_limits<std::int64_t>::min() + 1;
    constexpr Wide hi = std::numeric_limits<std::int64_t>::max();
    if (num < lo || num > hi || den > hi) return std::nullopt;
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace sdstab
