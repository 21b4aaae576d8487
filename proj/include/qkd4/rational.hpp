#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qkd4 {

/// Exact rational on int64. All probabilities in the protocol enumerations
/// are dyadic (cos^2 of multiples of 45 degrees and uniform basis weights),
/// so denominators stay tiny; gcd reduction after every operation keeps the
/// representation canonical (den > 0, gcd(num, den) = 1).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n) : num(n), den(1) {}
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { reduce(); }

  void reduce() {
    if (den == 0) throw std::domain_error("Rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  std::string str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    // cross-reduce before multiplying to keep intermediates small
    const std::int64_t g1 = std::gcd(a.num < 0 ? -a.num : a.num, b.den);
    const std::int64_t g2 = std::gcd(b.num < 0 ? -b.num : b.num, a.den);
    return Rational((a.num / g1) * (b.num / g2), (a.den / g2) * (b.den / g1));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw std::domain_error("Rational: division by zero");
    return a * Rational(b.den, b.num);
  }

  Rational& operator+=(const Rational& r) { return *this = *this + r; }
  Rational& operator-=(const Rational& r) { return *this = *this - r; }
  Rational& operator*=(const Rational& r) { return *this = *this * r; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return a.num * b.den < b.num * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) { return a == b || a < b; }
  friend bool operator>=(const Rational& a, const Rational& b) { return b <= a; }

  /// Recover the exact rational a double was produced from, if one with a
  /// small denominator exists (continued-fraction expansion). Used to accept
  /// config weights like 0.25 into exact arithmetic.
  static Rational from_double_exact(double x, std::int64_t max_den = 1 << 20) {
    if (!std::isfinite(x)) throw std::domain_error("Rational: non-finite value");
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double v = x;
    for (int iter = 0; iter < 64; ++iter) {
      const double fl = std::floor(v);
      if (fl > 9.2e18 || fl < -9.2e18) break;
      const std::int64_t a = static_cast<std::int64_t>(fl);
      const std::int64_t p2 = a * p1 + p0;
      const std::int64_t q2 = a * q1 + q0;
      if (q2 > max_den) break;
      p0 = p1; q0 = q1; p1 = p2; q1 = q2;
      const Rational cand(p1, q1);
      if (std::abs(cand.to_double() - x) < 1e-12) return cand;
      const double frac = v - fl;
      if (frac < 1e-15) break;
      v = 1.0 / frac;
    }
    throw std::domain_error("Rational: value is not a small exact rational");
  }
};

} // namespace qkd4
