#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace cewa {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), safe for -inf arguments.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Two-pass log-sum-exp over a span of log-values.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(std::span<const double>(v));
}

// log of binomial coefficient C(n, k).
inline double log_choose(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return kNegInf;
  if (k == 0 || k == n) return 0.0;
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
         std::lgamma(double(n - k) + 1.0);
}

// Signed number kept as (sign, log|x|). Exact zero has sign 0.
// Used where alternating combinatorial sums would overflow doubles.
struct SignedLog {
  int sign = 0;       // -1, 0, +1
  double lmag = kNegInf;

  static SignedLog zero() { return {}; }
  static SignedLog one() { return {1, 0.0}; }
  static SignedLog from_log(double lx) { return {lx == kNegInf ? 0 : 1, lx}; }
  static SignedLog from_double(double x) {
    if (x == 0.0) return {};
    return {x > 0 ? 1 : -1, std::log(std::abs(x))};
  }

  bool is_zero() const { return sign == 0; }
  double to_double() const { return sign == 0 ? 0.0 : sign * std::exp(lmag); }

  SignedLog operator*(const SignedLog& o) const {
    if (sign == 0 || o.sign == 0) return {};
    return {sign * o.sign, lmag + o.lmag};
  }

  SignedLog operator-() const { return {-sign, lmag}; }

  SignedLog operator+(const SignedLog& o) const {
    if (sign == 0) return o;
    if (o.sign == 0) return *this;
    if (sign == o.sign) return {sign, log_add_exp(lmag, o.lmag)};
    // Opposite signs: subtract magnitudes.
    if (lmag == o.lmag) return {};
    const SignedLog& big = lmag > o.lmag ? *this : o;
    const SignedLog& small = lmag > o.lmag ? o : *this;
    double d = small.lmag - big.lmag;  // <= 0
    double r = std::log1p(-std::exp(d));
    return {big.sign, big.lmag + r};
  }

  SignedLog& operator+=(const SignedLog& o) { return *this = *this + o; }
};

// Streaming sum of signed exp(lmag) terms under a common shift.
// Accumulates in double after shifting by the running max; callers that
// expect a nonnegative result can clamp tiny negative residue to zero.
class SignedExpSum {
 public:
  void add(int sign, double lmag) {
    if (sign == 0 || lmag == kNegInf) return;
    if (lmag > shift_) {
      double f = std::exp(shift_ - lmag);
      pos_ *= f;
      neg_ *= f;
      shift_ = lmag;
    }
    double t = std::exp(lmag - shift_);
    if (sign > 0) pos_ += t; else neg_ += t;
  }
  void add(const SignedLog& x) { add(x.sign, x.lmag); }

  bool empty() const { return shift_ == kNegInf; }
  // Value relative to exp(shift). Negative residue below tol is noise.
  double scaled_value() const { return pos_ - neg_; }
  double scaled_total() const { return pos_ + neg_; }
  double shift() const { return shift_; }

  // Nonnegative value as (sign=+, log), clamping cancellation noise.
  double log_value_clamped(double rel_tol = 1e-9) const {
    double v = pos_ - neg_;
    if (v <= 0.0) {
      if (v < -rel_tol * (pos_ + neg_))
        throw std::runtime_error("SignedExpSum: significantly negative total");
      return kNegInf;
    }
    return shift_ + std::log(v);
  }

 private:
  double shift_ = kNegInf;
  double pos_ = 0.0;
  double neg_ = 0.0;
};

}  // namespace cewa
