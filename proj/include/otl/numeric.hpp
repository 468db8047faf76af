#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace otl {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2PiE = 2.8378770664093453;  // log(2*pi*e)

// exp(x) underflows to zero below this, so such terms cannot change a log-sum-exp.
inline constexpr double kLogUnderflow = -746.0;

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// log(sum(exp(v))); -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double hi = kNegInf;
  for (double x : v) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  if (hi == std::numeric_limits<double>::infinity()) return hi;
  double acc = 0.0;
  for (double x : v) {
    const double d = x - hi;
    if (d > kLogUnderflow) acc += std::exp(d);
  }
  return hi + std::log(acc);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) { return -softplus(-x); }

inline double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace otl
