#pragma once

// Reference computations that share no code with the library's grid engine.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "otl/family.hpp"
#include "otl/prior.hpp"

namespace oracle {

// Beta(a, b) moments.
inline double beta_mean(double a, double b) { return a / (a + b); }
inline double beta_variance(double a, double b) { return a * b / ((a + b) * (a + b) * (a + b + 1.0)); }

inline double bernoulli_kl(double p, double q) {
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

// Central second differences of f at x with step h.
inline Eigen::MatrixXd finite_difference_hessian(const std::function<double(const std::vector<double>&)>& f,
                                                 std::vector<double> x, double h) {
  const std::size_t d = x.size();
  Eigen::MatrixXd H(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      auto at = [&](double da, double db) {
        std::vector<double> p = x;
        p[a] += da;
        p[b] += db;
        return f(p);
      };
      H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    }
  }
  return H;
}

// Nodes of a midpoint grid on a 1-d interval.
inline std::vector<double> midpoints(double lo, double hi, std::size_t g) {
  std::vector<double> v(g);
  for (std::size_t i = 0; i < g; ++i) v[i] = lo + (static_cast<double>(i) + 0.5) * (hi - lo) / static_cast<double>(g);
  return v;
}

// Brute-force induced prior on a 2-d grid: for every target node, a direct
// double sum over every source node of w(t | s) q(s), in linear space, then
// normalized. O(G^4) for G points per axis.
inline std::vector<double> induced_prior_2d(const otl::ConditionalSpec& cond, const std::vector<double>& source_density,
                                            double lo, double hi, std::size_t g) {
  const auto ax = midpoints(lo, hi, g);
  const double cell = (hi - lo) / static_cast<double>(g);
  std::vector<double> out(g * g, 0.0);
  for (std::size_t t0 = 0; t0 < g; ++t0)
    for (std::size_t t1 = 0; t1 < g; ++t1) {
      double acc = 0.0;
      for (std::size_t s0 = 0; s0 < g; ++s0)
        for (std::size_t s1 = 0; s1 < g; ++s1) {
          const double q = source_density[s0 * g + s1];
          if (q == 0.0) continue;
          const std::vector<double> t{ax[t0], ax[t1]};
          const std::vector<double> s{ax[s0], ax[s1]};
          std::vector<double> tt = t;
          for (std::size_t a = 0; a < cond.shared; ++a) tt[a] = s[a];
          if (tt != t) continue;  // shared coordinates must agree
          double w = 1.0;
          for (std::size_t a = cond.shared; a < 2; ++a) {
            w *= std::exp(otl::conditional_axis_log_density(cond, a, t[a], s[a]));
          }
          acc += w * q * std::pow(cell, static_cast<double>(2 - cond.shared));
        }
      out[t0 * g + t1] = acc;
    }
  double mass = 0.0;
  for (double v : out) mass += v * cell * cell;
  for (double& v : out) v /= mass;
  return out;
}

}  // namespace oracle
