#pragma once

// Joint prior w(theta_s, theta_t) = w(theta_s) * w(theta_t | theta_s), the
// source-free prior as a conditional that ignores theta_s, and properness checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/numeric.hpp"

namespace otl {

enum class MarginalKind { UniformBox, Gaussian };

// Source marginal w(theta_s). The Gaussian variant has a diagonal covariance
// and is truncated to (and renormalized over) its box.
struct MarginalSpec {
  MarginalKind kind = MarginalKind::UniformBox;
  Box box;
  std::vector<double> mean;
  std::vector<double> sd;
};

enum class ConditionalKind { GaussianAround, HardWindow, IndependentUniform };

// w(theta_t | theta_s) over the parameter box. The first `shared` coordinates
// of theta_t equal those of theta_s (a point mass); the density is over the rest.
//   GaussianAround: N(theta_s, c^2 I), not truncated to the box.
//   HardWindow: uniform on {||theta_t - theta_s||_inf <= delta} intersected with the box.
//   IndependentUniform: uniform on the box regardless of theta_s.
struct ConditionalSpec {
  ConditionalKind kind = ConditionalKind::IndependentUniform;
  Box box;
  double c = 0.1;
  double delta = 0.1;
  std::size_t shared = 0;

  bool depends_on_source() const { return kind != ConditionalKind::IndependentUniform || shared > 0; }
};

// Relative slack used when testing the closed window |t - s| <= delta.
inline constexpr double kWindowSlack = 1e-12;

// Per-axis log density of a non-shared coordinate.
inline double conditional_axis_log_density(const ConditionalSpec& spec, std::size_t axis, double t, double s) {
  const double lo = spec.box.lo[axis];
  const double hi = spec.box.hi[axis];
  switch (spec.kind) {
    case ConditionalKind::GaussianAround:
      return log_normal_pdf(t, s, spec.c);
    case ConditionalKind::HardWindow: {
      if (t < lo || t > hi) return kNegInf;
      if (std::abs(t - s) > spec.delta * (1.0 + kWindowSlack)) return kNegInf;
      const double len = std::min(s + spec.delta, hi) - std::max(s - spec.delta, lo);
      return len > 0.0 ? -std::log(len) : kNegInf;
    }
    case ConditionalKind::IndependentUniform:
      return (t < lo || t > hi) ? kNegInf : -std::log(hi - lo);
  }
  return kNegInf;
}

struct PriorSpec {
  MarginalSpec marginal;
  ConditionalSpec conditional;

  std::size_t dim() const { return conditional.box.dim(); }
  const Box& box() const { return conditional.box; }
  bool depends_on_source() const { return conditional.depends_on_source(); }

  static PriorSpec uniform_gaussian_around(const Box& box, double c, std::size_t shared = 0) {
    if (!(c > 0.0)) throw PreconditionError("prior: c must be positive");
    return make(box, ConditionalSpec{ConditionalKind::GaussianAround, box, c, 0.0, shared});
  }

  static PriorSpec uniform_hard_window(const Box& box, double delta, std::size_t shared = 0) {
    if (!(delta > 0.0)) throw PreconditionError("prior: delta must be positive");
    return make(box, ConditionalSpec{ConditionalKind::HardWindow, box, 0.0, delta, shared});
  }

  // The source-free prior: uniform over the box, theta_s ignored.
  static PriorSpec source_free_uniform(const Box& box) {
    return make(box, ConditionalSpec{ConditionalKind::IndependentUniform, box, 0.0, 0.0, 0});
  }

  PriorSpec with_gaussian_marginal(std::vector<double> mean, std::vector<double> sd) const {
    if (mean.size() != dim() || sd.size() != dim()) throw PreconditionError("prior: marginal shape mismatch");
    for (double s : sd) {
      if (!(s > 0.0)) throw PreconditionError("prior: marginal sd must be positive");
    }
    PriorSpec p = *this;
    p.marginal.kind = MarginalKind::Gaussian;
    p.marginal.mean = std::move(mean);
    p.marginal.sd = std::move(sd);
    return p;
  }

  PriorSpec with_marginal_box(Box b) const {
    b.validate();
    PriorSpec p = *this;
    p.marginal.box = std::move(b);
    return p;
  }

 private:
  static PriorSpec make(const Box& box, ConditionalSpec cond) {
    box.validate();
    if (cond.shared > box.dim()) throw PreconditionError("prior: shared count exceeds dimension");
    PriorSpec p;
    p.marginal = MarginalSpec{MarginalKind::UniformBox, box, {}, {}};
    p.conditional = std::move(cond);
    return p;
  }
};

// log w(theta_s); -inf off the support.
inline double marginal_log_density(const PriorSpec& prior, std::span<const double> theta_s) {
  const MarginalSpec& m = prior.marginal;
  if (!m.box.contains(theta_s)) return kNegInf;
  switch (m.kind) {
    case MarginalKind::UniformBox:
      return -std::log(m.box.volume());
    case MarginalKind::Gaussian: {
      double acc = 0.0;
      for (std::size_t a = 0; a < m.box.dim(); ++a) {
        const double mass =
            normal_cdf((m.box.hi[a] - m.mean[a]) / m.sd[a]) - normal_cdf((m.box.lo[a] - m.mean[a]) / m.sd[a]);
        acc += log_normal_pdf(theta_s[a], m.mean[a], m.sd[a]) - std::log(mass);
      }
      return acc;
    }
  }
  return kNegInf;
}

inline double marginal_log_density(const PriorSpec& prior, const ParamPoint& theta_s) {
  return marginal_log_density(prior, theta_s.view());
}

// log w(theta_t | theta_s), a density over the non-shared coordinates;
// -inf when the shared coordinates differ.
inline double conditional_log_density(const ConditionalSpec& spec, std::span<const double> theta_t,
                                      std::span<const double> theta_s) {
  if (theta_t.size() != spec.box.dim() || theta_s.size() != spec.box.dim()) {
    throw PreconditionError("conditional_log_density: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t a = 0; a < theta_t.size(); ++a) {
    if (a < spec.shared) {
      if (theta_t[a] != theta_s[a]) return kNegInf;
      continue;
    }
    acc += conditional_axis_log_density(spec, a, theta_t[a], theta_s[a]);
    if (acc == kNegInf) return kNegInf;
  }
  return acc;
}

inline double conditional_log_density(const PriorSpec& prior, const ParamPoint& theta_t, const ParamPoint& theta_s) {
  return conditional_log_density(prior.conditional, theta_t.view(), theta_s.view());
}

struct PropernessReport {
  bool marginal_proper = true;
  bool conditional_proper = true;
  std::optional<ParamPoint> marginal_witness;
  // Failing (theta_s, theta_t) pair closest to the true parameters.
  std::optional<ParamPoint> witness_s;
  std::optional<ParamPoint> witness_t;
  double delta_s = 0.0;
  double delta_t = 0.0;
  bool clipped = false;  // a neighborhood reached past the parameter box and was cut to it

  bool proper() const { return marginal_proper && conditional_proper; }
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  // Pin the endpoints and an exact midpoint so the truth itself is probed.
  v.back() = hi;
  if (n % 2 == 1) v[n / 2] = 0.5 * (lo + hi);
  return v;
}

// Iterates the cartesian product of per-axis point lists.
template <class F>
void for_each_grid_point(const std::vector<std::vector<double>>& axes, F&& f) {
  const std::size_t d = axes.size();
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> p(d);
  while (true) {
    for (std::size_t a = 0; a < d; ++a) p[a] = axes[a][idx[a]];
    if (!f(std::span<const double>(p))) return;
    std::size_t a = d;
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
      if (a == 0) return;
    }
    if (d == 0) return;
  }
}

}  // namespace detail

// Checks positivity of the marginal on a closed grid over the parameter box
// and of the conditional on the product of sup-norm neighborhoods of radius
// delta_s around theta_s_star and delta_t around theta_t_star. Neighborhoods
// are clipped to the box. Points that differ from theta_s_star in a shared
// coordinate are not probed, since the conditional is a point mass there.
inline PropernessReport validate_properness(const PriorSpec& prior, const ParamPoint& theta_s_star,
                                            const ParamPoint& theta_t_star, double delta_s, double delta_t,
                                            std::size_t resolution) {
  if (!(delta_s > 0.0) || !(delta_t > 0.0)) throw PreconditionError("validate_properness: radii must be positive");
  if (resolution < 3) throw PreconditionError("validate_properness: resolution must be at least 3");
  const Box& box = prior.box();
  const std::size_t d = box.dim();
  if (theta_s_star.dim() != d || theta_t_star.dim() != d) {
    throw PreconditionError("validate_properness: dimension mismatch");
  }
  PropernessReport report;
  report.delta_s = delta_s;
  report.delta_t = delta_t;

  std::vector<std::vector<double>> full(d);
  for (std::size_t a = 0; a < d; ++a) full[a] = detail::linspace(box.lo[a], box.hi[a], resolution);
  detail::for_each_grid_point(full, [&](std::span<const double> p) {
    if (marginal_log_density(prior, p) == kNegInf) {
      report.marginal_proper = false;
      report.marginal_witness = ParamPoint(std::vector<double>(p.begin(), p.end()));
      return false;
    }
    return true;
  });

  auto neighborhood = [&](const ParamPoint& center, double radius) {
    std::vector<std::vector<double>> axes(d);
    for (std::size_t a = 0; a < d; ++a) {
      double lo = center[a] - radius;
      double hi = center[a] + radius;
      if (lo < box.lo[a]) lo = box.lo[a], report.clipped = true;
      if (hi > box.hi[a]) hi = box.hi[a], report.clipped = true;
      axes[a] = detail::linspace(lo, hi, resolution);
      axes[a][resolution / 2] = std::clamp(center[a], lo, hi);
    }
    return axes;
  };
  const auto s_axes = neighborhood(theta_s_star, delta_s);
  const auto t_axes = neighborhood(theta_t_star, delta_t);
  const std::size_t shared = prior.conditional.shared;

  // Among failures, report the pair closest to the true parameters.
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_grid_point(s_axes, [&](std::span<const double> s) {
    detail::for_each_grid_point(t_axes, [&](std::span<const double> t) {
      std::vector<double> tt(t.begin(), t.end());
      for (std::size_t a = 0; a < shared; ++a) tt[a] = s[a];
      if (conditional_log_density(prior.conditional, tt, s) == kNegInf) {
        report.conditional_proper = false;
        double dist = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          dist = std::max(dist, std::abs(s[a] - theta_s_star[a]));
          dist = std::max(dist, std::abs(tt[a] - theta_t_star[a]));
        }
        if (dist < best) {
          best = dist;
          report.witness_s = ParamPoint(std::vector<double>(s.begin(), s.end()));
          report.witness_t = ParamPoint(tt);
        }
      }
      return true;
    });
    return true;
  });
  return report;
}

}  // namespace otl
