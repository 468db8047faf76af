#pragma once

// Mixture-strategy quadrature engine.
//
// The joint posterior over (theta_s, theta_t) is never materialized. Target
// likelihoods do not involve theta_s, so the source integral collapses once
// into an induced prior over theta_t:
//
//   pi(theta_t) = integral w(theta_t | theta_s) Q(theta_s | D_s) dtheta_s
//
// and every later target step works on a single grid over theta_t. The
// conditional factorizes over axes for all supported kinds, so the collapse is
// done one axis at a time in log space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/grid.hpp"
#include "otl/numeric.hpp"
#include "otl/prior.hpp"

namespace otl {

namespace detail {

// One axis of the separable contraction:
//   out[.., t, ..] = log sum_s exp(in[.., s, ..] + log_kernel[t * G + s]) + log_h
inline std::vector<double> contract_axis(const std::vector<double>& in, std::size_t resolution, std::size_t dim,
                                         std::size_t axis, const std::vector<double>& log_kernel, double log_h) {
  const std::size_t g = resolution;
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= g;
  for (std::size_t a = axis + 1; a < dim; ++a) inner *= g;
  std::vector<double> out(in.size(), kNegInf);
  std::vector<double> col(g);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      bool any = false;
      for (std::size_t s = 0; s < g; ++s) {
        col[s] = in[(o * g + s) * inner + i];
        any = any || col[s] != kNegInf;
      }
      if (!any) continue;
      for (std::size_t t = 0; t < g; ++t) {
        const double* krow = log_kernel.data() + t * g;
        double hi = kNegInf;
        for (std::size_t s = 0; s < g; ++s) hi = std::max(hi, col[s] + krow[s]);
        if (hi == kNegInf) continue;
        double acc = 0.0;
        for (std::size_t s = 0; s < g; ++s) {
          const double v = col[s] + krow[s] - hi;
          if (v > kLogUnderflow) acc += std::exp(v);
        }
        out[(o * g + t) * inner + i] = hi + std::log(acc) + log_h;
      }
    }
  }
  return out;
}

}  // namespace detail

// Density of theta_t obtained by pushing `mixing` (a normalized density over
// theta_s, or over the previous target parameter) through `kernel`, then
// renormalized on the grid. Shared axes pass through unchanged.
inline GridPosterior mix_through_conditional(const GridPosterior& mixing, const ConditionalSpec& kernel) {
  const GridSpec& grid = mixing.grid();
  const std::size_t d = grid.dim();
  if (kernel.box.dim() != d) throw PreconditionError("mix_through_conditional: dimension mismatch");
  const std::size_t g = grid.resolution();
  std::vector<double> cur(mixing.log_weights().begin(), mixing.log_weights().end());
  for (std::size_t a = kernel.shared; a < d; ++a) {
    const auto ax = grid.axis(a);
    std::vector<double> logk(g * g);
    for (std::size_t t = 0; t < g; ++t)
      for (std::size_t s = 0; s < g; ++s) logk[t * g + s] = conditional_axis_log_density(kernel, a, ax[t], ax[s]);
    cur = detail::contract_axis(cur, g, d, a, logk, std::log(grid.cell_width(a)));
  }
  GridPosterior out(grid, std::move(cur));
  out.normalize();
  return out;
}

// Q(theta_s | D_s) proportional to w(theta_s) * prod_k P_theta_s(z_k); the marginal prior when D_s is empty.
inline GridPosterior source_posterior(const PriorSpec& prior, const NodeLikelihood& likelihood_s,
                                      std::span<const Sample> source_data, const GridSpec& grid) {
  std::vector<double> lw(grid.node_count());
  const std::size_t d = grid.dim();
  const auto nodes = grid.nodes();
  for (std::size_t i = 0; i < lw.size(); ++i) {
    lw[i] = marginal_log_density(prior, std::span<const double>(nodes).subspan(i * d, d));
  }
  likelihood_s.accumulate(source_data, lw);
  GridPosterior post(grid, std::move(lw));
  post.normalize();
  return post;
}

// The theta_t prior used when the conditional ignores theta_s.
inline GridPosterior source_free_prior(const PriorSpec& prior, const GridSpec& grid) {
  std::vector<double> lw(grid.node_count());
  const std::size_t d = grid.dim();
  const auto nodes = grid.nodes();
  for (std::size_t i = 0; i < lw.size(); ++i) {
    const auto t = std::span<const double>(nodes).subspan(i * d, d);
    lw[i] = conditional_log_density(prior.conditional, t, t);
  }
  GridPosterior post(grid, std::move(lw));
  post.normalize();
  return post;
}

struct SourceConditioning {
  GridPosterior source_posterior;
  GridPosterior induced_target_prior;
};

inline SourceConditioning condition_on_source(const PriorSpec& prior, const FamilyModel& family_s,
                                              std::span<const Sample> source_data, const GridSpec& grid) {
  if (prior.dim() != grid.dim() || family_s.dim() != grid.dim()) {
    throw PreconditionError("condition_on_source: prior, family and grid dimensions differ");
  }
  NodeLikelihood lik(family_s, grid);
  GridPosterior src = source_posterior(prior, lik, source_data, grid);
  GridPosterior induced =
      prior.depends_on_source() ? mix_through_conditional(src, prior.conditional) : source_free_prior(prior, grid);
  return SourceConditioning{std::move(src), std::move(induced)};
}

// Induced theta_t prior only; skips the source likelihood when the conditional ignores theta_s.
inline GridPosterior induced_target_prior(const PriorSpec& prior, const FamilyModel& family_s,
                                          std::span<const Sample> source_data, const GridSpec& grid) {
  if (!prior.depends_on_source()) return source_free_prior(prior, grid);
  return condition_on_source(prior, family_s, source_data, grid).induced_target_prior;
}

// log integral P_theta(z) dQ(theta), by log-sum-exp quadrature.
inline double predictive_log_density(const GridPosterior& posterior, const NodeLikelihood& likelihood,
                                     const Sample& z) {
  std::vector<double> ll(posterior.size());
  likelihood.evaluate(z, ll);
  for (std::size_t i = 0; i < ll.size(); ++i) ll[i] += posterior.log_weights()[i];
  return log_sum_exp(ll) + posterior.grid().log_cell_volume();
}

inline double predictive_log_density(const GridPosterior& posterior, const FamilyModel& family_t, const Sample& z) {
  return predictive_log_density(posterior, NodeLikelihood(family_t, posterior.grid()), z);
}

// Pure single-observation update; the input posterior is left untouched.
inline GridPosterior update_target(const GridPosterior& posterior, const FamilyModel& family_t, const Sample& z) {
  NodeLikelihood lik(family_t, posterior.grid());
  std::vector<double> ll(posterior.size());
  lik.evaluate(z, ll);
  GridPosterior next = posterior;
  next.absorb(ll);
  return next;
}

// Batch log-evidence of target data under a normalized theta_t prior:
// log sum_i exp(log pi_i + sum_k log P_theta_i(z_k)) + log cell volume.
inline double log_evidence(const GridPosterior& target_prior, const NodeLikelihood& likelihood_t,
                           std::span<const Sample> target_data) {
  if (target_data.empty()) return 0.0;
  std::vector<double> acc(target_prior.log_weights().begin(), target_prior.log_weights().end());
  likelihood_t.accumulate(target_data, acc);
  return log_sum_exp(acc) + target_prior.grid().log_cell_volume();
}

// log Q(D_t | D_s) for the mixture strategy, computed in one batch pass.
inline double log_evidence(const PriorSpec& prior, const FamilyModel& family_s, const FamilyModel& family_t,
                           std::span<const Sample> source_data, std::span<const Sample> target_data,
                           const GridSpec& grid) {
  if (target_data.empty()) return 0.0;
  const GridPosterior pi = induced_target_prior(prior, family_s, source_data, grid);
  return log_evidence(pi, NodeLikelihood(family_t, grid), target_data);
}

// log Q(D_t^k | D_s) for every prefix k = 1..n, each as a batch sum over the
// grid of prior times the accumulated prefix likelihood. No per-step
// renormalization, so this is an independent route to the chain-rule product.
inline std::vector<double> prefix_log_evidence(const GridPosterior& target_prior, const NodeLikelihood& likelihood_t,
                                               std::span<const Sample> target_data) {
  std::vector<double> acc(target_prior.log_weights().begin(), target_prior.log_weights().end());
  std::vector<double> ll(acc.size());
  std::vector<double> out;
  out.reserve(target_data.size());
  const double log_vol = target_prior.grid().log_cell_volume();
  for (const Sample& z : target_data) {
    likelihood_t.evaluate(z, ll);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += ll[i];
    out.push_back(log_sum_exp(acc) + log_vol);
  }
  return out;
}

// Sequential mixture predictor: holds Q(theta_t | D_s, D_t^{k-1}) and
// predicts/absorbs one target observation at a time.
class SequentialPredictor {
 public:
  SequentialPredictor(GridPosterior prior, const FamilyModel& family_t)
      : posterior_(std::move(prior)), likelihood_(family_t, posterior_.grid()), scratch_(posterior_.size()) {}

  const GridPosterior& posterior() const { return posterior_; }
  const NodeLikelihood& likelihood() const { return likelihood_; }

  double predictive_log_density(const Sample& z) const { return otl::predictive_log_density(posterior_, likelihood_, z); }

  // Predictive probability that the label is 1 at covariates x (logistic family).
  double label_probability(std::span<const double> x) const {
    Sample z = labelled_sample(x, 1);
    return std::exp(predictive_log_density(z));
  }

  // Returns log Q(z | past) and then conditions on z.
  double observe(const Sample& z) {
    likelihood_.evaluate(z, scratch_);
    return posterior_.absorb(scratch_);
  }

  // Replaces the current posterior with a new prior, keeping the likelihood cache.
  void reset(GridPosterior prior) {
    if (!(prior.grid() == posterior_.grid())) throw PreconditionError("SequentialPredictor::reset: grid changed");
    posterior_ = std::move(prior);
  }

 private:
  GridPosterior posterior_;
  NodeLikelihood likelihood_;
  std::vector<double> scratch_;
};

}  // namespace otl
