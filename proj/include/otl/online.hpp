#pragma once

// Sequential prediction protocol: per-trial regret traces under log loss and
// zero-one loss, time-variant targets, and the Monte-Carlo CMI estimator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/grid.hpp"
#include "otl/numeric.hpp"
#include "otl/parallel.hpp"
#include "otl/posterior.hpp"
#include "otl/random.hpp"
#include "otl/scenario.hpp"

namespace otl {

// Cumulative regret after steps 1..n; per_step[0] follows the first
// prediction, which is made from the source data alone.
struct RegretTrace {
  std::vector<double> per_step;
  LossKind loss = LossKind::LogLoss;
  std::uint64_t trial_seed = 0;

  std::size_t size() const { return per_step.size(); }
  double final() const { return per_step.empty() ? 0.0 : per_step.back(); }
};

struct TrialData {
  SampleSeq source;
  SampleSeq target;

  std::uint64_t target_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Sample& z : target) {
      h = checksum(std::span<const double>(z.x), h);
      h = checksum(std::span<const double>(&z.y, 1), h);
    }
    return h;
  }
};

// Source draws come first, then the target draws in time order (segment by
// segment for a schedule). Both arms of a comparison reuse one TrialData.
inline TrialData draw_trial_data(const ScenarioConfig& sc, RandomStream& rng) {
  TrialData d;
  d.source = sample(sc.family, sc.theta_s, rng, sc.m);
  if (sc.schedule) {
    d.target.reserve(sc.schedule->total_steps());
    for (const Segment& seg : sc.schedule->segments) {
      SampleSeq part = sample(sc.family, seg.theta_t, rng, seg.n);
      d.target.insert(d.target.end(), part.begin(), part.end());
    }
  } else {
    d.target = sample(sc.family, sc.theta_t, rng, sc.n);
  }
  return d;
}

namespace detail {

[[noreturn]] inline void rethrow_with_trial(const ScenarioConfig& sc, std::uint64_t seed, const DegeneratePosterior& e) {
  throw DegeneratePosterior(std::string(e.what()) + " [scenario " + sc.name + ", trial seed " + std::to_string(seed) +
                            "]");
}

// Predictive probability of label 1 within this distance of 1/2 counts as a tie.
inline constexpr double kTieTolerance = 1e-12;

}  // namespace detail

// Decision of the Bayes predictor under zero-one loss: 1 iff the predictive
// label probability is at least 1/2, ties resolved to 1.
inline int bayes_decision(const SequentialPredictor& predictor, std::span<const double> x) {
  const double p1 = predictor.label_probability(x);
  return p1 >= 0.5 - detail::kTieTolerance ? 1 : 0;
}

// Oracle decision: 1 iff sigma(theta' x) >= 1/2.
inline int oracle_decision(std::span<const double> theta, std::span<const double> x) {
  double eta = 0.0;
  for (std::size_t a = 0; a < theta.size(); ++a) eta += theta[a] * x[a];
  return eta >= 0.0 ? 1 : 0;
}

// Log-loss trace of a predictor started from `start_prior` over given target data.
inline RegretTrace log_loss_trace(const GridPosterior& start_prior, const FamilyModel& family,
                                  std::span<const double> theta_t, std::span<const Sample> target) {
  SequentialPredictor predictor(start_prior, family);
  RegretTrace trace;
  trace.per_step.reserve(target.size());
  double cum = 0.0;
  for (const Sample& z : target) {
    cum += family.log_density_at(theta_t, z) - predictor.observe(z);
    trace.per_step.push_back(cum);
  }
  return trace;
}

inline RegretTrace zero_one_trace(const GridPosterior& start_prior, const FamilyModel& family,
                                  std::span<const double> theta_t, std::span<const Sample> target) {
  SequentialPredictor predictor(start_prior, family);
  const std::size_t d = family.dim();
  RegretTrace trace;
  trace.loss = LossKind::ZeroOne;
  trace.per_step.reserve(target.size());
  double cum = 0.0;
  for (const Sample& z : target) {
    const auto x = std::span<const double>(z.x).first(d);
    const int y = z.y > 0.5 ? 1 : 0;
    const int b = bayes_decision(predictor, x);
    const int b_star = oracle_decision(theta_t, x);
    cum += static_cast<double>(b != y) - static_cast<double>(b_star != y);
    trace.per_step.push_back(cum);
    predictor.observe(z);
  }
  return trace;
}

// Both arms of one trial on common data.
struct TrialOutcome {
  RegretTrace with_source;
  RegretTrace baseline;
  std::uint64_t target_checksum = 0;
};

// Log-loss trial with the scenario's prior.
inline RegretTrace run_log_loss_trial(const ScenarioConfig& sc, const PriorSpec& prior, RandomStream& rng,
                                      std::uint64_t trial_seed = 0) {
  const GridSpec grid = sc.grid();
  const TrialData data = draw_trial_data(sc, rng);
  try {
    const GridPosterior pi = induced_target_prior(prior, sc.family, data.source, grid);
    RegretTrace t = log_loss_trace(pi, sc.family, sc.theta_t.view(), data.target);
    t.trial_seed = trial_seed;
    return t;
  } catch (const DegeneratePosterior& e) {
    detail::rethrow_with_trial(sc, trial_seed, e);
  }
}

inline RegretTrace run_log_loss_trial(const ScenarioConfig& sc, RandomStream& rng, std::uint64_t trial_seed = 0) {
  return run_log_loss_trial(sc, sc.prior, rng, trial_seed);
}

inline RegretTrace run_general_loss_trial(const ScenarioConfig& sc, const PriorSpec& prior, RandomStream& rng,
                                          std::uint64_t trial_seed = 0) {
  if (sc.family.kind() != FamilyKind::LogisticRegression) {
    throw PreconditionError("run_general_loss_trial: zero-one loss needs the logistic family");
  }
  const GridSpec grid = sc.grid();
  const TrialData data = draw_trial_data(sc, rng);
  try {
    const GridPosterior pi = induced_target_prior(prior, sc.family, data.source, grid);
    RegretTrace t = zero_one_trace(pi, sc.family, sc.theta_t.view(), data.target);
    t.trial_seed = trial_seed;
    return t;
  } catch (const DegeneratePosterior& e) {
    detail::rethrow_with_trial(sc, trial_seed, e);
  }
}

inline RegretTrace run_general_loss_trial(const ScenarioConfig& sc, RandomStream& rng, std::uint64_t trial_seed = 0) {
  return run_general_loss_trial(sc, sc.prior, rng, trial_seed);
}

enum class SegmentCoupling {
  Markov,       // segment l starts from the previous posterior pushed through the transition
  Independent,  // every segment restarts from the source-induced prior
};

// Log-loss regret over the concatenation of all segments, starting from `start_prior`.
inline RegretTrace time_variant_trace(const GridPosterior& start_prior, const SegmentSchedule& schedule,
                                      const FamilyModel& family, std::span<const Sample> target,
                                      SegmentCoupling coupling = SegmentCoupling::Markov) {
  if (target.size() != schedule.total_steps()) throw PreconditionError("time_variant_trace: data length mismatch");
  SequentialPredictor predictor(start_prior, family);
  RegretTrace trace;
  trace.per_step.reserve(target.size());
  double cum = 0.0;
  std::size_t k = 0;
  for (std::size_t l = 0; l < schedule.segments.size(); ++l) {
    const Segment& seg = schedule.segments[l];
    if (l > 0) {
      if (coupling == SegmentCoupling::Markov) {
        ConditionalSpec kernel = schedule.transition_into(l);
        kernel.box = start_prior.grid().box();
        predictor.reset(mix_through_conditional(predictor.posterior(), kernel));
      } else {
        predictor.reset(start_prior);
      }
    }
    for (std::size_t i = 0; i < seg.n; ++i, ++k) {
      const Sample& z = target[k];
      cum += family.log_density_at(seg.theta_t.view(), z) - predictor.observe(z);
      trace.per_step.push_back(cum);
    }
  }
  return trace;
}

inline RegretTrace run_time_variant_trial(const SegmentSchedule& schedule, const ScenarioConfig& sc, RandomStream& rng,
                                          std::uint64_t trial_seed = 0,
                                          SegmentCoupling coupling = SegmentCoupling::Markov) {
  schedule.validate(sc.theta_s);
  ScenarioConfig scs = sc;
  scs.schedule = schedule;
  const GridSpec grid = scs.grid();
  const TrialData data = draw_trial_data(scs, rng);
  try {
    const GridPosterior pi = induced_target_prior(sc.prior, sc.family, data.source, grid);
    RegretTrace trace = time_variant_trace(pi, schedule, sc.family, data.target, coupling);
    trace.trial_seed = trial_seed;
    return trace;
  } catch (const DegeneratePosterior& e) {
    detail::rethrow_with_trial(sc, trial_seed, e);
  }
}

// Per-index sample mean and standard error of the mean, reduced in index order.
struct MeanCurve {
  std::vector<double> mean;
  std::vector<double> std_error;

  std::size_t size() const { return mean.size(); }
};

inline MeanCurve mean_curve(const std::vector<std::vector<double>>& rows) {
  MeanCurve out;
  if (rows.empty()) return out;
  const std::size_t len = rows.front().size();
  const double r = static_cast<double>(rows.size());
  out.mean.assign(len, 0.0);
  out.std_error.assign(len, 0.0);
  for (const auto& row : rows) {
    if (row.size() != len) throw PreconditionError("mean_curve: ragged rows");
    for (std::size_t k = 0; k < len; ++k) out.mean[k] += row[k];
  }
  for (double& m : out.mean) m /= r;
  if (rows.size() < 2) return out;
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < len; ++k) {
      const double dv = row[k] - out.mean[k];
      out.std_error[k] += dv * dv;
    }
  }
  for (double& s : out.std_error) s = std::sqrt(s / (r - 1.0) / r);
  return out;
}

// Monte-Carlo CMI curve over prefix lengths 0..n (entry 0 is exactly 0):
// mean over trials of log P_theta_t(D_t^k) - log Q(D_t^k | D_s^m), with the
// evidence computed in batch. Trial r uses trial_stream(seed, r), the same
// stream run_log_loss_trial gets inside an experiment.
inline MeanCurve estimate_cmi(const ScenarioConfig& sc, std::size_t reps, std::uint64_t seed, const PriorSpec& prior,
                              std::size_t threads = default_thread_count()) {
  if (reps < 2) throw PreconditionError("estimate_cmi: reps must be at least 2");
  const GridSpec grid = sc.grid();
  const NodeLikelihood lik(sc.family, grid);
  std::vector<std::vector<double>> rows(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    const std::uint64_t ts = trial_seed(seed, r);
    RandomStream rng = make_stream(ts);
    const TrialData data = draw_trial_data(sc, rng);
    try {
      const GridPosterior pi = induced_target_prior(prior, sc.family, data.source, grid);
      const std::vector<double> ev = prefix_log_evidence(pi, lik, data.target);
      std::vector<double> row(ev.size() + 1, 0.0);
      double logp = 0.0;
      for (std::size_t k = 0; k < ev.size(); ++k) {
        logp += sc.family.log_density_at(sc.theta_t.view(), data.target[k]);
        row[k + 1] = logp - ev[k];
      }
      rows[r] = std::move(row);
    } catch (const DegeneratePosterior& e) {
      detail::rethrow_with_trial(sc, ts, e);
    }
  });
  return mean_curve(rows);
}

inline MeanCurve estimate_cmi(const ScenarioConfig& sc, std::size_t reps, std::uint64_t seed,
                              std::size_t threads = default_thread_count()) {
  return estimate_cmi(sc, reps, seed, sc.prior, threads);
}

}  // namespace otl
