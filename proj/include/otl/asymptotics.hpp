#pragma once

// Closed-form regret asymptotes and bounds.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/numeric.hpp"
#include "otl/scenario.hpp"

namespace otl {

// value = growth + fisher + prior + shared, summed in that order.
//   growth = (d-j)/2 * log(n / 2 pi e)
//   fisher = 1/2 * log det I_t
//   prior  = -log w(theta_t | theta_s)
//   shared = 1/2 * log det(I + (n/m) Delta_t Delta_s^-1)
struct AsymptoteResult {
  double value = 0.0;
  double growth = 0.0;
  double fisher = 0.0;
  double prior = 0.0;
  double shared = 0.0;

  std::vector<std::pair<std::string, double>> breakdown() const {
    return {{"growth", growth}, {"fisher", fisher}, {"prior", prior}, {"shared", shared}};
  }
};

namespace detail {

inline AsymptoteResult assemble(double growth, double fisher, double prior, double shared) {
  AsymptoteResult r;
  r.growth = growth;
  r.fisher = fisher;
  r.prior = prior;
  r.shared = shared;
  r.value = ((growth + fisher) + prior) + shared;
  return r;
}

// log det of a matrix with positive determinant; 0 for an empty matrix.
inline double log_det(const Eigen::MatrixXd& a, std::string_view what) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1) {
    if (!(a(0, 0) > 0.0)) throw NumericalError(std::string(what) + " has nonpositive determinant");
    return std::log(a(0, 0));
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double det = lu.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw NumericalError(std::string(what) + " has nonpositive determinant");
  }
  const Eigen::MatrixXd u = lu.matrixLU().triangularView<Eigen::Upper>();
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) s += std::log(std::abs(u(i, i)));
  return s;
}

// log det(I + ratio * A B^-1); B is checked for singularity first.
inline double log_det_ratio(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ratio, std::string_view a_name,
                            std::string_view b_name) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
    throw PreconditionError(std::string(a_name) + " and " + std::string(b_name) + " must be square and equally sized");
  }
  if (a.size() == 0) return 0.0;
  require_nonsingular(b, b_name);
  if (a.rows() == 1) return std::log1p(ratio * a(0, 0) / b(0, 0));
  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(a.rows(), a.cols()) + ratio * a * b.partialPivLu().inverse();
  return log_det(m, "I + ratio * " + std::string(a_name) + " * inverse(" + std::string(b_name) + ")");
}

}  // namespace detail

inline AsymptoteResult asymptote_scalar(double fisher_t, double prior_log_density_at_truth, std::size_t n) {
  if (!(fisher_t > 0.0) || !std::isfinite(fisher_t)) {
    throw DomainError("asymptote_scalar: Fisher information must be positive, got " + std::to_string(fisher_t));
  }
  if (n < 1) throw PreconditionError("asymptote_scalar: n must be at least 1");
  const double growth = 0.5 * (std::log(static_cast<double>(n)) - kLog2PiE);
  return detail::assemble(growth, 0.5 * std::log(fisher_t), -prior_log_density_at_truth, 0.0);
}

inline AsymptoteResult asymptote_general(const FisherBlocks& blocks, double prior_log_density_at_truth, std::size_t n,
                                         std::size_t m, std::size_t d, std::size_t j) {
  if (n < 1 || m < 1) throw PreconditionError("asymptote_general: n and m must be at least 1");
  if (j > d || blocks.d != d || blocks.j != j) {
    throw PreconditionError("asymptote_general: block shapes disagree with (d, j)");
  }
  const auto r = static_cast<Eigen::Index>(d - j);
  if (blocks.specific_t.rows() != r || blocks.specific_t.cols() != r) {
    throw PreconditionError("asymptote_general: I_t must be (d-j) x (d-j)");
  }
  const double shared =
      j == 0 ? 0.0
             : 0.5 * detail::log_det_ratio(blocks.delta_t, blocks.delta_s,
                                           static_cast<double>(n) / static_cast<double>(m), "Delta_t", "Delta_s");
  const double growth = 0.5 * static_cast<double>(d - j) * (std::log(static_cast<double>(n)) - kLog2PiE);
  double fisher = 0.0;
  if (r == 1) {
    const double v = blocks.specific_t(0, 0);
    if (!(v > 0.0)) throw DomainError("asymptote_general: I_t must be positive");
    fisher = 0.5 * std::log(v);
  } else if (r > 1) {
    detail::require_nonsingular(blocks.specific_t, "I_t");
    fisher = 0.5 * detail::log_det(blocks.specific_t, "I_t");
  }
  return detail::assemble(growth, fisher, -prior_log_density_at_truth, shared);
}

enum class RateRegime {
  Sublinear,    // m = ceil(sqrt(n))
  Linear,       // m = n
  Superlinear,  // m = n^2
};

inline std::size_t regime_source_size(RateRegime regime, std::size_t n) {
  switch (regime) {
    case RateRegime::Sublinear: {
      auto m = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
      while (m * m < n) ++m;
      while (m > 1 && (m - 1) * (m - 1) >= n) --m;
      return m;
    }
    case RateRegime::Linear: return n;
    case RateRegime::Superlinear: return n * n;
  }
  return n;
}

struct RateRow {
  std::size_t n = 0;
  std::size_t m = 0;
  double cost = 0.0;  // 1/2 log det(I + (n/m) Delta_t Delta_s^-1)
};

inline std::vector<RateRow> rate_regime_sweep(const FisherBlocks& blocks, RateRegime regime,
                                              const std::vector<std::size_t>& n_list) {
  if (blocks.j < 1) throw PreconditionError("rate_regime_sweep: needs at least one shared coordinate");
  std::vector<RateRow> rows;
  rows.reserve(n_list.size());
  for (std::size_t n : n_list) {
    if (n < 1) throw PreconditionError("rate_regime_sweep: n must be at least 1");
    const std::size_t m = regime_source_size(regime, n);
    const double ratio = static_cast<double>(n) / static_cast<double>(m);
    rows.push_back({n, m, 0.5 * detail::log_det_ratio(blocks.delta_t, blocks.delta_s, ratio, "Delta_t", "Delta_s")});
  }
  return rows;
}

inline double general_loss_bound(double M, std::size_t n, double cmi) {
  if (!(M > 0.0)) throw DomainError("general_loss_bound: M must be positive");
  if (!(cmi >= 0.0)) throw DomainError("general_loss_bound: CMI must be nonnegative, got " + std::to_string(cmi));
  return M * std::sqrt(2.0 * static_cast<double>(n) * cmi);
}

// Per-segment matrices for the time-variant bound. Every field must be set,
// except delta_t and delta_t_prev for the first segment, which has no predecessor.
struct SegmentBlocks {
  std::optional<Eigen::MatrixXd> delta_ct;      // j x j
  std::optional<Eigen::MatrixXd> delta_cst;     // j x j
  std::optional<Eigen::MatrixXd> delta_t;       // c_l x c_l
  std::optional<Eigen::MatrixXd> delta_t_prev;  // c_l x c_l
  std::optional<Eigen::MatrixXd> fisher_t;      // (d-j-c_l) x (d-j-c_l)
};

inline double time_variant_bound(const std::vector<SegmentBlocks>& segment_blocks, const SegmentSchedule& schedule,
                                 const std::vector<double>& prior_log_densities, double M, std::size_t m) {
  const std::size_t k = schedule.segments.size();
  if (k == 0) throw PreconditionError("time_variant_bound: empty schedule");
  if (!(M > 0.0)) throw DomainError("time_variant_bound: M must be positive");
  if (segment_blocks.size() != k || prior_log_densities.size() != k) {
    throw UnsupportedInput("time_variant_bound: need block inputs and a prior density for each of the " +
                           std::to_string(k) + " segments");
  }
  const std::size_t d = schedule.segments.front().theta_t.dim();
  const std::size_t j = schedule.shared_with_source;
  auto need = [](const std::optional<Eigen::MatrixXd>& b, std::size_t l, const char* name) -> const Eigen::MatrixXd& {
    if (!b) {
      throw UnsupportedInput("time_variant_bound: segment " + std::to_string(l) + " is missing block " + name);
    }
    return *b;
  };
  auto shape = [](const Eigen::MatrixXd& b, std::size_t size, std::size_t l, const char* name) {
    const auto s = static_cast<Eigen::Index>(size);
    if (b.rows() != s || b.cols() != s) {
      throw PreconditionError("time_variant_bound: segment " + std::to_string(l) + " block " + name + " must be " +
                              std::to_string(size) + " x " + std::to_string(size));
    }
  };
  double sum = 0.0;
  for (std::size_t l = 0; l < k; ++l) {
    const Segment& seg = schedule.segments[l];
    const SegmentBlocks& in = segment_blocks[l];
    const std::size_t c = l == 0 ? 0 : seg.common_with_previous;
    if (j + c > d) throw PreconditionError("time_variant_bound: j + c_l exceeds the dimension");
    const double n_l = static_cast<double>(seg.n);
    const double n_prev = l == 0 ? 0.0 : static_cast<double>(schedule.segments[l - 1].n);

    const auto& dct = need(in.delta_ct, l, "Delta_ct");
    const auto& dcst = need(in.delta_cst, l, "Delta_cst");
    shape(dct, j, l, "Delta_ct");
    shape(dcst, j, l, "Delta_cst");
    double term = detail::log_det_ratio(dct, dcst, n_l / (static_cast<double>(m) + n_prev), "Delta_ct", "Delta_cst");

    if (l > 0) {
      const auto& dt = need(in.delta_t, l, "Delta_t");
      const auto& dprev = need(in.delta_t_prev, l, "Delta_t_prev");
      shape(dt, c, l, "Delta_t");
      shape(dprev, c, l, "Delta_t_prev");
      term += detail::log_det_ratio(dt, dprev, n_l / n_prev, "Delta_t", "Delta_t_prev");
    }

    const auto& it = need(in.fisher_t, l, "I_t");
    const std::size_t r = d - j - c;
    shape(it, r, l, "I_t");
    if (r > 0) {
      detail::require_nonsingular(it, "I_t");
      term += static_cast<double>(r) * std::log(n_l) + detail::log_det(it, "I_t");
    }
    term -= static_cast<double>(r) * kLog2PiE;
    term += -2.0 * prior_log_densities[l];
    sum += n_l * term;
  }
  const double arg = static_cast<double>(k) * sum;
  if (!(arg >= 0.0)) {
    throw DomainError("time_variant_bound: the bracketed sum is negative (" + std::to_string(arg) +
                      "); the asymptotic expression is outside its range of validity");
  }
  return M * std::sqrt(arg);
}

}  // namespace otl
