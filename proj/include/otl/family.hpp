#pragma once

// Parametric data families P_theta: sampling, log-densities, Fisher information
// and its common/task-specific block structure.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "otl/error.hpp"
#include "otl/numeric.hpp"
#include "otl/random.hpp"

namespace otl {

inline constexpr std::size_t kMaxDim = 3;

// Axis-aligned box in R^d.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box cube(std::size_t d, double lo, double hi) {
    return Box{std::vector<double>(d, lo), std::vector<double>(d, hi)};
  }

  std::size_t dim() const { return lo.size(); }

  bool contains(std::span<const double> p) const {
    if (p.size() != dim()) return false;
    for (std::size_t a = 0; a < dim(); ++a) {
      if (!(p[a] >= lo[a] && p[a] <= hi[a])) return false;
    }
    return true;
  }

  double width(std::size_t a) const { return hi[a] - lo[a]; }

  double volume() const {
    double v = 1.0;
    for (std::size_t a = 0; a < dim(); ++a) v *= width(a);
    return v;
  }

  void validate() const {
    if (lo.size() != hi.size() || lo.empty() || lo.size() > kMaxDim) {
      throw PreconditionError("box: dimension must be between 1 and 3 with matching bounds");
    }
    for (std::size_t a = 0; a < dim(); ++a) {
      if (!(lo[a] < hi[a])) throw PreconditionError("box: lower bound must be below upper bound");
    }
  }

  bool operator==(const Box&) const = default;
};

// A parameter vector whose first `common` coordinates are shared with the
// other task (theta_c); the remaining ones are task specific.
struct ParamPoint {
  std::vector<double> coords;
  std::size_t common = 0;

  ParamPoint() = default;
  ParamPoint(std::initializer_list<double> c) : coords(c) {}
  explicit ParamPoint(std::vector<double> c, std::size_t j = 0) : coords(std::move(c)), common(j) {
    if (common > coords.size()) throw PreconditionError("ParamPoint: common count exceeds dimension");
  }

  std::size_t dim() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }
  std::span<const double> view() const { return coords; }
  std::span<const double> common_part() const { return view().first(common); }
  std::span<const double> specific_part() const { return view().subspan(common); }

  bool operator==(const ParamPoint&) const = default;
};

inline std::string to_string(std::span<const double> p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
  os << ')';
  return os.str();
}

// One observation. Bernoulli uses y only; GaussianMean uses x[0..d); logistic
// regression uses covariates x[0..d) and the label y.
struct Sample {
  std::array<double, kMaxDim> x{};
  double y = 0.0;

  bool operator==(const Sample&) const = default;
};

using SampleSeq = std::vector<Sample>;

inline Sample bernoulli_sample(int y) { return Sample{{}, static_cast<double>(y)}; }

inline Sample labelled_sample(std::span<const double> x, int y) {
  Sample s;
  for (std::size_t a = 0; a < x.size(); ++a) s.x[a] = x[a];
  s.y = y;
  return s;
}

enum class FamilyKind { Bernoulli, GaussianMean, LogisticRegression };

class FamilyModel {
 public:
  static constexpr std::size_t kDefaultFisherSamples = 1'000'000;

  // Bernoulli on its default box; lets aggregates holding a family be default constructed.
  FamilyModel() : FamilyModel(bernoulli()) {}

  static FamilyModel bernoulli() { return bernoulli(Box::cube(1, 1e-4, 1.0 - 1e-4)); }

  static FamilyModel bernoulli(Box box) {
    box.validate();
    if (box.dim() != 1 || box.lo[0] < 0.0 || box.hi[0] > 1.0) {
      throw PreconditionError("bernoulli: parameter box must be a sub-interval of [0,1]");
    }
    FamilyModel f(FamilyKind::Bernoulli, std::move(box));
    return f;
  }

  static FamilyModel gaussian_mean(const Eigen::MatrixXd& covariance) {
    return gaussian_mean(covariance, Box::cube(static_cast<std::size_t>(covariance.rows()), 0.0, 1.0));
  }

  static FamilyModel gaussian_mean(const Eigen::MatrixXd& covariance, Box box) {
    box.validate();
    FamilyModel f(FamilyKind::GaussianMean, std::move(box));
    f.set_covariance(covariance, "gaussian_mean");
    return f;
  }

  static FamilyModel logistic(const Eigen::VectorXd& covariate_mean, const Eigen::MatrixXd& covariate_cov) {
    return logistic(covariate_mean, covariate_cov,
                    Box::cube(static_cast<std::size_t>(covariate_mean.size()), 0.0, 1.0));
  }

  static FamilyModel logistic(const Eigen::VectorXd& covariate_mean, const Eigen::MatrixXd& covariate_cov,
                              Box box) {
    box.validate();
    FamilyModel f(FamilyKind::LogisticRegression, std::move(box));
    if (covariate_mean.size() != static_cast<Eigen::Index>(f.dim())) {
      throw PreconditionError("logistic: covariate mean dimension differs from the parameter box");
    }
    f.mean_ = covariate_mean;
    f.set_covariance(covariate_cov, "logistic");
    return f;
  }

  FamilyModel with_fisher_samples(std::size_t samples, std::uint64_t seed) const {
    if (samples == 0) throw PreconditionError("fisher sample count must be positive");
    FamilyModel f = *this;
    f.fisher_samples_ = samples;
    f.fisher_seed_ = seed;
    return f;
  }

  FamilyModel with_box(Box box) const {
    box.validate();
    if (box.dim() != dim()) throw PreconditionError("with_box: dimension mismatch");
    FamilyModel f = *this;
    f.box_ = std::move(box);
    return f;
  }

  FamilyKind kind() const { return kind_; }
  std::size_t dim() const { return box_.dim(); }
  const Box& box() const { return box_; }
  std::size_t fisher_samples() const { return fisher_samples_; }
  std::uint64_t fisher_seed() const { return fisher_seed_; }

  // Noise covariance (GaussianMean) or covariate covariance (logistic).
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& covariance_factor() const { return chol_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  const Eigen::VectorXd& covariate_mean() const { return mean_; }
  double gaussian_log_normalizer() const { return log_norm_; }

  std::string_view name() const {
    switch (kind_) {
      case FamilyKind::Bernoulli: return "bernoulli";
      case FamilyKind::GaussianMean: return "gaussian";
      case FamilyKind::LogisticRegression: return "logistic";
    }
    return "unknown";
  }

  // Throws DomainError when theta has the wrong dimension or leaves the box.
  void check_parameter(std::span<const double> theta, std::string_view what = "theta") const {
    if (theta.size() != dim()) {
      throw DomainError(std::string(what) + " has dimension " + std::to_string(theta.size()) + ", family expects " +
                        std::to_string(dim()));
    }
    if (!box_.contains(theta)) {
      throw DomainError(std::string(what) + " " + to_string(theta) + " lies outside the parameter box");
    }
  }

  // Unchecked log P_theta(z); hot path for grid evaluation and finite-difference probes.
  double log_density_at(std::span<const double> theta, const Sample& z) const {
    switch (kind_) {
      case FamilyKind::Bernoulli:
        return z.y > 0.5 ? std::log(theta[0]) : std::log1p(-theta[0]);
      case FamilyKind::GaussianMean: {
        const std::size_t d = dim();
        std::array<double, kMaxDim> r{};
        for (std::size_t a = 0; a < d; ++a) r[a] = z.x[a] - theta[a];
        double q = 0.0;
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) q += r[a] * prec_[a * kMaxDim + b] * r[b];
        return log_norm_ - 0.5 * q;
      }
      case FamilyKind::LogisticRegression: {
        double eta = 0.0;
        for (std::size_t a = 0; a < dim(); ++a) eta += theta[a] * z.x[a];
        return z.y > 0.5 ? log_sigmoid(eta) : log_sigmoid(-eta);
      }
    }
    return kNegInf;
  }

  double precision_entry(std::size_t a, std::size_t b) const { return prec_[a * kMaxDim + b]; }

 private:
  FamilyModel(FamilyKind kind, Box box) : kind_(kind), box_(std::move(box)) {}

  void set_covariance(const Eigen::MatrixXd& cov, std::string_view who) {
    const auto d = static_cast<Eigen::Index>(dim());
    if (cov.rows() != d || cov.cols() != d) {
      throw PreconditionError(std::string(who) + ": covariance shape differs from the parameter box");
    }
    if (!cov.isApprox(cov.transpose(), 1e-12)) {
      throw PreconditionError(std::string(who) + ": covariance must be symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw PreconditionError(std::string(who) + ": covariance must be positive definite");
    }
    cov_ = cov;
    chol_ = llt.matrixL();
    precision_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) prec_[a * kMaxDim + b] = precision_(a, b);
    double log_det = 0.0;
    for (Eigen::Index a = 0; a < d; ++a) log_det += 2.0 * std::log(chol_(a, a));
    log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
  }

  FamilyKind kind_;
  Box box_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd precision_;
  std::array<double, kMaxDim * kMaxDim> prec_{};
  double log_norm_ = 0.0;
  std::size_t fisher_samples_ = kDefaultFisherSamples;
  std::uint64_t fisher_seed_ = 0x5EEDF15E5ULL;
};

// log P_theta(z) in nats. For logistic regression only the conditional label
// term log P_theta(y|x) is returned; the covariate law does not depend on theta.
inline double log_density(const FamilyModel& family, const ParamPoint& theta, const Sample& z) {
  family.check_parameter(theta.view());
  return family.log_density_at(theta.view(), z);
}

namespace detail {

inline Eigen::VectorXd standard_normal(std::size_t d, RandomStream& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd e(static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < d; ++a) e[static_cast<Eigen::Index>(a)] = normal(rng);
  return e;
}

inline Eigen::VectorXd draw_covariate(const FamilyModel& family, RandomStream& rng) {
  return family.covariate_mean() + family.covariance_factor() * standard_normal(family.dim(), rng);
}

}  // namespace detail

// `count` i.i.d. draws from P_theta; deterministic given the stream state.
inline SampleSeq sample(const FamilyModel& family, const ParamPoint& theta, RandomStream& rng, std::size_t count) {
  family.check_parameter(theta.view());
  const std::size_t d = family.dim();
  SampleSeq out;
  out.reserve(count);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    Sample s;
    switch (family.kind()) {
      case FamilyKind::Bernoulli:
        s.y = unif(rng) < theta[0] ? 1.0 : 0.0;
        break;
      case FamilyKind::GaussianMean: {
        const Eigen::VectorXd e = family.covariance_factor() * detail::standard_normal(d, rng);
        for (std::size_t a = 0; a < d; ++a) s.x[a] = theta[a] + e[static_cast<Eigen::Index>(a)];
        break;
      }
      case FamilyKind::LogisticRegression: {
        const Eigen::VectorXd x = detail::draw_covariate(family, rng);
        double eta = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          s.x[a] = x[static_cast<Eigen::Index>(a)];
          eta += theta[a] * s.x[a];
        }
        s.y = unif(rng) < sigmoid(eta) ? 1.0 : 0.0;
        break;
      }
    }
    out.push_back(s);
  }
  return out;
}

// -Hessian of log P_theta(z) with respect to theta.
inline Eigen::MatrixXd neg_log_density_hessian(const FamilyModel& family, std::span<const double> theta,
                                               const Sample& z) {
  const auto d = static_cast<Eigen::Index>(family.dim());
  switch (family.kind()) {
    case FamilyKind::Bernoulli: {
      const double t = theta[0];
      Eigen::MatrixXd h(1, 1);
      h(0, 0) = z.y > 0.5 ? 1.0 / (t * t) : 1.0 / ((1.0 - t) * (1.0 - t));
      return h;
    }
    case FamilyKind::GaussianMean:
      return family.precision();
    case FamilyKind::LogisticRegression: {
      Eigen::VectorXd x(d);
      double eta = 0.0;
      for (Eigen::Index a = 0; a < d; ++a) {
        x[a] = z.x[static_cast<std::size_t>(a)];
        eta += theta[static_cast<std::size_t>(a)] * x[a];
      }
      const double p = sigmoid(eta);
      return p * (1.0 - p) * x * x.transpose();
    }
  }
  return {};
}

// E_theta[-Hessian log P_theta(Z)]. Closed form for Bernoulli and GaussianMean;
// for logistic regression a Monte-Carlo average of p(1-p) x x^T over
// `family.fisher_samples()` covariate draws from a stream seeded by `family.fisher_seed()`.
inline Eigen::MatrixXd fisher_information(const FamilyModel& family, const ParamPoint& theta) {
  family.check_parameter(theta.view());
  const auto d = static_cast<Eigen::Index>(family.dim());
  switch (family.kind()) {
    case FamilyKind::Bernoulli: {
      const double t = theta[0];
      if (t <= 0.0 || t >= 1.0) throw DomainError("bernoulli Fisher information is undefined at theta in {0,1}");
      Eigen::MatrixXd f(1, 1);
      f(0, 0) = 1.0 / (t * (1.0 - t));
      return f;
    }
    case FamilyKind::GaussianMean:
      return family.precision();
    case FamilyKind::LogisticRegression: {
      RandomStream rng = make_stream(family.fisher_seed());
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t k = 0; k < family.fisher_samples(); ++k) {
        const Eigen::VectorXd x = detail::draw_covariate(family, rng);
        const double p = sigmoid(x.dot(Eigen::Map<const Eigen::VectorXd>(theta.coords.data(), d)));
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x, p * (1.0 - p));
      }
      Eigen::MatrixXd f = acc.selfadjointView<Eigen::Lower>();
      return f / static_cast<double>(family.fisher_samples());
    }
  }
  return {};
}

// Fisher blocks over common (first j) and task-specific coordinates, with the
// Schur complements delta = I_c - I_cross * I_specific^{-1} * I_cross^T.
struct FisherBlocks {
  std::size_t d = 0;
  std::size_t j = 0;
  Eigen::MatrixXd common_s;    // I_cs(theta_c), j x j
  Eigen::MatrixXd common_t;    // I_ct(theta_c), j x j
  Eigen::MatrixXd specific_s;  // I_s(theta_sr), (d-j) x (d-j)
  Eigen::MatrixXd specific_t;  // I_t(theta_tr), (d-j) x (d-j)
  Eigen::MatrixXd cross_s;     // I_cs(theta_c, theta_sr), j x (d-j)
  Eigen::MatrixXd cross_t;     // I_ct(theta_c, theta_tr), j x (d-j)
  Eigen::MatrixXd delta_s;     // j x j
  Eigen::MatrixXd delta_t;     // j x j
};

namespace detail {

inline void require_nonsingular(const Eigen::MatrixXd& m, std::string_view block) {
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  const double low = es.eigenvalues().minCoeff();
  if (!(low > 1e-12 * std::max(top, 1e-300))) {
    throw NumericalError(std::string("Fisher block ") + std::string(block) + " is singular (smallest eigenvalue " +
                         std::to_string(low) + ")");
  }
}

inline Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& common, const Eigen::MatrixXd& cross,
                                        const Eigen::MatrixXd& specific) {
  if (common.size() == 0) return common;
  if (specific.size() == 0) return common;
  Eigen::MatrixXd s = common - cross * specific.ldlt().solve(cross.transpose());
  return 0.5 * (s + s.transpose());
}

}  // namespace detail

// Partitions precomputed full Fisher matrices at theta_s and theta_t.
inline FisherBlocks fisher_blocks_from(const Eigen::MatrixXd& fisher_s, const Eigen::MatrixXd& fisher_t,
                                       std::size_t j) {
  const auto d = fisher_s.rows();
  if (fisher_s.cols() != d || fisher_t.rows() != d || fisher_t.cols() != d) {
    throw PreconditionError("fisher_blocks: Fisher matrices must be square and of equal size");
  }
  if (static_cast<Eigen::Index>(j) > d) throw PreconditionError("fisher_blocks: j exceeds dimension");
  const auto c = static_cast<Eigen::Index>(j);
  const auto r = d - c;
  FisherBlocks b;
  b.d = static_cast<std::size_t>(d);
  b.j = j;
  b.common_s = fisher_s.topLeftCorner(c, c);
  b.common_t = fisher_t.topLeftCorner(c, c);
  b.specific_s = fisher_s.bottomRightCorner(r, r);
  b.specific_t = fisher_t.bottomRightCorner(r, r);
  b.cross_s = fisher_s.topRightCorner(c, r);
  b.cross_t = fisher_t.topRightCorner(c, r);
  if (c > 0 && r > 0) {
    detail::require_nonsingular(b.specific_s, "I_s");
    detail::require_nonsingular(b.specific_t, "I_t");
  }
  b.delta_s = detail::schur_complement(b.common_s, b.cross_s, b.specific_s);
  b.delta_t = detail::schur_complement(b.common_t, b.cross_t, b.specific_t);
  return b;
}

inline FisherBlocks fisher_blocks(const FamilyModel& family_s, const FamilyModel& family_t, const ParamPoint& theta_s,
                                  const ParamPoint& theta_t, std::size_t j) {
  if (theta_s.dim() != theta_t.dim() || j > theta_s.dim()) {
    throw PreconditionError("fisher_blocks: parameters must share a dimension of at least j");
  }
  for (std::size_t a = 0; a < j; ++a) {
    if (theta_s[a] != theta_t[a]) {
      throw PreconditionError("fisher_blocks: common coordinate " + std::to_string(a) +
                              " differs between source and target");
    }
  }
  return fisher_blocks_from(fisher_information(family_s, theta_s), fisher_information(family_t, theta_t), j);
}

}  // namespace otl
