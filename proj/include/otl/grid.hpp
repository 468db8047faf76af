#pragma once

// Regular midpoint grids over a parameter box, log-space densities on them,
// and per-node log-likelihood evaluation.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/numeric.hpp"

namespace otl {

// `resolution` midpoint nodes per axis; node i on axis a sits at lo + (i + 1/2) * h_a.
// Flat node index is row-major with axis 0 slowest.
class GridSpec {
 public:
  GridSpec(Box box, std::size_t resolution) : box_(std::move(box)), resolution_(resolution) {
    box_.validate();
    if (resolution_ == 0) throw PreconditionError("grid: resolution must be positive");
    std::size_t n = 1;
    for (std::size_t a = 0; a < box_.dim(); ++a) n *= resolution_;
    if (n > 2'000'000) throw PreconditionError("grid: more than 2e6 nodes");
    node_count_ = n;
  }

  const Box& box() const { return box_; }
  std::size_t dim() const { return box_.dim(); }
  std::size_t resolution() const { return resolution_; }
  std::size_t node_count() const { return node_count_; }

  double cell_width(std::size_t a) const { return box_.width(a) / static_cast<double>(resolution_); }

  double log_cell_volume() const {
    double v = 0.0;
    for (std::size_t a = 0; a < dim(); ++a) v += std::log(cell_width(a));
    return v;
  }

  std::vector<double> axis(std::size_t a) const {
    std::vector<double> v(resolution_);
    const double h = cell_width(a);
    for (std::size_t i = 0; i < resolution_; ++i) v[i] = box_.lo[a] + (static_cast<double>(i) + 0.5) * h;
    return v;
  }

  // Flat coordinates, node_count() x dim().
  std::vector<double> nodes() const {
    const std::size_t d = dim();
    std::vector<std::vector<double>> axes(d);
    for (std::size_t a = 0; a < d; ++a) axes[a] = axis(a);
    std::vector<double> out(node_count_ * d);
    for (std::size_t i = 0; i < node_count_; ++i) {
      std::size_t rem = i;
      for (std::size_t a = d; a-- > 0;) {
        out[i * d + a] = axes[a][rem % resolution_];
        rem /= resolution_;
      }
    }
    return out;
  }

  bool operator==(const GridSpec&) const = default;

 private:
  Box box_;
  std::size_t resolution_;
  std::size_t node_count_ = 1;
};

// Log density values on a grid. After normalize(), the midpoint-rule mass
// sum_i exp(log_weights[i]) * cell_volume is 1.
class GridPosterior {
 public:
  GridPosterior(GridSpec grid, std::vector<double> log_weights)
      : grid_(std::move(grid)), log_weights_(std::move(log_weights)) {
    if (log_weights_.size() != grid_.node_count()) throw PreconditionError("GridPosterior: weight count mismatch");
    for (double w : log_weights_) {
      if (std::isnan(w)) throw NumericalError("GridPosterior: NaN log weight");
    }
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return log_weights_.size(); }
  std::span<const double> log_weights() const { return log_weights_; }

  // Log normalizing constant removed by the most recent normalize() (0 before any).
  double log_norm() const { return log_norm_; }

  double log_mass() const { return log_sum_exp(log_weights_) + grid_.log_cell_volume(); }
  double mass() const { return std::exp(log_mass()); }

  void normalize() {
    const double z = log_mass();
    if (z == kNegInf) throw DegeneratePosterior("every grid node has zero posterior density");
    if (!std::isfinite(z)) throw NumericalError("GridPosterior: non-finite normalizer");
    for (double& w : log_weights_) w -= z;
    log_norm_ = z;
  }

  // Adds per-node log-likelihood terms and renormalizes. Returns the log of the
  // normalizer, which is the log predictive density of the absorbed data when
  // the posterior was normalized beforehand.
  double absorb(std::span<const double> node_log_lik) {
    if (node_log_lik.size() != log_weights_.size()) throw PreconditionError("absorb: size mismatch");
    for (std::size_t i = 0; i < log_weights_.size(); ++i) {
      log_weights_[i] += node_log_lik[i];
      if (std::isnan(log_weights_[i])) throw NumericalError("absorb: NaN log weight at node " + std::to_string(i));
    }
    normalize();
    return log_norm_;
  }

  double density(std::size_t i) const { return std::exp(log_weights_[i]); }

  std::vector<double> node(std::size_t i) const {
    const std::size_t d = grid_.dim();
    std::vector<double> p(d);
    std::size_t rem = i;
    for (std::size_t a = d; a-- > 0;) {
      p[a] = grid_.box().lo[a] + (static_cast<double>(rem % grid_.resolution()) + 0.5) * grid_.cell_width(a);
      rem /= grid_.resolution();
    }
    return p;
  }

  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < log_weights_.size(); ++i) {
      if (log_weights_[i] > log_weights_[best]) best = i;
    }
    return best;
  }

  // Quadrature moments of the normalized density.
  Eigen::VectorXd mean() const {
    const auto d = static_cast<Eigen::Index>(grid_.dim());
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    const double vol = std::exp(grid_.log_cell_volume());
    for (std::size_t i = 0; i < size(); ++i) {
      const double w = density(i) * vol;
      if (w == 0.0) continue;
      const auto p = node(i);
      for (Eigen::Index a = 0; a < d; ++a) mu[a] += w * p[static_cast<std::size_t>(a)];
    }
    return mu;
  }

  Eigen::MatrixXd covariance() const {
    const auto d = static_cast<Eigen::Index>(grid_.dim());
    const Eigen::VectorXd mu = mean();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    const double vol = std::exp(grid_.log_cell_volume());
    for (std::size_t i = 0; i < size(); ++i) {
      const double w = density(i) * vol;
      if (w == 0.0) continue;
      const auto p = node(i);
      Eigen::VectorXd r(d);
      for (Eigen::Index a = 0; a < d; ++a) r[a] = p[static_cast<std::size_t>(a)] - mu[a];
      c += w * r * r.transpose();
    }
    return c;
  }

 private:
  GridSpec grid_;
  std::vector<double> log_weights_;
  double log_norm_ = 0.0;
};

// Evaluates log P_theta(z) at every node of a grid.
class NodeLikelihood {
 public:
  NodeLikelihood(FamilyModel family, const GridSpec& grid)
      : family_(std::move(family)), d_(grid.dim()), nodes_(grid.nodes()) {
    if (family_.dim() != d_) throw PreconditionError("NodeLikelihood: family and grid dimensions differ");
    if (family_.kind() == FamilyKind::Bernoulli) {
      log_p1_.resize(size());
      log_p0_.resize(size());
      for (std::size_t i = 0; i < size(); ++i) {
        log_p1_[i] = std::log(nodes_[i]);
        log_p0_[i] = std::log1p(-nodes_[i]);
      }
    }
  }

  std::size_t size() const { return nodes_.size() / d_; }
  const FamilyModel& family() const { return family_; }
  std::span<const double> theta(std::size_t i) const { return std::span<const double>(nodes_).subspan(i * d_, d_); }

  // out[i] = log P_{theta_i}(z)
  void evaluate(const Sample& z, std::span<double> out) const {
    const std::size_t n = size();
    switch (family_.kind()) {
      case FamilyKind::Bernoulli: {
        const auto& table = z.y > 0.5 ? log_p1_ : log_p0_;
        for (std::size_t i = 0; i < n; ++i) out[i] = table[i];
        return;
      }
      case FamilyKind::GaussianMean:
        for (std::size_t i = 0; i < n; ++i) out[i] = family_.log_density_at(theta(i), z);
        return;
      case FamilyKind::LogisticRegression: {
        const double sign = z.y > 0.5 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double eta = 0.0;
          for (std::size_t a = 0; a < d_; ++a) eta += nodes_[i * d_ + a] * z.x[a];
          out[i] = log_sigmoid(sign * eta);
        }
        return;
      }
    }
  }

  // out[i] += sum_k log P_{theta_i}(z_k), through sufficient statistics where they exist.
  void accumulate(std::span<const Sample> zs, std::span<double> out) const {
    if (zs.empty()) return;
    const std::size_t n = size();
    switch (family_.kind()) {
      case FamilyKind::Bernoulli: {
        double ones = 0.0;
        for (const Sample& z : zs) ones += z.y > 0.5 ? 1.0 : 0.0;
        const double zeros = static_cast<double>(zs.size()) - ones;
        for (std::size_t i = 0; i < n; ++i) {
          if (ones > 0.0) out[i] += ones * log_p1_[i];
          if (zeros > 0.0) out[i] += zeros * log_p0_[i];
        }
        return;
      }
      case FamilyKind::GaussianMean: {
        // sum_k -(z_k - t)' P (z_k - t) / 2 = -(S2 - 2 t' P S1 + m t' P t) / 2
        const double m = static_cast<double>(zs.size());
        std::array<double, kMaxDim> s1{};
        double s2 = 0.0;
        for (const Sample& z : zs) {
          for (std::size_t a = 0; a < d_; ++a) {
            s1[a] += z.x[a];
            for (std::size_t b = 0; b < d_; ++b) s2 += z.x[a] * family_.precision_entry(a, b) * z.x[b];
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          const auto t = theta(i);
          double cross = 0.0;
          double quad = 0.0;
          for (std::size_t a = 0; a < d_; ++a) {
            for (std::size_t b = 0; b < d_; ++b) {
              cross += t[a] * family_.precision_entry(a, b) * s1[b];
              quad += t[a] * family_.precision_entry(a, b) * t[b];
            }
          }
          out[i] += m * family_.gaussian_log_normalizer() - 0.5 * (s2 - 2.0 * cross + m * quad);
        }
        return;
      }
      case FamilyKind::LogisticRegression:
        accumulate_logistic(zs, out);
        return;
    }
  }

 private:
  // sum_k [y_k eta_k - softplus(eta_k)] with eta_k = theta' x_k.
  void accumulate_logistic(std::span<const Sample> zs, std::span<double> out) const {
    const std::size_t n = size();
    std::array<double, kMaxDim> sy{};
    for (const Sample& z : zs) {
      if (z.y > 0.5)
        for (std::size_t a = 0; a < d_; ++a) sy[a] += z.x[a];
    }
    // Covariates transposed into contiguous columns for the inner loop.
    std::vector<std::vector<double>> cols(d_, std::vector<double>(zs.size()));
    for (std::size_t k = 0; k < zs.size(); ++k)
      for (std::size_t a = 0; a < d_; ++a) cols[a][k] = zs[k].x[a];
    for (std::size_t i = 0; i < n; ++i) {
      const auto t = theta(i);
      double lin = 0.0;
      for (std::size_t a = 0; a < d_; ++a) lin += t[a] * sy[a];
      double sp = 0.0;
      for (std::size_t k = 0; k < zs.size(); ++k) {
        double eta = 0.0;
        for (std::size_t a = 0; a < d_; ++a) eta += t[a] * cols[a][k];
        sp += softplus(eta);
      }
      out[i] += lin - sp;
    }
  }

  FamilyModel family_;
  std::size_t d_;
  std::vector<double> nodes_;
  std::vector<double> log_p1_;
  std::vector<double> log_p0_;
};

}  // namespace otl
