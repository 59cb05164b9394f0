#pragma once

// Gaussian-process regression with a Matern 5/2 kernel over normalized
// configuration features, and expected-improvement acquisition for cost
// minimization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ruya/config_space.hpp"
#include "ruya/error.hpp"

namespace ruya {

struct GpHyperparams {
  std::vector<double> length_scales;  // one per feature dimension
  double signal_variance = 1.0;       // on standardized targets
  double noise_variance = 1e-4;
  double prior_mean = 0.0;            // on standardized targets

  static GpHyperparams defaults(std::size_t dims) {
    GpHyperparams hp;
    hp.length_scales.assign(dims, 0.3);
    return hp;
  }

  void validate(std::size_t dims) const {
    if (length_scales.size() != dims) {
      throw InputError("expected " + std::to_string(dims) + " length scales, got " + std::to_string(length_scales.size()));
    }
    for (double l : length_scales) {
      if (!(l > 0.0)) throw InputError("length scales must be positive");
    }
    if (!(signal_variance > 0.0)) throw InputError("signal variance must be positive");
    if (!(noise_variance >= 0.0)) throw InputError("noise variance must be non-negative");
  }
};

// Affine map between raw costs and the zero-mean/unit-variance scale the GP works on.
struct Standardization {
  double mean = 0.0;
  double scale = 1.0;

  static Standardization fit(std::span<const double> y) {
    Standardization s;
    if (y.empty()) return s;
    double sum = 0.0;
    for (double v : y) sum += v;
    s.mean = sum / static_cast<double>(y.size());
    if (y.size() > 1) {
      double ss = 0.0;
      for (double v : y) ss += (v - s.mean) * (v - s.mean);
      const double sd = std::sqrt(ss / static_cast<double>(y.size()));
      if (sd > 0.0) s.scale = sd;
    }
    return s;
  }

  [[nodiscard]] double apply(double v) const { return (v - mean) / scale; }
  [[nodiscard]] double invert(double z) const { return z * scale + mean; }
};

// k(r) = s^2 (1 + sqrt5 r + 5/3 r^2) exp(-sqrt5 r), r scaled per dimension.
inline double matern52(std::span<const double> a, std::span<const double> b, std::span<const double> length_scales,
                       double signal_variance) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = (a[d] - b[d]) / length_scales[d];
    r2 += t * t;
  }
  const double sr = std::sqrt(5.0 * r2);
  return signal_variance * (1.0 + sr + 5.0 * r2 / 3.0) * std::exp(-sr);
}

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

class GpPosterior;
inline GpPosterior gp_fit(std::span<const FeatureVector> X, std::span<const double> y, const GpHyperparams& hp);

class GpPosterior {
 public:
  [[nodiscard]] std::size_t dims() const noexcept { return static_cast<std::size_t>(inputs_.cols()); }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(inputs_.rows()); }
  [[nodiscard]] const GpHyperparams& hyperparams() const noexcept { return hp_; }
  [[nodiscard]] const Standardization& standardization() const noexcept { return standardization_; }
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  [[nodiscard]] const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  [[nodiscard]] const Eigen::VectorXd& alpha() const noexcept { return alpha_; }

  // Log marginal likelihood of the standardized targets.
  [[nodiscard]] double log_marginal_likelihood() const {
    const auto n = static_cast<double>(size());
    return -0.5 * centered_.dot(alpha_) - factor_.diagonal().array().log().sum() -
           0.5 * n * std::log(2.0 * std::numbers::pi);
  }

  [[nodiscard]] Prediction predict(std::span<const double> x) const {
    if (x.size() != dims()) {
      throw InputError("query has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(dims()));
    }
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel(row(i), x);
    const double mean_z = hp_.prior_mean + k.dot(alpha_);
    factor_.triangularView<Eigen::Lower>().solveInPlace(k);
    const double var_z = std::max(0.0, hp_.signal_variance - k.squaredNorm());
    return {standardization_.invert(mean_z), standardization_.scale * std::sqrt(var_z)};
  }

 private:
  friend GpPosterior gp_fit(std::span<const FeatureVector>, std::span<const double>, const GpHyperparams&);

  [[nodiscard]] std::span<const double> row(Eigen::Index i) const {
    return {inputs_.data() + i * inputs_.cols(), static_cast<std::size_t>(inputs_.cols())};
  }
  [[nodiscard]] double kernel(std::span<const double> a, std::span<const double> b) const {
    return matern52(a, b, hp_.length_scales, hp_.signal_variance);
  }

  // Row-major so each training input is contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> inputs_;
  GpHyperparams hp_;
  Standardization standardization_;
  Eigen::MatrixXd factor_;   // lower Cholesky factor of K + (noise + jitter) I
  Eigen::VectorXd centered_; // standardized targets minus prior mean
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

// Extra diagonal tried, in order, when the kernel matrix fails to factor.
inline constexpr std::array<double, 6> kJitterLadder{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

inline GpPosterior gp_fit(std::span<const FeatureVector> X, std::span<const double> y, const GpHyperparams& hp) {
  if (X.empty()) throw InputError("GP needs at least one training point");
  if (X.size() != y.size()) throw InputError("GP inputs and targets differ in length");
  const std::size_t dims = X.front().size();
  for (const auto& x : X) {
    if (x.size() != dims) throw InputError("GP training inputs have inconsistent dimensions");
  }
  hp.validate(dims);

  GpPosterior gp;
  gp.hp_ = hp;
  const auto n = static_cast<Eigen::Index>(X.size());
  gp.inputs_.resize(n, static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims; ++d) gp.inputs_(i, static_cast<Eigen::Index>(d)) = X[static_cast<std::size_t>(i)][d];
  }
  gp.standardization_ = Standardization::fit(y);
  gp.centered_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gp.centered_[i] = gp.standardization_.apply(y[static_cast<std::size_t>(i)]) - hp.prior_mean;
  }

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = K(j, i) = gp.kernel(gp.row(i), gp.row(j));
    }
  }
  K.diagonal().array() += hp.noise_variance;

  for (double jitter : kJitterLadder) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd L = llt.matrixL();
    if ((L.diagonal().array() <= 0.0).any() || !L.allFinite()) continue;
    gp.factor_ = std::move(L);
    gp.jitter_ = jitter;
    gp.alpha_ = llt.solve(gp.centered_);
    return gp;
  }
  throw NumericalError("kernel matrix is not positive definite even with 1e-6 jitter");
}

inline Prediction gp_predict(const GpPosterior& model, std::span<const double> x) { return model.predict(x); }

// Marginal-likelihood grid search over a shared (isotropic) length scale.
// Ties keep the earlier grid entry.
inline GpHyperparams refit_length_scale(std::span<const FeatureVector> X, std::span<const double> y, GpHyperparams hp,
                                        std::span<const double> grid) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> best_scales = hp.length_scales;
  for (double l : grid) {
    hp.length_scales.assign(hp.length_scales.size(), l);
    const double lml = gp_fit(X, y, hp).log_marginal_likelihood();
    if (lml > best) {
      best = lml;
      best_scales = hp.length_scales;
    }
  }
  hp.length_scales = std::move(best_scales);
  return hp;
}

inline constexpr std::array<double, 5> kLengthScaleGrid{0.1, 0.2, 0.3, 0.5, 1.0};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Expected reduction below best_cost for Y ~ N(mean, std^2).
inline double expected_improvement(double mean, double std, double best_cost) {
  const double gain = best_cost - mean;
  if (!(std > 0.0)) return std::max(gain, 0.0);
  const double z = gain / std;
  return std::max(0.0, gain * normal_cdf(z) + std * normal_pdf(z));
}

struct Candidate {
  ConfigId id = 0;
  FeatureVector features;
  double hourly_cost = 0.0;
};

struct Selection {
  ConfigId id = 0;
  double expected_improvement = 0.0;
};

// Argmax EI over the candidates; ties go to the cheaper config per hour, then
// the lower id. Empty candidates means the region is exhausted.
inline std::optional<Selection> select_next(const GpPosterior& model, std::span<const Candidate> candidates,
                                            double best_cost) {
  std::optional<Selection> best;
  double best_hourly = 0.0;
  for (const auto& c : candidates) {
    const auto p = model.predict(c.features);
    const double ei = expected_improvement(p.mean, p.std, best_cost);
    const bool better = !best || ei > best->expected_improvement ||
                        (ei == best->expected_improvement &&
                         (c.hourly_cost < best_hourly || (c.hourly_cost == best_hourly && c.id < best->id)));
    if (better) {
      best = Selection{c.id, ei};
      best_hourly = c.hourly_cost;
    }
  }
  return best;
}

}  // namespace ruya
