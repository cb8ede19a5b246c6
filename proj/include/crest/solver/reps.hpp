#pragma once

// Episodic relative-entropy policy search over a Gaussian search
// distribution. Each iteration reweights sampled parameter vectors by
// exp((r - max r) / eta), with the temperature eta chosen by minimizing the
// dual g(eta) = eta * eps + eta * log mean_k exp((r_k - max r) / eta), then
// refits the Gaussian by weighted maximum likelihood.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "crest/core/rng.hpp"

namespace crest::solver {

struct GaussianSearchState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline GaussianSearchState make_search_state(const Eigen::VectorXd& mean,
                                             const Eigen::VectorXd& std_dev) {
  if (mean.size() != std_dev.size())
    throw std::invalid_argument("search state: mean/std length mismatch");
  GaussianSearchState s;
  s.mean = mean;
  s.cov = std_dev.array().square().matrix().asDiagonal();
  return s;
}

namespace detail {

inline double reps_dual(const Eigen::VectorXd& deltas, double epsilon, double eta) {
  // deltas are rewards shifted so max(delta) == 0, keeping exp() in [0, 1]
  const double m = (deltas.array() / eta).exp().mean();
  return eta * epsilon + eta * std::log(m);
}

}  // namespace detail

// Dual minimizer by golden-section search on log(eta). The dual is convex;
// with all rewards equal it is minimized at the lower edge, where the
// weights are uniform anyway.
inline double reps_temperature(const Eigen::VectorXd& rewards, double epsilon) {
  if (rewards.size() == 0) throw std::invalid_argument("reps: no rewards");
  if (epsilon <= 0.0) throw std::invalid_argument("reps: epsilon must be positive");
  const Eigen::VectorXd deltas = rewards.array() - rewards.maxCoeff();

  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = std::log(1e-8), hi = std::log(1e8);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = detail::reps_dual(deltas, epsilon, std::exp(x1));
  double f2 = detail::reps_dual(deltas, epsilon, std::exp(x2));
  for (int it = 0; it < 160; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = detail::reps_dual(deltas, epsilon, std::exp(x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = detail::reps_dual(deltas, epsilon, std::exp(x2));
    }
  }
  return std::exp(0.5 * (lo + hi));
}

// Normalized weights exp((r_k - max r) / eta).
inline Eigen::VectorXd reps_weights(const Eigen::VectorXd& rewards, double eta) {
  if (eta <= 0.0) throw std::invalid_argument("reps: eta must be positive");
  Eigen::VectorXd w = ((rewards.array() - rewards.maxCoeff()) / eta).exp();
  return w / w.sum();
}

// Weighted ML Gaussian fit; diagonal models keep only per-coordinate
// variances.
inline GaussianSearchState weighted_ml_update(const Eigen::MatrixXd& samples,
                                              const Eigen::VectorXd& weights,
                                              bool full_covariance) {
  if (samples.rows() != weights.size())
    throw std::invalid_argument("reps: samples/weights length mismatch");
  GaussianSearchState s;
  s.mean = samples.transpose() * weights;
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  if (full_covariance) {
    s.cov = centered.transpose() * weights.asDiagonal() * centered;
  } else {
    Eigen::VectorXd var(samples.cols());
    for (int j = 0; j < samples.cols(); ++j)
      var[j] = (centered.col(j).array().square() * weights.array()).sum();
    s.cov = var.asDiagonal();
  }
  return s;
}

inline GaussianSearchState reps_update(const Eigen::MatrixXd& samples,
                                       const Eigen::VectorXd& rewards, double epsilon,
                                       bool full_covariance = false, double* eta_out = nullptr) {
  if (samples.rows() < samples.cols() + 2)
    throw std::invalid_argument("reps: need at least d + 2 samples");
  if (samples.rows() != rewards.size())
    throw std::invalid_argument("reps: samples/rewards length mismatch");
  const double eta = reps_temperature(rewards, epsilon);
  if (eta_out) *eta_out = eta;
  return weighted_ml_update(samples, reps_weights(rewards, eta), full_covariance);
}

// Draws from N(mean, cov) through an eigendecomposition, flooring tiny
// eigenvalues so a collapsed fit keeps exploring.
class GaussianSampler {
 public:
  explicit GaussianSampler(const GaussianSearchState& s) : mean_(s.mean) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
    if (es.info() != Eigen::Success) throw std::runtime_error("reps: covariance decomposition failed");
    scale_ = es.eigenvectors() *
             es.eigenvalues().cwiseMax(1e-18).cwiseSqrt().asDiagonal();
  }

  Eigen::VectorXd draw(Rng& rng) const {
    Eigen::VectorXd z(mean_.size());
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean_ + scale_ * z;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scale_;
};

}  // namespace crest::solver
