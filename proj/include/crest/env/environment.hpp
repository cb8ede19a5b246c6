#pragma once

#include <Eigen/Core>
#include <concepts>
#include <string>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/types.hpp"

namespace crest::env {

// A contextual task: bounded parameter vector in, scalar-reward outcome out.
// noise_sigma() == 0 promises bit-reproducible evaluation for equal inputs.
template <class E>
concept TaskEnvironment = requires(const E& e, const ContextVector& c,
                                   const Eigen::VectorXd& theta, Rng& rng) {
  { e.schema_ptr() } -> std::convertible_to<SchemaPtr>;
  { e.param_dim() } -> std::convertible_to<int>;
  { e.param_names() } -> std::convertible_to<std::vector<std::string>>;
  { e.theta_lower() } -> std::convertible_to<Eigen::VectorXd>;
  { e.theta_upper() } -> std::convertible_to<Eigen::VectorXd>;
  { e.success_threshold() } -> std::convertible_to<double>;
  { e.noise_sigma() } -> std::convertible_to<double>;
  { e.evaluate(c, theta, rng) } -> std::convertible_to<TaskOutcome>;
};

template <class E>
Eigen::VectorXd clamp_theta(const E& e, const Eigen::VectorXd& theta) {
  return theta.cwiseMax(e.theta_lower()).cwiseMin(e.theta_upper());
}

// Same task, stricter (or looser) bar for success. Lets a caller demand
// solutions with headroom, e.g. well inside the nominal pass boundary.
template <TaskEnvironment E>
class ThresholdOverride {
 public:
  ThresholdOverride(const E& base, double threshold) : base_(&base), threshold_(threshold) {}

  SchemaPtr schema_ptr() const { return base_->schema_ptr(); }
  int param_dim() const { return base_->param_dim(); }
  std::vector<std::string> param_names() const { return base_->param_names(); }
  Eigen::VectorXd theta_lower() const { return base_->theta_lower(); }
  Eigen::VectorXd theta_upper() const { return base_->theta_upper(); }
  double success_threshold() const { return threshold_; }
  double noise_sigma() const { return base_->noise_sigma(); }

  TaskOutcome evaluate(const ContextVector& c, const Eigen::VectorXd& theta, Rng& rng) const {
    TaskOutcome out = base_->evaluate(c, theta, rng);
    out.success = out.reward >= threshold_;
    return out;
  }

 private:
  const E* base_;
  double threshold_;
};

}  // namespace crest::env
