#pragma once

// Gaussian policy over task parameters: a network emits the mean per
// context, a state-independent per-dimension log standard deviation drives
// exploration, and a separate critic network scores contexts.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/sampler.hpp"
#include "crest/env/environment.hpp"
#include "crest/nn/builder.hpp"
#include "crest/nn/network.hpp"

namespace crest::train {

struct PolicyState {
  nn::NetworkSpec actor;
  nn::NetworkSpec critic;
  nn::NetworkWeights actor_weights;   // log_std holds the exploration scale
  nn::NetworkWeights critic_weights;  // no log_std
};

inline PolicyState make_policy_state(const nn::BuiltPolicy& built, Rng& rng) {
  PolicyState p;
  p.actor = built.actor;
  p.critic = built.critic;
  p.actor_weights = nn::init_weights(built.actor, rng, true);
  p.critic_weights = nn::init_weights(built.critic, rng, false);
  return p;
}

// Environments clamp parameters to their bounds, so exploration noise much
// wider than the feasible box saturates there and the reward stops carrying
// gradient signal. Scale the initial spread to the box instead.
template <env::TaskEnvironment Env>
PolicyState make_policy_state(const nn::BuiltPolicy& built, const Env& environment, Rng& rng,
                              double exploration_fraction = 0.25) {
  PolicyState p = make_policy_state(built, rng);
  p.actor_weights.log_std =
      ((environment.theta_upper() - environment.theta_lower()) * exploration_fraction)
          .array()
          .log();
  return p;
}

// The policy must read only existing context variables and emit one value
// per task parameter.
template <env::TaskEnvironment Env>
void check_compatible(const PolicyState& policy, const Env& environment) {
  const int dim = environment.schema_ptr()->dimension();
  if (policy.actor.max_input_index() >= dim || policy.critic.max_input_index() >= dim)
    throw std::invalid_argument("policy reads context variables the task does not have");
  if (policy.actor.output_dim() != environment.param_dim())
    throw std::invalid_argument("policy output dimension does not match task parameters");
  if (policy.critic.output_dim() != 1)
    throw std::invalid_argument("critic must emit a single value");
  if (policy.actor_weights.log_std.size() != policy.actor.output_dim())
    throw std::invalid_argument("policy log_std length does not match its output");
}

// Row-wise diagonal-Gaussian log density of `actions` under `means`.
inline Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& actions,
                                         const Eigen::MatrixXd& means,
                                         const Eigen::VectorXd& log_std) {
  if (actions.rows() != means.rows() || actions.cols() != means.cols() ||
      actions.cols() != log_std.size())
    throw std::invalid_argument("log_prob: shape mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  Eigen::VectorXd lp(actions.rows());
  for (Eigen::Index k = 0; k < actions.rows(); ++k) {
    const Eigen::ArrayXd z = (actions.row(k) - means.row(k)).transpose().array() * inv_std;
    lp[k] = (-0.5 * z.square() - log_std.array() - half_log_2pi).sum();
  }
  return lp;
}

// Per-task rewards of the deterministic (mean-action) policy on fresh tasks.
// A non-finite network output fills the remaining entries with NaN.
template <env::TaskEnvironment Env>
Eigen::VectorXd validation_rewards(const PolicyState& policy, const Env& environment,
                                   const ContextSampler& contexts, int n_tasks, Rng& rng) {
  Eigen::VectorXd r(n_tasks);
  for (int t = 0; t < n_tasks; ++t) {
    const ContextVector c = contexts.sample(rng);
    const Eigen::VectorXd mean = nn::forward(policy.actor, policy.actor_weights, c.values());
    if (!mean.allFinite()) {
      r.tail(n_tasks - t).setConstant(std::numeric_limits<double>::quiet_NaN());
      return r;
    }
    r[t] = environment.evaluate(c, mean, rng).reward;
  }
  return r;
}

// Mean reward of the deterministic policy over fresh tasks. NaN signals a
// non-finite network output, which callers treat as divergence.
template <env::TaskEnvironment Env>
double validation_reward(const PolicyState& policy, const Env& environment,
                         const ContextSampler& contexts, int n_tasks, Rng& rng) {
  const Eigen::VectorXd r = validation_rewards(policy, environment, contexts, n_tasks, rng);
  double sum = 0.0;
  for (int t = 0; t < r.size(); ++t) sum += r[t];
  return sum / n_tasks;
}

}  // namespace crest::train
