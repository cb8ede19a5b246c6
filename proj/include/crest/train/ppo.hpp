#pragma once

// One-step clipped policy-gradient training. Each episode is a single
// decision: read the context, emit task parameters, collect one reward. The
// actor maximizes the clipped importance-ratio surrogate with the critic as
// a baseline; the critic regresses onto raw rewards. After every update
// (and once before any), the mean policy is scored on fresh validation
// tasks; training stops at the configured threshold.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/sampler.hpp"
#include "crest/core/types.hpp"
#include "crest/env/environment.hpp"
#include "crest/nn/adam.hpp"
#include "crest/nn/network.hpp"
#include "crest/train/policy.hpp"

namespace crest::train {

enum class Randomization { FullContext, RelevantOnly };

// Training distribution: reduced policies never read the pinned variables,
// so pinning them keeps traces deterministic without losing coverage.
inline ContextSampler randomization_sampler(const SchemaPtr& schema, Randomization mode,
                                            const std::set<int>& relevant) {
  ContextSampler s(schema);
  if (mode == Randomization::RelevantOnly) s.pin_irrelevant(relevant);
  return s;
}

struct TrainConfig {
  int batch_size = 512;
  double learning_rate = 3e-3;
  double clip_ratio = 0.2;
  int epochs_per_update = 4;
  int validation_tasks = 50;
  double solve_threshold = -0.01;
  int max_updates = 500;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < cfg.validation_tasks)
    throw std::invalid_argument("train: batch_size must be >= validation_tasks");
  if (cfg.validation_tasks < 1)
    throw std::invalid_argument("train: validation_tasks must be >= 1");
  if (!(cfg.clip_ratio > 0.0 && cfg.clip_ratio < 1.0))
    throw std::invalid_argument("train: clip_ratio must lie in (0, 1)");
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("train: learning_rate must be positive");
  if (cfg.epochs_per_update < 1)
    throw std::invalid_argument("train: epochs_per_update must be >= 1");
  if (cfg.max_updates < 0) throw std::invalid_argument("train: max_updates must be >= 0");
  if (!std::isfinite(cfg.solve_threshold))
    throw std::invalid_argument("train: solve_threshold must be finite");
}

struct TrainTraceRow {
  int update = 0;              // 0 is the pre-training evaluation
  double batch_reward = 0.0;   // NaN on the update-0 row (no batch yet)
  double validation_reward = 0.0;
  bool solved = false;
};

struct TrainTrace {
  std::vector<TrainTraceRow> rows;
  int updates_to_solve = -1;   // -1: never reached the threshold
  long long samples_used = 0;  // updates actually taken x batch_size
  bool solved = false;
  bool diverged = false;
};

struct ActorBatch {
  Eigen::MatrixXd contexts;      // rows are full context vectors
  Eigen::MatrixXd actions;       // rows are sampled parameter vectors
  Eigen::VectorXd old_log_prob;  // under the weights that sampled the actions
  Eigen::VectorXd advantages;
};

// Gradient of the clipped-surrogate loss
//   L = -(1/K) sum_k min(rho_k A_k, clip(rho_k, 1-c, 1+c) A_k)
// with respect to the actor weights and log_std. The min gates each sample:
// once the clipped branch is strictly smaller, that sample contributes no
// gradient (the clamp is flat there).
inline nn::NetworkWeights clipped_surrogate_gradient(const nn::NetworkSpec& actor,
                                                     const nn::NetworkWeights& w,
                                                     const ActorBatch& batch,
                                                     double clip_ratio,
                                                     double* loss_out = nullptr) {
  const Eigen::Index k_rows = batch.contexts.rows();
  if (k_rows == 0) throw std::invalid_argument("surrogate gradient: empty batch");
  nn::ForwardCache cache;
  const Eigen::MatrixXd means = nn::forward(actor, w, batch.contexts, &cache);
  const Eigen::VectorXd lp = gaussian_log_prob(batch.actions, means, w.log_std);

  Eigen::VectorXd gate(k_rows);
  double loss = 0.0;
  for (Eigen::Index k = 0; k < k_rows; ++k) {
    const double rho = std::exp(lp[k] - batch.old_log_prob[k]);
    const double a = batch.advantages[k];
    const double plain = rho * a;
    const double clipped =
        std::clamp(rho, 1.0 - clip_ratio, 1.0 + clip_ratio) * a;
    loss -= std::min(plain, clipped) / k_rows;
    gate[k] = plain <= clipped ? rho * a : 0.0;
  }

  // dL/d(mean_kj) = -(1/K) gate_k (a_kj - mean_kj) / sigma_j^2
  const Eigen::ArrayXd inv_var = (-2.0 * w.log_std.array()).exp();
  Eigen::MatrixXd d_mean = (batch.actions - means);
  d_mean.array().rowwise() *= inv_var.transpose();
  d_mean.array().colwise() *= -gate.array() / static_cast<double>(k_rows);

  nn::NetworkWeights grad = nn::backward(actor, w, cache, d_mean);
  // dlp/dlog_std_j = z_j^2 - 1
  for (Eigen::Index j = 0; j < w.log_std.size(); ++j) {
    double g = 0.0;
    const double inv_std = std::exp(-w.log_std[j]);
    for (Eigen::Index k = 0; k < k_rows; ++k) {
      const double z = (batch.actions(k, j) - means(k, j)) * inv_std;
      g += -gate[k] * (z * z - 1.0) / k_rows;
    }
    grad.log_std[j] = g;
  }
  if (loss_out) *loss_out = loss;
  return grad;
}

// Gradient of the critic's mean squared error against reward targets.
inline nn::NetworkWeights value_mse_gradient(const nn::NetworkSpec& critic,
                                             const nn::NetworkWeights& w,
                                             const Eigen::MatrixXd& contexts,
                                             const Eigen::VectorXd& targets,
                                             double* loss_out = nullptr) {
  nn::ForwardCache cache;
  const Eigen::MatrixXd values = nn::forward(critic, w, contexts, &cache);
  const Eigen::VectorXd diff = values.col(0) - targets;
  if (loss_out) *loss_out = diff.squaredNorm() / diff.size();
  return nn::backward(critic, w, cache, (2.0 / diff.size()) * diff);
}

template <env::TaskEnvironment Env>
TrainTrace pretrain(PolicyState& policy, const Env& environment, const ContextSampler& contexts,
                    const TrainConfig& cfg, Rng& rng) {
  validate(cfg);
  check_compatible(policy, environment);
  if (!(*contexts.schema_ptr() == *environment.schema_ptr()))
    throw std::invalid_argument("train: context sampler schema does not match environment");
  Rng val_rng(derive_seed(rng.raw(), tag("validation")));

  const int d = environment.param_dim();
  const int k_batch = cfg.batch_size;
  nn::AdamState actor_opt = nn::make_adam(policy.actor, true);
  nn::AdamState critic_opt = nn::make_adam(policy.critic, false);

  TrainTrace trace;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto record = [&](int update, double batch_reward) {
    const double val =
        validation_reward(policy, environment, contexts, cfg.validation_tasks, val_rng);
    const bool solved = val >= cfg.solve_threshold;
    trace.rows.push_back({update, batch_reward, val, solved});
    if (!std::isfinite(val)) {
      trace.diverged = true;
      return true;
    }
    if (solved) {
      trace.solved = true;
      trace.updates_to_solve = update;
      trace.samples_used = static_cast<long long>(update) * k_batch;
      return true;
    }
    return false;
  };
  if (record(0, nan)) return trace;

  std::vector<ContextVector> batch_contexts;
  batch_contexts.reserve(k_batch);
  for (int update = 1; update <= cfg.max_updates; ++update) {
    batch_contexts.clear();
    Eigen::MatrixXd x(k_batch, environment.schema_ptr()->dimension());
    for (int k = 0; k < k_batch; ++k) {
      batch_contexts.push_back(contexts.sample(rng));
      x.row(k) = batch_contexts.back().values();
    }

    const Eigen::MatrixXd means = nn::forward(policy.actor, policy.actor_weights, x);
    if (!means.allFinite()) {
      trace.diverged = true;
      trace.samples_used = static_cast<long long>(update - 1) * k_batch;
      return trace;
    }
    ActorBatch batch;
    batch.contexts = std::move(x);
    batch.actions.resize(k_batch, d);
    const Eigen::ArrayXd std_dev = policy.actor_weights.log_std.array().exp();
    for (int k = 0; k < k_batch; ++k)
      for (int j = 0; j < d; ++j)
        batch.actions(k, j) = means(k, j) + std_dev[j] * rng.normal();
    batch.old_log_prob =
        gaussian_log_prob(batch.actions, means, policy.actor_weights.log_std);

    Eigen::VectorXd rewards(k_batch);
    for (int k = 0; k < k_batch; ++k)
      rewards[k] =
          environment.evaluate(batch_contexts[k], batch.actions.row(k), rng).reward;

    const Eigen::MatrixXd values =
        nn::forward(policy.critic, policy.critic_weights, batch.contexts);
    Eigen::VectorXd adv = rewards - values.col(0);
    const double adv_mean = adv.mean();
    const double adv_std =
        std::sqrt((adv.array() - adv_mean).square().sum() / adv.size());
    batch.advantages = (adv.array() - adv_mean) / (adv_std + 1e-8);

    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
      const nn::NetworkWeights actor_grad = clipped_surrogate_gradient(
          policy.actor, policy.actor_weights, batch, cfg.clip_ratio);
      nn::adam_step(policy.actor_weights, actor_grad, actor_opt, cfg.learning_rate);
      const nn::NetworkWeights critic_grad = value_mse_gradient(
          policy.critic, policy.critic_weights, batch.contexts, rewards);
      nn::adam_step(policy.critic_weights, critic_grad, critic_opt, cfg.learning_rate);
    }
    // keep exploration numerically sane; the bound is far outside useful range
    policy.actor_weights.log_std =
        policy.actor_weights.log_std.cwiseMax(-10.0).cwiseMin(2.0);

    trace.samples_used = static_cast<long long>(update) * k_batch;
    if (record(update, rewards.mean())) return trace;
  }
  return trace;
}

}  // namespace crest::train
