#pragma once

// Regression of the policy mean onto a task's closed-form optimum. Gives
// tests and experiments a deterministic, already-solving initializer without
// running policy-gradient training.

#include <Eigen/Core>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/sampler.hpp"
#include "crest/nn/adam.hpp"
#include "crest/nn/network.hpp"

namespace crest::train {

template <class E>
concept OracleEnvironment = requires(const E& e, const ContextVector& c) {
  { e.optimal_params(c) } -> std::convertible_to<Eigen::VectorXd>;
  { e.schema_ptr() } -> std::convertible_to<SchemaPtr>;
  { e.param_dim() } -> std::convertible_to<int>;
};

struct SupervisedResult {
  nn::NetworkWeights weights;
  double rmse = 0.0;
  Eigen::VectorXd rmse_per_output;
};

struct SupervisedConfig {
  int iterations = 3000;
  int batch_size = 256;
  double learning_rate = 3e-3;
  double final_lr_fraction = 1e-3;  // geometric decay so the fit settles
  int polish_period = 250;          // exact output-layer solve every so often
  double hidden_init_scale = 0.3;   // start near the tanh linear regime
};

namespace detail {

// Exact least-squares fit of every head's (linear) output layer on the full
// sample set. Leaves the hidden layers alone, so descent between polishes
// only has to shape features the optimal readout cannot already explain.
inline void solve_output_layers(const nn::NetworkSpec& actor, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& t, nn::NetworkWeights& w) {
  nn::ForwardCache cache;
  nn::forward(actor, w, x, &cache);
  int col = 0;
  for (std::size_t h = 0; h < actor.heads.size(); ++h) {
    const int out_dim = actor.heads[h].output_dim;
    const std::size_t n_layers = w.heads[h].layers.size();
    const Eigen::MatrixXd& a_prev = cache.acts[h][n_layers - 1];
    Eigen::MatrixXd design(x.rows(), a_prev.cols() + 1);
    design << a_prev, Eigen::VectorXd::Ones(x.rows());
    const Eigen::MatrixXd sol =
        design.colPivHouseholderQr().solve(t.middleCols(col, out_dim));
    auto& last = w.heads[h].layers.back();
    last.W = sol.topRows(a_prev.cols()).transpose();
    last.b = sol.row(a_prev.cols()).transpose();
    col += out_dim;
  }
}

}  // namespace detail

template <OracleEnvironment Env>
SupervisedResult supervised_pretrain_oracle(const nn::NetworkSpec& actor, const Env& environment,
                                            int n, Rng& rng,
                                            const SupervisedConfig& cfg = {}) {
  if (n < 1) throw std::invalid_argument("supervised pretrain: need at least one context");
  if (cfg.iterations < 1 || cfg.batch_size < 1 || cfg.learning_rate <= 0.0)
    throw std::invalid_argument("supervised pretrain: bad optimizer settings");
  if (actor.output_dim() != environment.param_dim())
    throw std::invalid_argument("supervised pretrain: output does not match task parameters");

  const ContextSampler contexts(environment.schema_ptr());
  const int dim = environment.schema_ptr()->dimension();
  const int d = environment.param_dim();
  Eigen::MatrixXd x(n, dim), t(n, d);
  for (int i = 0; i < n; ++i) {
    const ContextVector c = contexts.sample(rng);
    x.row(i) = c.values();
    t.row(i) = environment.optimal_params(c);
  }

  SupervisedResult out;
  out.weights = nn::init_weights(actor, rng, true);
  // shrinking the hidden init keeps early features near-linear, which lowers
  // the output-layer least-squares floor; descent re-grows them as needed
  for (auto& head : out.weights.heads)
    for (std::size_t k = 0; k + 1 < head.layers.size(); ++k)
      head.layers[k].W *= cfg.hidden_init_scale;
  nn::AdamState opt = nn::make_adam(actor, true);
  const int k_batch = std::min(cfg.batch_size, n);
  const double decay =
      std::pow(cfg.final_lr_fraction, 1.0 / std::max(1, cfg.iterations - 1));
  double lr = cfg.learning_rate;
  for (int it = 0; it < cfg.iterations; ++it, lr *= decay) {
    Eigen::MatrixXd xb(k_batch, dim), tb(k_batch, d);
    for (int k = 0; k < k_batch; ++k) {
      const int row = rng.index(n);
      xb.row(k) = x.row(row);
      tb.row(k) = t.row(row);
    }
    nn::ForwardCache cache;
    const Eigen::MatrixXd y = nn::forward(actor, out.weights, xb, &cache);
    const Eigen::MatrixXd diff = y - tb;
    const nn::NetworkWeights grad =
        nn::backward(actor, out.weights, cache, (2.0 / (k_batch * d)) * diff);
    nn::adam_step(out.weights, grad, opt, lr);
    if (cfg.polish_period > 0 && (it + 1) % cfg.polish_period == 0)
      detail::solve_output_layers(actor, x, t, out.weights);
  }
  detail::solve_output_layers(actor, x, t, out.weights);

  const Eigen::MatrixXd y = nn::forward(actor, out.weights, x);
  const Eigen::MatrixXd diff = y - t;
  out.rmse = std::sqrt(diff.squaredNorm() / (static_cast<double>(n) * d));
  out.rmse_per_output = (diff.array().square().colwise().mean()).sqrt().transpose();
  return out;
}

}  // namespace crest::train
