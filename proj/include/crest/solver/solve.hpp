#pragma once

// Per-context episodic search: sample parameter vectors from a Gaussian,
// evaluate them on the task, stop at the first success, and otherwise refit
// the distribution and continue until the evaluation budget runs out.

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/env/environment.hpp"
#include "crest/solver/reps.hpp"

namespace crest::solver {

struct SolverOptions {
  int samples_per_iteration = 64;
  double epsilon_kl = 0.5;
  double init_std_scale = 0.1;    // fraction of each parameter's range
  double warm_cov_scale = 0.25;   // covariance shrink when warm-started
  int restart_period = 40;        // iterations before re-centering on the best
  bool full_covariance = false;
  bool record_trace = false;
};

struct SolveTraceRow {
  int iteration = 0;
  double best_reward = 0.0;
  double eta = 0.0;
};

struct SolveResult {
  Eigen::VectorXd theta;
  double reward = 0.0;
  bool solved = false;
  int evaluations = 0;
  int iterations = 0;
  std::vector<SolveTraceRow> trace;
};

template <env::TaskEnvironment Env>
SolveResult solve_context(const Env& environment, const ContextVector& c,
                          const std::optional<Eigen::VectorXd>& theta_init, int budget, Rng& rng,
                          const SolverOptions& opt = {}) {
  if (budget <= 0) throw std::invalid_argument("solve_context: budget must be positive");
  if (opt.samples_per_iteration < 2)
    throw std::invalid_argument("solve_context: need at least 2 samples per iteration");

  const Eigen::VectorXd lo = environment.theta_lower();
  const Eigen::VectorXd hi = environment.theta_upper();
  const double threshold = environment.success_threshold();
  const int d = environment.param_dim();

  SolveResult res;
  Eigen::VectorXd start = theta_init ? Eigen::VectorXd(theta_init->cwiseMax(lo).cwiseMin(hi))
                                     : Eigen::VectorXd(0.5 * (lo + hi));
  res.theta = start;
  res.reward = environment.evaluate(c, start, rng).reward;
  res.evaluations = 1;
  if (res.reward >= threshold) {
    res.solved = true;
    return res;
  }

  Eigen::VectorXd init_std = opt.init_std_scale * (hi - lo);
  if (theta_init) init_std *= std::sqrt(opt.warm_cov_scale);
  GaussianSearchState state = make_search_state(start, init_std);

  const int k = opt.samples_per_iteration;
  Eigen::MatrixXd samples(k, d);
  Eigen::VectorXd rewards(k);
  int since_restart = 0;
  while (res.evaluations + k <= budget) {
    ++res.iterations;
    const GaussianSampler sampler(state);
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd theta = sampler.draw(rng).cwiseMax(lo).cwiseMin(hi);
      const double r = environment.evaluate(c, theta, rng).reward;
      ++res.evaluations;
      samples.row(i) = theta;
      rewards[i] = r;
      if (r > res.reward) {
        res.reward = r;
        res.theta = theta;
      }
      if (r >= threshold) {
        res.solved = true;
        return res;
      }
    }
    double eta = 0.0;
    state = reps_update(samples, rewards, opt.epsilon_kl, opt.full_covariance, &eta);
    if (opt.record_trace) res.trace.push_back({res.iterations, res.reward, eta});

    // the fit eventually collapses on hard landscapes; re-center on the best
    // parameters found and re-inflate to the warm-start spread
    if (opt.restart_period > 0 && ++since_restart >= opt.restart_period) {
      since_restart = 0;
      const Eigen::VectorXd std_r =
          opt.init_std_scale * std::sqrt(opt.warm_cov_scale) * (hi - lo);
      state = make_search_state(res.theta, std_r);
    }
  }
  return res;
}

}  // namespace crest::solver
