#pragma once

// Synthetic goal-reaching task: the context is an initial state s0, the
// parameters drive a state change ds (linear map or per-state scalar maps),
// and the reward is the negative distance between the goal-selected
// coordinates of s0 + ds and a fixed goal vector. Instances are generated so
// that every context within bounds stays solvable, including after
// single-variable interventions.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/types.hpp"

namespace crest::env {

enum class MapClass { Linear, Nonlinear };

enum class ScalarMap { Exponential, Sigmoid, Sine, Cosine };

inline double apply_map(ScalarMap m, double x) {
  switch (m) {
    case ScalarMap::Exponential: return std::exp(x);
    case ScalarMap::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case ScalarMap::Sine: return std::sin(x);
    case ScalarMap::Cosine: return std::cos(x);
  }
  return 0.0;
}

// Value range of a map over inputs in [-1, 1].
inline std::pair<double, double> map_range(ScalarMap m) {
  switch (m) {
    case ScalarMap::Exponential: return {std::exp(-1.0), std::exp(1.0)};
    case ScalarMap::Sigmoid: return {1.0 / (1.0 + std::exp(1.0)), 1.0 / (1.0 + std::exp(-1.0))};
    case ScalarMap::Sine: return {std::sin(-1.0), std::sin(1.0)};
    case ScalarMap::Cosine: return {std::cos(1.0), 1.0};
  }
  return {0.0, 0.0};
}

struct MathManipConfig {
  int dim = 8;
  int n_relevant = 4;
  int goal_dim = 4;
  MapClass map_class = MapClass::Linear;
  double noise_sigma = 0.0;
  double context_half_width = 0.09;
  double success_threshold = -0.065;
  double theta_bound_linear = 2.0;  // nonlinear maps always use [-1, 1]
};

class MathManipEnv {
 public:
  // Random solvable instance: a relevant set tau, a one-hot goal-selection
  // row per tau variable, parameter-to-state structure, and a reachable goal.
  static MathManipEnv generate(const MathManipConfig& cfg, Rng& rng) {
    if (cfg.n_relevant <= 0 || cfg.n_relevant > cfg.dim)
      throw std::invalid_argument("mathmanip: n_relevant must be in [1, dim]");
    if (cfg.goal_dim != cfg.n_relevant)
      throw std::invalid_argument(
          "mathmanip: goal rows are one-hot over distinct relevant variables, "
          "so goal_dim must equal n_relevant");
    if (cfg.noise_sigma < 0.0) throw std::invalid_argument("mathmanip: negative noise");

    MathManipEnv env;
    env.cfg_ = cfg;

    std::vector<ContextVariable> vars;
    for (int i = 0; i < cfg.dim; ++i)
      vars.push_back({"s" + std::to_string(i), -cfg.context_half_width, cfg.context_half_width,
                      "state"});
    env.schema_ = std::make_shared<ContextSchema>(std::move(vars));

    // tau: the goal-selected state indices, one goal row each
    std::vector<int> all(cfg.dim);
    std::iota(all.begin(), all.end(), 0);
    for (int i = cfg.dim - 1; i > 0; --i) std::swap(all[i], all[rng.index(i + 1)]);
    env.goal_rows_.assign(all.begin(), all.begin() + cfg.n_relevant);
    std::sort(env.goal_rows_.begin(), env.goal_rows_.end());

    env.truth_.relevant.insert(env.goal_rows_.begin(), env.goal_rows_.end());
    env.truth_.parents.assign(cfg.dim, {});

    const ContextVector s0_ref = sample_context(env.schema_, rng);

    if (cfg.map_class == MapClass::Linear) {
      // One driving parameter column per selected row, distinct across rows.
      std::vector<int> params(cfg.dim);
      std::iota(params.begin(), params.end(), 0);
      for (int i = cfg.dim - 1; i > 0; --i) std::swap(params[i], params[rng.index(i + 1)]);
      env.a_ = Eigen::MatrixXd::Zero(cfg.dim, cfg.dim);
      env.primary_param_.resize(cfg.n_relevant);
      for (int k = 0; k < cfg.n_relevant; ++k) {
        const int row = env.goal_rows_[k];
        const int col = params[k];
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        env.a_(row, col) = sign * rng.uniform(1.0, 2.0);
        env.primary_param_[k] = col;
        env.truth_.parents[col].insert(row);
      }
      Eigen::VectorXd theta_goal(cfg.dim);
      for (int i = 0; i < cfg.dim; ++i) theta_goal[i] = rng.uniform(-0.3, 0.3);
      Eigen::VectorXd ds = env.a_ * theta_goal;
      env.goal_.resize(cfg.n_relevant);
      for (int k = 0; k < cfg.n_relevant; ++k)
        env.goal_[k] = s0_ref[env.goal_rows_[k]] + ds[env.goal_rows_[k]];
    } else {
      // Diagonal structure: parameter t drives state t through its map. The
      // goal is kept far enough from the map's range ends that any context
      // (and any intervention) leaves the required value reachable.
      env.fns_.resize(cfg.dim);
      for (int i = 0; i < cfg.dim; ++i)
        env.fns_[i] = static_cast<ScalarMap>(rng.index(4));
      env.primary_param_ = env.goal_rows_;
      for (int t : env.goal_rows_) env.truth_.parents[t].insert(t);

      const double margin = 2.0 * cfg.context_half_width;
      env.goal_.resize(cfg.n_relevant);
      for (int k = 0; k < cfg.n_relevant; ++k) {
        const int t = env.goal_rows_[k];
        auto [lo, hi] = map_range(env.fns_[t]);
        if (hi - lo <= 2.0 * margin)
          throw std::invalid_argument("mathmanip: context width too large for map range");
        const double v = rng.uniform(lo + margin, hi - margin);
        env.goal_[k] = s0_ref[t] + v;
      }
    }
    return env;
  }

  const SchemaPtr& schema_ptr() const { return schema_; }
  int param_dim() const { return cfg_.dim; }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    for (int i = 0; i < cfg_.dim; ++i) names.push_back("a" + std::to_string(i));
    return names;
  }

  Eigen::VectorXd theta_lower() const {
    const double b = cfg_.map_class == MapClass::Linear ? cfg_.theta_bound_linear : 1.0;
    return Eigen::VectorXd::Constant(cfg_.dim, -b);
  }

  Eigen::VectorXd theta_upper() const {
    const double b = cfg_.map_class == MapClass::Linear ? cfg_.theta_bound_linear : 1.0;
    return Eigen::VectorXd::Constant(cfg_.dim, b);
  }

  double success_threshold() const { return cfg_.success_threshold; }
  double noise_sigma() const { return cfg_.noise_sigma; }

  TaskOutcome evaluate(const ContextVector& c, const Eigen::VectorXd& theta, Rng& rng) const {
    if (theta.size() != cfg_.dim) throw std::invalid_argument("mathmanip: theta size mismatch");
    Eigen::VectorXd th = theta.cwiseMax(theta_lower()).cwiseMin(theta_upper());
    Eigen::VectorXd ds(cfg_.dim);
    if (cfg_.map_class == MapClass::Linear) {
      ds = a_ * th;
    } else {
      for (int i = 0; i < cfg_.dim; ++i) ds[i] = apply_map(fns_[i], th[i]);
    }
    if (cfg_.noise_sigma > 0.0)
      for (int i = 0; i < cfg_.dim; ++i) ds[i] += rng.normal(0.0, cfg_.noise_sigma);

    double sq = 0.0;
    for (int k = 0; k < cfg_.n_relevant; ++k) {
      const int row = goal_rows_[k];
      const double resid = c[row] + ds[row] - goal_[k];
      sq += resid * resid;
    }
    const double norm = std::sqrt(sq);
    return make_outcome(-norm, cfg_.success_threshold, {{"residual_norm", norm}});
  }

  const StructureGraph& ground_truth() const { return truth_; }
  const std::vector<int>& goal_rows() const { return goal_rows_; }
  const Eigen::VectorXd& goal() const { return goal_; }
  const MathManipConfig& config() const { return cfg_; }

  // One-hot goal selection matrix (goal_dim x dim).
  Eigen::MatrixXd g_matrix() const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(cfg_.n_relevant, cfg_.dim);
    for (int k = 0; k < cfg_.n_relevant; ++k) g(k, goal_rows_[k]) = 1.0;
    return g;
  }

  const Eigen::MatrixXd& linear_map() const { return a_; }
  const std::vector<ScalarMap>& scalar_maps() const { return fns_; }

 private:
  MathManipConfig cfg_;
  SchemaPtr schema_;
  std::vector<int> goal_rows_;
  std::vector<int> primary_param_;
  Eigen::MatrixXd a_;
  std::vector<ScalarMap> fns_;
  Eigen::VectorXd goal_;
  StructureGraph truth_;
};

}  // namespace crest::env
