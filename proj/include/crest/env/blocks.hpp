#pragma once

// Block stacking with a pick-and-place skill. The context describes each
// block's table pose (x, z), yaw, height, and RGB color; the parameters are
// the displacement (dx, dy, dz) applied to block 0. Placing block 0 on block 1
// requires dx = x1 - x0, dy = h1, dz = z1 - z0; everything else, including
// block 0's own height, cancels out of the reward.

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/sampler.hpp"
#include "crest/core/types.hpp"

namespace crest::env {

struct BlocksConfig {
  int n_blocks = 2;
  double pos_half_width = 0.25;
  double yaw_half_width = 3.14159265358979323846;
  double height_min = 0.04;
  double height_max = 0.10;
  double success_threshold = -0.01;
  bool discrete_heights = false;  // snap heights to {0.057, 0.076}
};

inline ContextSchema blocks_schema(const BlocksConfig& cfg) {
  if (cfg.n_blocks < 2) throw std::invalid_argument("blocks: need at least two blocks");
  std::vector<ContextVariable> vars;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "b" + std::to_string(b) + "_";
    const std::string g = "block_" + std::to_string(b);
    vars.push_back({p + "x", -cfg.pos_half_width, cfg.pos_half_width, g});
    vars.push_back({p + "z", -cfg.pos_half_width, cfg.pos_half_width, g});
    vars.push_back({p + "yaw", -cfg.yaw_half_width, cfg.yaw_half_width, g});
    vars.push_back({p + "h", cfg.height_min, cfg.height_max, "height"});
    vars.push_back({p + "cr", 0.0, 1.0, "color"});
    vars.push_back({p + "cg", 0.0, 1.0, "color"});
    vars.push_back({p + "cb", 0.0, 1.0, "color"});
  }
  return ContextSchema(std::move(vars));
}

class BlocksEnv {
 public:
  explicit BlocksEnv(BlocksConfig cfg = {})
      : cfg_(cfg), schema_(std::make_shared<ContextSchema>(blocks_schema(cfg))) {}

  const SchemaPtr& schema_ptr() const { return schema_; }
  int param_dim() const { return 3; }
  std::vector<std::string> param_names() const { return {"dx", "dy", "dz"}; }

  Eigen::VectorXd theta_lower() const {
    Eigen::VectorXd lo(3);
    lo << -2.2 * cfg_.pos_half_width, 0.0, -2.2 * cfg_.pos_half_width;
    return lo;
  }

  Eigen::VectorXd theta_upper() const {
    Eigen::VectorXd hi(3);
    hi << 2.2 * cfg_.pos_half_width, 2.0 * cfg_.height_max, 2.2 * cfg_.pos_half_width;
    return hi;
  }

  double success_threshold() const { return cfg_.success_threshold; }
  double noise_sigma() const { return 0.0; }

  TaskOutcome evaluate(const ContextVector& c, const Eigen::VectorXd& theta, Rng&) const {
    const Eigen::Vector3d err = placement_error(c, theta);
    const double d = err.norm();
    return make_outcome(-d, cfg_.success_threshold, {{"distance", d}});
  }

  // Displacement making the final position hit the goal exactly.
  Eigen::VectorXd optimal_params(const ContextVector& c) const {
    const int o1 = 7;  // block 1 offset in the schema
    Eigen::VectorXd th(3);
    th << c[o1 + 0] - c[0], c[o1 + 3], c[o1 + 1] - c[1];
    return th;
  }

  // Relevant set and per-parameter dependencies implied by the closed form.
  StructureGraph ground_truth() const {
    StructureGraph g;
    const int x0 = 0, z0 = 1, x1 = 7, z1 = 8, h1 = 10;
    g.relevant = {x0, z0, x1, z1, h1};
    g.parents = {{x0, x1}, {h1}, {z0, z1}};
    return g;
  }

  ContextSampler make_sampler() const {
    ContextSampler s(schema_);
    if (cfg_.discrete_heights) s.discretize_group("height", 0.057, 0.076);
    return s;
  }

  const BlocksConfig& config() const { return cfg_; }

  Eigen::Vector3d placement_error(const ContextVector& c, const Eigen::VectorXd& theta) const {
    if (theta.size() != 3) throw std::invalid_argument("blocks: theta must have 3 entries");
    const Eigen::VectorXd th = theta.cwiseMax(theta_lower()).cwiseMin(theta_upper());
    const int o1 = 7;
    // final minus goal: (x0+dx-x1, dy-h1, z0+dz-z1); block heights other than
    // h1 cancel between the lifted block's center and the stack goal height
    return {c[0] + th[0] - c[o1 + 0], th[1] - c[o1 + 3], c[1] + th[2] - c[o1 + 1]};
  }

 private:
  BlocksConfig cfg_;
  SchemaPtr schema_;
};

// Deployment-side evaluation: same geometry plus isotropic execution noise on
// the achieved position and a looser success threshold. Distribution shifts
// (color half-spaces) belong to the context sampler, not the environment.
class BlocksTargetEnv {
 public:
  BlocksTargetEnv(BlocksConfig cfg, double exec_noise_sigma, double success_threshold = -0.025)
      : base_(cfg), sigma_(exec_noise_sigma), threshold_(success_threshold) {
    if (sigma_ < 0.0) throw std::invalid_argument("blocks target: negative noise");
  }

  const SchemaPtr& schema_ptr() const { return base_.schema_ptr(); }
  int param_dim() const { return 3; }
  std::vector<std::string> param_names() const { return base_.param_names(); }
  Eigen::VectorXd theta_lower() const { return base_.theta_lower(); }
  Eigen::VectorXd theta_upper() const { return base_.theta_upper(); }
  double success_threshold() const { return threshold_; }
  double noise_sigma() const { return sigma_; }
  ContextSampler make_sampler() const { return base_.make_sampler(); }

  TaskOutcome evaluate(const ContextVector& c, const Eigen::VectorXd& theta, Rng& rng) const {
    Eigen::Vector3d err = base_.placement_error(c, theta);
    if (sigma_ > 0.0)
      for (int i = 0; i < 3; ++i) err[i] += rng.normal(0.0, sigma_);
    const double d = err.norm();
    return make_outcome(-d, threshold_, {{"distance", d}});
  }

  const BlocksEnv& internal() const { return base_; }

 private:
  BlocksEnv base_;
  double sigma_;
  double threshold_;
};

}  // namespace crest::env
