#pragma once

// Crate-lid closing with an arc-following skill. The lid hinges on an axis
// through the crate position, rotated about world y by the crate yaw. A
// gripper holds the lid at radius grasp_x from the hinge and offset grasp_z
// along it, so the grasp traces a circle as the lid swings. The skill takes
// five parameters: an arc center (x, y, z) plus azimuth and elevation sweeps,
// and emits waypoints by interpolating spherical coordinates (polar axis
// world y) starting from the gripper's actual position. The lid follows the
// projection of each waypoint onto its hinge circle; the episode succeeds
// when the lid ends closed (angle 0 from an initial opening of goal_angle).
//
// Placing the arc center on the hinge axis at the grasp's axial offset, with
// zero azimuth sweep and elevation sweep -goal_angle, reproduces the lid
// circle exactly. Grasp radius drops out: the generator starts from the real
// gripper position, so the arc adapts to it.

#include <Eigen/Core>
#include <algorithm>
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

struct CrateConfig {
  int n_fillers = 10;      // distractor blocks appended to the context
  int n_waypoints = 16;
  double kappa = 0.6;      // lid travel is divided by (1 + kappa * stiffness)
  double grasp_y_offset = 0.02;  // regrasp shift on stiff crates
  double error_weight = 5.0;     // path error weight in the internal reward
  double success_threshold = -0.05;
};

inline ContextSchema crate_schema(const CrateConfig& cfg) {
  if (cfg.n_fillers < 0) throw std::invalid_argument("crate: negative filler count");
  const double pi = 3.14159265358979323846;
  std::vector<ContextVariable> vars = {
      {"crate_x", -0.4, 0.4, "crate"},
      {"crate_y", 0.0, 0.3, "crate"},
      {"crate_z", -0.4, 0.4, "crate"},
      {"crate_phi", -1.2, 1.2, "crate"},
      {"grasp_x", 0.08, 0.25, "grasp"},
      {"grasp_z", -0.2, 0.2, "grasp"},
      {"goal_angle", 0.3, 1.0, "goal"},
      {"crate_cr", 0.0, 1.0, "color"},
      {"crate_cg", 0.0, 1.0, "color"},
      {"crate_cb", 0.0, 1.0, "color"},
  };
  for (int b = 0; b < cfg.n_fillers; ++b) {
    const std::string p = "f" + std::to_string(b) + "_";
    const std::string g = "filler_" + std::to_string(b);
    vars.push_back({p + "x", -0.25, 0.25, g});
    vars.push_back({p + "z", -0.25, 0.25, g});
    vars.push_back({p + "yaw", -pi, pi, g});
    vars.push_back({p + "h", 0.04, 0.10, g});
    vars.push_back({p + "cr", 0.0, 1.0, g});
    vars.push_back({p + "cg", 0.0, 1.0, g});
    vars.push_back({p + "cb", 0.0, 1.0, g});
  }
  return ContextSchema(std::move(vars));
}

// Waypoints along a constant-radius arc around `center`, sweeping azimuth by
// dgamma and elevation by dphi from the start point, at fractions k/n for
// k = 1..n. Elevation and azimuth use world y as the polar axis; the formula
// stays defined past the poles, so sweeps may overshoot freely.
inline std::vector<Eigen::Vector3d> crate_arc_waypoints(const Eigen::Vector3d& center,
                                                        double dgamma, double dphi,
                                                        const Eigen::Vector3d& start, int n) {
  if (n < 1) throw std::invalid_argument("arc: need at least one waypoint");
  const Eigen::Vector3d d = start - center;
  const double rho = d.norm();
  if (rho < 1e-12) throw std::domain_error("arc: start coincides with center");
  const double elev0 = std::atan2(d.y(), std::hypot(d.x(), d.z()));
  const double azim0 = std::atan2(d.z(), d.x());
  std::vector<Eigen::Vector3d> out;
  out.reserve(n);
  for (int k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    const double a = elev0 + t * dphi;
    const double b = azim0 + t * dgamma;
    out.push_back(center + rho * Eigen::Vector3d(std::cos(a) * std::cos(b), std::sin(a),
                                                 std::cos(a) * std::sin(b)));
  }
  return out;
}

struct ArcTrace {
  std::vector<Eigen::Vector3d> desired;
  std::vector<Eigen::Vector3d> realized;
  std::vector<double> lid_angle;
  std::vector<double> waypoint_error;
  double final_angle_error = 0.0;
  double mean_path_error = 0.0;
  double reward = 0.0;
};

namespace detail {

struct LidGeometry {
  Eigen::Vector3d radial;        // in-plane direction at lid angle 0
  Eigen::Vector3d axis;          // hinge axis
  Eigen::Vector3d circle_center; // hinge axis point at the grasp's offset
  double radius = 0.0;
  double open_angle = 0.0;

  Eigen::Vector3d at(double lid_angle) const {
    return circle_center +
           radius * (std::cos(lid_angle) * radial + std::sin(lid_angle) * Eigen::Vector3d::UnitY());
  }
};

inline LidGeometry lid_geometry(const ContextVector& c, double y_offset) {
  const double phi = c[3];
  LidGeometry g;
  g.radial = {std::cos(phi), 0.0, -std::sin(phi)};
  g.axis = {std::sin(phi), 0.0, std::cos(phi)};
  const Eigen::Vector3d hinge(c[0], c[1] + y_offset, c[2]);
  g.circle_center = hinge + c[5] * g.axis;
  g.radius = c[4];
  g.open_angle = c[6];
  return g;
}

}  // namespace detail

class CrateEnv {
 public:
  explicit CrateEnv(CrateConfig cfg = {})
      : cfg_(cfg), schema_(std::make_shared<ContextSchema>(crate_schema(cfg))) {
    if (cfg.n_waypoints < 1) throw std::invalid_argument("crate: need at least one waypoint");
  }

  const SchemaPtr& schema_ptr() const { return schema_; }
  int param_dim() const { return 5; }
  std::vector<std::string> param_names() const {
    return {"arc_x", "arc_y", "arc_z", "arc_dazimuth", "arc_dinclination"};
  }

  Eigen::VectorXd theta_lower() const {
    Eigen::VectorXd lo(5);
    lo << -0.7, -0.2, -0.7, -3.14159265358979323846, -2.5;
    return lo;
  }

  Eigen::VectorXd theta_upper() const {
    Eigen::VectorXd hi(5);
    hi << 0.7, 0.5, 0.7, 3.14159265358979323846, 2.5;
    return hi;
  }

  double success_threshold() const { return cfg_.success_threshold; }
  double noise_sigma() const { return 0.0; }

  TaskOutcome evaluate(const ContextVector& c, const Eigen::VectorXd& theta, Rng&) const {
    const ArcTrace t = simulate(c, theta, 0.0, 0.0);
    return make_outcome(t.reward, cfg_.success_threshold,
                        {{"final_angle_error", t.final_angle_error},
                         {"mean_path_error", t.mean_path_error}});
  }

  ArcTrace evaluate_traced(const ContextVector& c, const Eigen::VectorXd& theta) const {
    return simulate(c, theta, 0.0, 0.0);
  }

  // Exact optimum: center on the hinge axis, no azimuth sweep, close the lid.
  Eigen::VectorXd optimal_params(const ContextVector& c) const {
    const auto g = detail::lid_geometry(c, 0.0);
    Eigen::VectorXd th(5);
    th << g.circle_center.x(), g.circle_center.y(), g.circle_center.z(), 0.0, -g.open_angle;
    return th;
  }

  // Reference structure for scoring: pose, yaw, axial grasp offset, and goal
  // angle drive the skill; grasp radius, colors, and fillers do not.
  StructureGraph ground_truth() const {
    StructureGraph g;
    g.relevant = {0, 1, 2, 3, 5, 6};
    g.parents = {{0, 3, 5}, {1}, {2, 3, 5}, {3, 6}, {3, 6}};
    return g;
  }

  ContextSampler make_sampler() const { return ContextSampler(schema_); }
  const CrateConfig& config() const { return cfg_; }

  // Shared rollout. Stiffness divides lid travel by (1 + kappa * stiffness);
  // y_offset shifts the true hinge height relative to the context.
  ArcTrace simulate(const ContextVector& c, const Eigen::VectorXd& theta, double stiffness,
                    double y_offset) const {
    if (theta.size() != 5) throw std::invalid_argument("crate: theta must have 5 entries");
    const Eigen::VectorXd th = theta.cwiseMax(theta_lower()).cwiseMin(theta_upper());
    const auto g = detail::lid_geometry(c, y_offset);
    const Eigen::Vector3d start = g.at(g.open_angle);
    const Eigen::Vector3d center(th[0], th[1], th[2]);

    ArcTrace t;
    if ((start - center).norm() < 1e-9) {
      t.final_angle_error = g.open_angle;
      t.mean_path_error = 1.0;
      t.reward = -10.0;
      return t;
    }
    t.desired = crate_arc_waypoints(center, th[3], th[4], start, cfg_.n_waypoints);
    t.realized.reserve(t.desired.size());
    t.lid_angle.reserve(t.desired.size());
    t.waypoint_error.reserve(t.desired.size());

    const double gain = 1.0 / (1.0 + cfg_.kappa * stiffness);
    double err_sum = 0.0;
    for (const auto& w : t.desired) {
      const Eigen::Vector3d v = w - g.circle_center;
      const double raw = std::atan2(v.dot(Eigen::Vector3d::UnitY()), v.dot(g.radial));
      const double angle =
          std::clamp(g.open_angle - gain * (g.open_angle - raw), 0.0, 3.14159265358979323846);
      const Eigen::Vector3d reached = g.at(angle);
      const double e = (w - reached).norm();
      t.lid_angle.push_back(angle);
      t.realized.push_back(reached);
      t.waypoint_error.push_back(e);
      err_sum += e;
    }
    t.final_angle_error = std::abs(t.lid_angle.back());
    t.mean_path_error = err_sum / static_cast<double>(t.desired.size());
    t.reward = -std::hypot(t.final_angle_error, cfg_.error_weight * t.mean_path_error);
    return t;
  }

 private:
  CrateConfig cfg_;
  SchemaPtr schema_;
};

// Deployment-side crate: stiffer lids attenuate travel and shift the grasp
// height, and only the final lid angle is rewarded. Zero stiffness reproduces
// the source dynamics exactly.
class CrateTargetEnv {
 public:
  CrateTargetEnv(CrateConfig cfg, double stiffness, double success_threshold = -0.05)
      : base_(cfg), stiffness_(stiffness), threshold_(success_threshold) {
    if (stiffness < 0.0) throw std::invalid_argument("crate target: negative stiffness");
  }

  const SchemaPtr& schema_ptr() const { return base_.schema_ptr(); }
  int param_dim() const { return 5; }
  std::vector<std::string> param_names() const { return base_.param_names(); }
  Eigen::VectorXd theta_lower() const { return base_.theta_lower(); }
  Eigen::VectorXd theta_upper() const { return base_.theta_upper(); }
  double success_threshold() const { return threshold_; }
  double noise_sigma() const { return 0.0; }
  ContextSampler make_sampler() const { return base_.make_sampler(); }

  TaskOutcome evaluate(const ContextVector& c, const Eigen::VectorXd& theta, Rng&) const {
    const ArcTrace t = simulate(c, theta);
    return make_outcome(-t.final_angle_error, threshold_,
                        {{"final_angle_error", t.final_angle_error},
                         {"mean_path_error", t.mean_path_error}});
  }

  ArcTrace simulate(const ContextVector& c, const Eigen::VectorXd& theta) const {
    const double off = stiffness_ > 0.0 ? base_.config().grasp_y_offset : 0.0;
    ArcTrace t = base_.simulate(c, theta, stiffness_, off);
    t.reward = -t.final_angle_error;
    return t;
  }

  const CrateEnv& internal() const { return base_; }
  double stiffness() const { return stiffness_; }

 private:
  CrateEnv base_;
  double stiffness_;
  double threshold_;
};

}  // namespace crest::env
