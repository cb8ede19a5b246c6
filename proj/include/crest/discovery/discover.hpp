#pragma once

// Two-phase interventional discovery of task structure. Phase 1 finds the
// context variables that matter: solve a handful of base contexts, then
// replay each solution under single-variable context changes and keep the
// variables whose changes break success. Phase 2 finds which policy
// parameters each of those variables drives: re-solve the shifted context
// starting from the base solution and search for the smallest set of
// parameter changes that still solves it.

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/core/sampler.hpp"
#include "crest/core/types.hpp"
#include "crest/env/environment.hpp"
#include "crest/solver/solve.hpp"

namespace crest::discovery {

enum class InterventionSampler {
  UniformResample,  // fresh uniform value within the variable's bounds
  ExtremePoints,    // the variable's bounds, upper first
};

inline std::string to_string(InterventionSampler s) {
  return s == InterventionSampler::UniformResample ? "uniform-resample" : "extreme-points";
}

inline InterventionSampler intervention_sampler_from_string(std::string_view name) {
  if (name == "uniform-resample") return InterventionSampler::UniformResample;
  if (name == "extreme-points") return InterventionSampler::ExtremePoints;
  throw std::invalid_argument("unknown intervention sampler '" + std::string(name) + "'");
}

struct DiscoveryConfig {
  int n_contexts = 3;                // base contexts; relevance is unioned over them
  int interventions_per_variable = 2;
  InterventionSampler intervention_sampler = InterventionSampler::UniformResample;
  int solve_budget = 80000;          // evaluations per cold base-context solve
  int resolve_budget = 20000;        // evaluations per warm re-solve in phase 2
  int subset_search_cap = 6;         // largest parameter-change subset explored
  int max_context_attempts = 20;     // resamples before a base slot is reported unsolvable
  int evaluations_per_test = 1;      // reward draws averaged per success check
  double solve_margin = 0.2;         // noise-free solves target margin * threshold
                                     // (thresholds are negative, so this demands headroom)
  solver::SolverOptions solver;
};

inline void validate(const DiscoveryConfig& cfg) {
  if (cfg.n_contexts < 1) throw std::invalid_argument("discovery: n_contexts must be >= 1");
  if (cfg.interventions_per_variable < 1)
    throw std::invalid_argument("discovery: interventions_per_variable must be >= 1");
  if (cfg.solve_budget < 1) throw std::invalid_argument("discovery: solve_budget must be >= 1");
  if (cfg.resolve_budget < 1)
    throw std::invalid_argument("discovery: resolve_budget must be >= 1");
  if (cfg.subset_search_cap < 1)
    throw std::invalid_argument("discovery: subset_search_cap must be >= 1");
  if (cfg.max_context_attempts < 1)
    throw std::invalid_argument("discovery: max_context_attempts must be >= 1");
  if (cfg.evaluations_per_test < 1)
    throw std::invalid_argument("discovery: evaluations_per_test must be >= 1");
  if (!(cfg.solve_margin > 0.0 && cfg.solve_margin <= 1.0))
    throw std::invalid_argument("discovery: solve_margin must be in (0, 1]");
}

struct BaseSolution {
  ContextVector context;
  Eigen::VectorXd theta;
  double reward = 0.0;
};

struct Phase1Result {
  std::set<int> relevant;
  std::vector<BaseSolution> bases;
  int discarded_contexts = 0;   // base solves that failed and were resampled
  long long evaluations = 0;
};

struct Phase2Result {
  StructureGraph graph;
  int inconclusive = 0;         // interventions with no usable attribution
  long long evaluations = 0;
};

struct DiscoveryResult {
  StructureGraph graph;
  std::vector<BaseSolution> bases;
  int discarded_contexts = 0;
  int inconclusive = 0;
  long long evaluations = 0;
};

namespace detail {

// Noise-free tasks are solved with headroom so that replaying the solution
// under a benign context change stays comfortably above the success bar.
template <env::TaskEnvironment Env>
double solve_threshold(const Env& environment, const DiscoveryConfig& cfg) {
  return environment.noise_sigma() == 0.0
             ? cfg.solve_margin * environment.success_threshold()
             : environment.success_threshold();
}

inline double intervention_value(const ContextSchema& schema, int variable, int repetition,
                                 InterventionSampler sampler, Rng& rng) {
  const auto& v = schema.variable(variable);
  if (sampler == InterventionSampler::ExtremePoints)
    return repetition % 2 == 0 ? v.upper : v.lower;
  return rng.uniform(v.lower, v.upper);
}

template <env::TaskEnvironment Env>
double mean_reward(const Env& environment, const ContextVector& c, const Eigen::VectorXd& theta,
                   int draws, Rng& rng) {
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += environment.evaluate(c, theta, rng).reward;
  return sum / draws;
}

// Advances sorted positions to the next k-combination of {0..n-1}.
inline bool next_combination(std::vector<int>& pos, int n) {
  const int k = static_cast<int>(pos.size());
  for (int i = k - 1; i >= 0; --i) {
    if (pos[i] < n - (k - i)) {
      ++pos[i];
      for (int j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Smallest set of parameter indices whose changed values (taken from
// theta_new, all others kept at theta_base) solve the context, searched in
// increasing cardinality with lexicographic tie-breaking. Indices where the
// two vectors agree are skipped: adding one changes nothing, so a minimal
// solution never contains it. Returns nullopt when nothing within the
// cardinality cap succeeds.
template <env::TaskEnvironment Env>
std::optional<std::vector<int>> minimal_delta_subset(
    const Env& environment, const ContextVector& c, const Eigen::VectorXd& theta_base,
    const Eigen::VectorXd& theta_new, int max_cardinality, Rng& rng,
    int evaluations_per_test = 1, long long* evaluations_out = nullptr) {
  if (theta_base.size() != theta_new.size())
    throw std::invalid_argument("minimal_delta_subset: parameter size mismatch");
  long long evals = 0;
  std::vector<int> support;
  for (int j = 0; j < theta_base.size(); ++j)
    if (theta_new[j] != theta_base[j]) support.push_back(j);

  std::optional<std::vector<int>> found;
  const int top = std::min<int>(max_cardinality, static_cast<int>(support.size()));
  for (int card = 0; card <= top && !found; ++card) {
    std::vector<int> pos(card);
    for (int i = 0; i < card; ++i) pos[i] = i;
    do {
      Eigen::VectorXd theta = theta_base;
      std::vector<int> subset(card);
      for (int i = 0; i < card; ++i) {
        subset[i] = support[pos[i]];
        theta[subset[i]] = theta_new[subset[i]];
      }
      const double r = detail::mean_reward(environment, c, theta, evaluations_per_test, rng);
      evals += evaluations_per_test;
      if (r >= environment.success_threshold()) {
        found = std::move(subset);
        break;
      }
    } while (detail::next_combination(pos, static_cast<int>(support.size())));
  }
  if (evaluations_out) *evaluations_out += evals;
  return found;
}

// Phase 1: which context variables matter anywhere in the context space.
// Each base context is solved (with headroom when noise-free), then every
// variable receives its own interventions; a variable is relevant as soon as
// one intervention makes the unchanged solution fail. Each intervention runs
// on a generator derived from (base, variable, repetition), so results do not
// depend on processing order and adding repetitions never disturbs earlier
// draws.
template <env::TaskEnvironment Env>
Phase1Result phase1_relevant_set(const Env& environment, const DiscoveryConfig& cfg, Rng& rng,
                                 const ContextSampler& contexts) {
  validate(cfg);
  if (!(*contexts.schema_ptr() == *environment.schema_ptr()))
    throw std::invalid_argument("phase 1: context sampler schema does not match environment");
  const env::ThresholdOverride solver_env(environment,
                                          detail::solve_threshold(environment, cfg));
  const std::uint64_t intervention_seed = rng.raw();

  Phase1Result out;
  for (int slot = 0; slot < cfg.n_contexts; ++slot) {
    bool solved = false;
    for (int attempt = 0; attempt < cfg.max_context_attempts && !solved; ++attempt) {
      const ContextVector c = contexts.sample(rng);
      const solver::SolveResult res =
          solver::solve_context(solver_env, c, std::nullopt, cfg.solve_budget, rng, cfg.solver);
      out.evaluations += res.evaluations;
      if (res.solved) {
        out.bases.push_back({c, res.theta, res.reward});
        solved = true;
      } else {
        ++out.discarded_contexts;
      }
    }
    if (!solved)
      throw std::runtime_error(
          "phase 1: base context " + std::to_string(slot) + " unsolved after " +
          std::to_string(cfg.max_context_attempts) + " attempts at budget " +
          std::to_string(cfg.solve_budget));
  }

  const ContextSchema& schema = *environment.schema_ptr();
  for (int base = 0; base < static_cast<int>(out.bases.size()); ++base) {
    const BaseSolution& b = out.bases[base];
    for (int variable = 0; variable < schema.dimension(); ++variable) {
      for (int rep = 0; rep < cfg.interventions_per_variable; ++rep) {
        Rng local(derive_seed(intervention_seed, base, variable, rep));
        const double value = detail::intervention_value(schema, variable, rep,
                                                        cfg.intervention_sampler, local);
        const ContextVector shifted = apply_intervention(b.context, {variable, value});
        const double r = detail::mean_reward(environment, shifted, b.theta,
                                             cfg.evaluations_per_test, local);
        out.evaluations += cfg.evaluations_per_test;
        if (r < environment.success_threshold()) out.relevant.insert(variable);
      }
    }
  }
  return out;
}

template <env::TaskEnvironment Env>
Phase1Result phase1_relevant_set(const Env& environment, const DiscoveryConfig& cfg, Rng& rng) {
  return phase1_relevant_set(environment, cfg, rng, ContextSampler(environment.schema_ptr()));
}

// Phase 2: which policy parameters each relevant variable drives. Every
// intervention is re-solved starting from the base solution; the smallest
// parameter-change subset that still solves the shifted context attributes
// the intervened variable to exactly those parameters. An intervention the
// base solution survives needs no change at all (the empty subset), so it
// adds nothing. Re-solve failures and cap exhaustion are counted as
// inconclusive rather than attributed.
template <env::TaskEnvironment Env>
Phase2Result phase2_mappings(const Env& environment, const BaseSolution& base,
                             const std::set<int>& relevant, const DiscoveryConfig& cfg,
                             Rng& rng) {
  validate(cfg);
  const env::ThresholdOverride solver_env(environment,
                                          detail::solve_threshold(environment, cfg));
  const std::uint64_t intervention_seed = rng.raw();
  const ContextSchema& schema = *environment.schema_ptr();

  Phase2Result out;
  out.graph.relevant = relevant;
  out.graph.parents.resize(environment.param_dim());
  for (int variable : relevant) {
    for (int rep = 0; rep < cfg.interventions_per_variable; ++rep) {
      Rng local(derive_seed(intervention_seed, variable, rep));
      const double value = detail::intervention_value(schema, variable, rep,
                                                      cfg.intervention_sampler, local);
      const ContextVector shifted = apply_intervention(base.context, {variable, value});
      const solver::SolveResult res = solver::solve_context(
          solver_env, shifted, base.theta, cfg.resolve_budget, local, cfg.solver);
      out.evaluations += res.evaluations;
      if (!res.solved) {
        ++out.inconclusive;
        continue;
      }
      const auto subset =
          minimal_delta_subset(environment, shifted, base.theta, res.theta,
                               cfg.subset_search_cap, local, cfg.evaluations_per_test,
                               &out.evaluations);
      if (!subset) {
        ++out.inconclusive;
        continue;
      }
      for (int j : *subset) out.graph.parents[j].insert(variable);
    }
  }
  validate(out.graph, schema.dimension());
  return out;
}

// Full pipeline: phase 1 over fresh contexts, then phase 2 on every base
// solution, with parent sets unioned across bases. Deterministic in `seed`.
template <env::TaskEnvironment Env>
DiscoveryResult run_discovery(const Env& environment, const DiscoveryConfig& cfg,
                              std::uint64_t seed, const ContextSampler& contexts) {
  Rng p1(derive_seed(seed, tag("discover-relevance")));
  Phase1Result phase1 = phase1_relevant_set(environment, cfg, p1, contexts);

  DiscoveryResult out;
  out.graph.relevant = phase1.relevant;
  out.graph.parents.resize(environment.param_dim());
  out.discarded_contexts = phase1.discarded_contexts;
  out.evaluations = phase1.evaluations;
  for (int base = 0; base < static_cast<int>(phase1.bases.size()); ++base) {
    Rng p2(derive_seed(seed, tag("discover-mappings"), base));
    Phase2Result phase2 =
        phase2_mappings(environment, phase1.bases[base], phase1.relevant, cfg, p2);
    for (int j = 0; j < environment.param_dim(); ++j)
      out.graph.parents[j].insert(phase2.graph.parents[j].begin(),
                                  phase2.graph.parents[j].end());
    out.inconclusive += phase2.inconclusive;
    out.evaluations += phase2.evaluations;
  }
  out.bases = std::move(phase1.bases);
  validate(out.graph, environment.schema_ptr()->dimension());
  return out;
}

template <env::TaskEnvironment Env>
DiscoveryResult run_discovery(const Env& environment, const DiscoveryConfig& cfg,
                              std::uint64_t seed) {
  return run_discovery(environment, cfg, seed, ContextSampler(environment.schema_ptr()));
}

}  // namespace crest::discovery
