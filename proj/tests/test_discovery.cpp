#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/rng.hpp"
#include "crest/discovery/discover.hpp"
#include "crest/discovery/metrics.hpp"
#include "crest/env/blocks.hpp"
#include "crest/env/crate.hpp"
#include "crest/env/environment.hpp"
#include "crest/env/mathmanip.hpp"
#include "crest/solver/solve.hpp"

using namespace crest;
using namespace crest::discovery;

namespace {

// Independent oracle for the subset search: enumerate every one of the 2^d
// index subsets (no support restriction, bitmask-based), order them by
// cardinality then lexicographically, and return the first that solves.
template <env::TaskEnvironment Env>
std::optional<std::vector<int>> exhaustive_minimal_subset(
    const Env& environment, const ContextVector& c, const Eigen::VectorXd& theta_base,
    const Eigen::VectorXd& theta_new, int max_cardinality, Rng& rng) {
  const int d = static_cast<int>(theta_base.size());
  std::vector<std::vector<int>> subsets;
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    std::vector<int> s;
    for (int j = 0; j < d; ++j)
      if (mask & (1u << j)) s.push_back(j);
    if (static_cast<int>(s.size()) <= max_cardinality) subsets.push_back(std::move(s));
  }
  std::stable_sort(subsets.begin(), subsets.end(),
                   [](const std::vector<int>& a, const std::vector<int>& b) {
                     if (a.size() != b.size()) return a.size() < b.size();
                     return a < b;
                   });
  for (const auto& s : subsets) {
    Eigen::VectorXd theta = theta_base;
    for (int j : s) theta[j] = theta_new[j];
    if (environment.evaluate(c, theta, rng).reward >= environment.success_threshold())
      return s;
  }
  return std::nullopt;
}

DiscoveryConfig fast_config() {
  DiscoveryConfig cfg;
  cfg.solve_budget = 20000;
  cfg.resolve_budget = 10000;
  return cfg;
}

StructureGraph make_graph(std::set<int> relevant, std::vector<std::set<int>> parents) {
  StructureGraph g;
  g.relevant = std::move(relevant);
  g.parents = std::move(parents);
  return g;
}

}  // namespace

TEST_CASE("discovery config validation rejects bad values", "[discovery]") {
  const DiscoveryConfig good;
  REQUIRE_NOTHROW(validate(good));
  auto broke = [&](auto set) {
    DiscoveryConfig c;
    set(c);
    return c;
  };
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.n_contexts = 0; })), std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.interventions_per_variable = 0; })),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.solve_budget = 0; })), std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.resolve_budget = -1; })),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.subset_search_cap = 0; })),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.max_context_attempts = 0; })),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.evaluations_per_test = 0; })),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.solve_margin = 0.0; })),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(broke([](auto& c) { c.solve_margin = 1.5; })),
                    std::invalid_argument);
}

TEST_CASE("intervention values follow the configured sampler", "[discovery]") {
  env::BlocksEnv blocks;
  const ContextSchema& schema = *blocks.schema_ptr();
  Rng rng(derive_seed(301));
  for (int rep = 0; rep < 4; ++rep) {
    const double v =
        detail::intervention_value(schema, 0, rep, InterventionSampler::ExtremePoints, rng);
    REQUIRE(v == (rep % 2 == 0 ? schema.variable(0).upper : schema.variable(0).lower));
  }
  for (int i = 0; i < 50; ++i) {
    const double v =
        detail::intervention_value(schema, 3, 0, InterventionSampler::UniformResample, rng);
    REQUIRE(v >= schema.variable(3).lower);
    REQUIRE(v <= schema.variable(3).upper);
  }
  REQUIRE(intervention_sampler_from_string("extreme-points") ==
          InterventionSampler::ExtremePoints);
  REQUIRE(to_string(InterventionSampler::UniformResample) == "uniform-resample");
  REQUIRE_THROWS_AS(intervention_sampler_from_string("median"), std::invalid_argument);
}

TEST_CASE("subset search matches exhaustive enumeration", "[discovery]") {
  // solve, intervene on a relevant variable, warm re-solve, then compare the
  // search against the full 2^d oracle
  for (int dim = 2; dim <= 4; ++dim) {
    for (const auto map_class : {env::MapClass::Linear, env::MapClass::Nonlinear}) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Rng rng(derive_seed(302, dim, static_cast<std::uint64_t>(map_class), seed));
        env::MathManipConfig mc;
        mc.dim = dim;
        mc.n_relevant = dim >= 3 ? dim - 1 : dim;
        mc.goal_dim = mc.n_relevant;
        mc.map_class = map_class;
        const auto envm = env::MathManipEnv::generate(mc, rng);

        const env::ThresholdOverride margin(envm, 0.2 * envm.success_threshold());
        const ContextVector c = sample_context(envm.schema_ptr(), rng);
        const auto base = solver::solve_context(margin, c, std::nullopt, 20000, rng);
        REQUIRE(base.solved);

        const int variable = *envm.ground_truth().relevant.begin();
        const auto& bounds = envm.schema_ptr()->variable(variable);
        const ContextVector shifted =
            apply_intervention(c, {variable, rng.uniform(bounds.lower, bounds.upper)});
        const auto re = solver::solve_context(margin, shifted, base.theta, 20000, rng);
        REQUIRE(re.solved);

        Rng ra(derive_seed(303, seed)), rb(derive_seed(303, seed));
        const auto fast =
            minimal_delta_subset(envm, shifted, base.theta, re.theta, dim, ra);
        const auto brute =
            exhaustive_minimal_subset(envm, shifted, base.theta, re.theta, dim, rb);
        REQUIRE(fast.has_value() == brute.has_value());
        if (fast) REQUIRE((*fast == *brute));
      }
    }
  }
}

TEST_CASE("unchanged parameters yield the empty subset", "[discovery]") {
  env::BlocksEnv blocks;
  Rng rng(derive_seed(304));
  const ContextVector c = sample_context(blocks.schema_ptr(), rng);
  const Eigen::VectorXd good = blocks.optimal_params(c);

  const auto empty = minimal_delta_subset(blocks, c, good, good, 3, rng);
  REQUIRE(empty.has_value());
  REQUIRE(empty->empty());

  Eigen::VectorXd bad = good;
  bad[0] += 0.5;
  const auto none = minimal_delta_subset(blocks, c, bad, bad, 3, rng);
  REQUIRE_FALSE(none.has_value());
}

TEST_CASE("the cardinality cap bounds the subset search", "[discovery]") {
  env::BlocksEnv blocks;
  Rng rng(derive_seed(305));
  const ContextVector c = sample_context(blocks.schema_ptr(), rng);
  const Eigen::VectorXd good = blocks.optimal_params(c);
  Eigen::VectorXd bad = good;
  bad[0] += 0.5;
  bad[1] += 0.5;
  // fixing it needs both changed entries; a cap of 1 must give up
  REQUIRE_FALSE(minimal_delta_subset(blocks, c, bad, good, 1, rng).has_value());
  const auto pair = minimal_delta_subset(blocks, c, bad, good, 2, rng);
  REQUIRE(pair.has_value());
  REQUIRE((*pair == std::vector<int>{0, 1}));
}

TEST_CASE("block discovery recovers the exact structure", "[discovery]") {
  env::BlocksEnv blocks;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const DiscoveryResult res = run_discovery(blocks, fast_config(), seed);
    REQUIRE((res.graph.relevant == blocks.ground_truth().relevant));
    REQUIRE((res.graph.parents == blocks.ground_truth().parents));
    REQUIRE(res.inconclusive == 0);
    REQUIRE(res.bases.size() == 3);
    REQUIRE_NOTHROW(validate(res.graph, blocks.schema_ptr()->dimension()));
  }
}

TEST_CASE("crate discovery finds the articulation variables only", "[discovery]") {
  env::CrateEnv crate;
  DiscoveryConfig cfg = fast_config();
  cfg.intervention_sampler = InterventionSampler::ExtremePoints;
  cfg.solve_budget = 80000;
  cfg.resolve_budget = 20000;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const DiscoveryResult res = run_discovery(crate, cfg, seed);
    for (int must : {0, 1, 2, 3, 5, 6}) {
      INFO("expected variable " << must << " in the relevant set");
      REQUIRE(res.graph.relevant.count(must) == 1);
    }
    for (int v : res.graph.relevant) {
      INFO("variable " << v << " should not be relevant");
      REQUIRE(v <= 6);  // nothing from colors or fillers
    }
    REQUIRE_NOTHROW(validate(res.graph, crate.schema_ptr()->dimension()));
  }
}

TEST_CASE("variables the reward ignores never test relevant", "[discovery]") {
  env::BlocksEnv blocks;
  const std::set<int> colors = {4, 5, 6, 11, 12, 13};
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    Rng rng(derive_seed(306, seed));
    const Phase1Result res = phase1_relevant_set(blocks, fast_config(), rng);
    for (int v : colors) REQUIRE(res.relevant.count(v) == 0);
  }
}

TEST_CASE("more interventions never shrink the relevant set", "[discovery]") {
  Rng gen(derive_seed(307));
  env::MathManipConfig mc;
  mc.dim = 6;
  mc.n_relevant = 3;
  mc.goal_dim = 3;
  const auto envm = env::MathManipEnv::generate(mc, gen);

  std::set<int> previous;
  for (int reps = 1; reps <= 3; ++reps) {
    DiscoveryConfig cfg = fast_config();
    cfg.interventions_per_variable = reps;
    Rng rng(derive_seed(308));
    const Phase1Result res = phase1_relevant_set(envm, cfg, rng);
    REQUIRE(std::includes(res.relevant.begin(), res.relevant.end(), previous.begin(),
                          previous.end()));
    previous = res.relevant;
  }
}

TEST_CASE("linear tasks are discovered exactly", "[discovery]") {
  // bound-valued interventions: each base context gets at least one
  // structure-breaking shift per relevant variable, so exactness is
  // deterministic rather than probabilistic
  DiscoveryConfig cfg = fast_config();
  cfg.intervention_sampler = InterventionSampler::ExtremePoints;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng gen(derive_seed(309, trial));
    env::MathManipConfig mc;
    mc.dim = 8;
    mc.n_relevant = 4;
    mc.goal_dim = 4;
    const auto envm = env::MathManipEnv::generate(mc, gen);
    const DiscoveryResult res = run_discovery(envm, cfg, derive_seed(310, trial));
    const DiscoveryMetrics m = score_discovery(res.graph, envm.ground_truth(), mc.dim);
    INFO("trial " << trial);
    REQUIRE(res.inconclusive == 0);
    REQUIRE(m.agg_accuracy == 1.0);
    REQUIRE(m.agg_false_positive == 0.0);
    REQUIRE(m.map_accuracy == 1.0);
    REQUIRE(m.map_false_positive == 0.0);
  }
}

TEST_CASE("scores match hand-computed examples", "[discovery]") {
  const StructureGraph truth =
      make_graph({1, 2}, {std::set<int>{1}, std::set<int>{}});

  const DiscoveryMetrics exact = score_discovery(truth, truth, 10);
  REQUIRE(exact.agg_accuracy == 1.0);
  REQUIRE(exact.agg_false_positive == 0.0);
  REQUIRE(exact.map_accuracy == 1.0);
  REQUIRE(exact.map_false_positive == 0.0);

  const StructureGraph extra =
      make_graph({1, 2, 3}, {std::set<int>{1}, std::set<int>{}});
  const DiscoveryMetrics e = score_discovery(extra, truth, 10);
  REQUIRE(e.agg_accuracy == 1.0);
  REQUIRE(e.agg_false_positive == 0.125);  // one extra out of eight irrelevant
  REQUIRE(e.map_accuracy == 1.0);
  REQUIRE(e.map_false_positive == 0.0);

  const StructureGraph missing = make_graph({1}, {std::set<int>{1}, std::set<int>{}});
  const DiscoveryMetrics mm = score_discovery(missing, truth, 10);
  REQUIRE(mm.agg_accuracy == 0.0);
  REQUIRE(mm.agg_false_positive == 0.0);

  // 2 params x 10 variables, 1 true pair -> 19 absent pairs
  const StructureGraph noisy_pairs =
      make_graph({1, 2}, {std::set<int>{1, 2}, std::set<int>{2}});
  const DiscoveryMetrics np = score_discovery(noisy_pairs, truth, 10);
  REQUIRE(np.map_accuracy == 1.0);
  REQUIRE(np.map_false_positive == Catch::Approx(2.0 / 19.0));

  const StructureGraph missing_pair = make_graph({1, 2}, {std::set<int>{}, std::set<int>{}});
  REQUIRE(score_discovery(missing_pair, truth, 10).map_accuracy == 0.0);

  const StructureGraph wrong_shape = make_graph({1}, {std::set<int>{}});
  REQUIRE_THROWS_AS(score_discovery(wrong_shape, truth, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(score_discovery(truth, truth, 2), std::invalid_argument);
}

TEST_CASE("discovery is deterministic in the seed", "[discovery]") {
  env::BlocksEnv blocks;
  const DiscoveryResult a = run_discovery(blocks, fast_config(), 42);
  const DiscoveryResult b = run_discovery(blocks, fast_config(), 42);
  REQUIRE((a.graph.relevant == b.graph.relevant));
  REQUIRE((a.graph.parents == b.graph.parents));
  REQUIRE(a.evaluations == b.evaluations);
  for (size_t i = 0; i < a.bases.size(); ++i)
    REQUIRE(a.bases[i].theta == b.bases[i].theta);
}

TEST_CASE("unsolvable tasks are reported, not silently skipped", "[discovery]") {
  env::BlocksEnv blocks;
  const env::ThresholdOverride impossible(blocks, 0.5);  // rewards are never positive
  DiscoveryConfig cfg;
  cfg.n_contexts = 1;
  cfg.solve_budget = 200;
  cfg.max_context_attempts = 2;
  Rng rng(derive_seed(311));
  REQUIRE_THROWS_WITH(phase1_relevant_set(impossible, cfg, rng),
                      Catch::Matchers::ContainsSubstring("unsolved"));
}

TEST_CASE("sampler schema mismatches are rejected", "[discovery]") {
  env::BlocksEnv two;
  env::BlocksConfig big;
  big.n_blocks = 3;
  env::BlocksEnv three(big);
  Rng rng(derive_seed(312));
  REQUIRE_THROWS_AS(
      phase1_relevant_set(two, fast_config(), rng, ContextSampler(three.schema_ptr())),
      std::invalid_argument);
}
