#pragma once

// Experiment orchestration: each suite builds its tasks, runs discovery and
// training per seed, and emits one JSON record per unit of work. Reports are
// derived from the records alone (see report.hpp).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "crest/discovery/discover.hpp"
#include "crest/discovery/metrics.hpp"
#include "crest/env/blocks.hpp"
#include "crest/env/crate.hpp"
#include "crest/env/mathmanip.hpp"
#include "crest/exp/config.hpp"
#include "crest/exp/report.hpp"
#include "crest/nn/builder.hpp"
#include "crest/train/policy.hpp"
#include "crest/train/ppo.hpp"
#include "crest/train/transfer.hpp"

namespace crest::exp {

inline const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> k = {
      "table1",          "blocks_scaling",  "blocks_color_shift", "crate_nominal",
      "crate_stiffness", "crate_color_shift", "discover_only"};
  return k;
}

struct ExperimentConfig {
  std::string experiment;
  std::vector<std::uint64_t> seeds;  // one independent trial per seed
  int trials = 100;                  // Monte-Carlo count (table1 only)
  json environment = json::object();
  json discovery = json::object();
  json train = json::object();
  std::string output;
  json raw = json::object();  // the full document, for fingerprinting
};

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.experiment = j.at("experiment").get<std::string>();
  const auto& known = known_experiments();
  if (std::find(known.begin(), known.end(), cfg.experiment) == known.end())
    throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
  if (j.contains("seeds")) {
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    for (std::uint64_t s = 1; s <= 10; ++s) cfg.seeds.push_back(s);
  }
  if (cfg.seeds.empty()) throw std::invalid_argument("experiment: seeds must be non-empty");
  cfg.trials = j.value("trials", 100);
  if (cfg.trials < 1) throw std::invalid_argument("experiment: trials must be positive");
  cfg.environment = j.value("environment", json::object());
  cfg.discovery = j.value("discovery", json::object());
  cfg.train = j.value("train", json::object());
  cfg.output = j.value("output", std::string{});
  return cfg;
}

namespace detail {

// Runs fn(0..n-1) on `jobs` workers; each index owns its output slot, so the
// merged result does not depend on scheduling.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (err) std::rethrow_exception(err);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Suite defaults overlaid with the user's train block.
inline train::TrainConfig merged_train(json suite_defaults, const json& user) {
  suite_defaults.update(user);
  return train_config_from_json(suite_defaults);
}

inline json metrics_json(const discovery::DiscoveryMetrics& m) {
  return json{{"agg_accuracy", m.agg_accuracy},
              {"agg_false_positive", m.agg_false_positive},
              {"map_accuracy", m.map_accuracy},
              {"map_false_positive", m.map_false_positive}};
}

inline int capped_updates(const train::TrainTrace& t, const train::TrainConfig& cfg) {
  return t.solved ? t.updates_to_solve : cfg.max_updates;
}

inline json trace_json(const train::TrainTrace& t, const train::TrainConfig& cfg) {
  return json{{"solved", t.solved},
              {"updates", t.updates_to_solve},
              {"updates_capped", capped_updates(t, cfg)},
              {"samples", t.samples_used},
              {"diverged", t.diverged},
              {"final_validation",
               t.rows.empty() ? json() : json(t.rows.back().validation_reward)}};
}

inline StructureGraph full_structure(const ContextSchema& schema, int param_dim) {
  StructureGraph g;
  g.parents.resize(param_dim);
  for (int v = 0; v < schema.dimension(); ++v) {
    g.relevant.insert(v);
    for (auto& p : g.parents) p.insert(v);
  }
  return g;
}

inline std::vector<nn::ArchKind> arch_list(const json& env_block) {
  std::vector<nn::ArchKind> kinds;
  for (const auto& name :
       env_block.value("archs", std::vector<std::string>{"mlp", "rmlp", "pmlp"}))
    kinds.push_back(nn::arch_from_string(name));
  if (kinds.empty()) throw std::invalid_argument("experiment: archs must be non-empty");
  return kinds;
}

// A row whose base solves keep failing signals a broken configuration, not a
// discovery result worth reporting.
inline void check_row_failure_rates(const std::vector<json>& records, double max_rate) {
  std::map<std::string, std::pair<double, double>> rows;  // label -> (discarded, base)
  for (const json& r : records) {
    const std::string label = r.at("map_class").get<std::string>() + "/" +
                              std::to_string(r.at("dim").get<int>()) + "/" +
                              r.at("noise").get<std::string>();
    rows[label].first += r.at("discarded_contexts").get<double>();
    rows[label].second += r.at("base_contexts").get<double>();
  }
  for (const auto& [label, counts] : rows) {
    const double rate = counts.first / std::max(1.0, counts.first + counts.second);
    if (rate > max_rate)
      throw std::runtime_error("table1: solver failure rate " + fmt_num(rate) + " in row " +
                               label);
  }
}

}  // namespace detail

// ---- table1: structure discovery on synthetic tasks ------------------------

inline std::vector<json> run_table1(const ExperimentConfig& cfg, std::uint64_t base_seed,
                                    int jobs = 1) {
  const auto dcfg = discovery_config_from_json(cfg.discovery);
  struct RowSpec {
    env::MapClass map_class;
    int dim;
    double noise;
  };
  const double limited = cfg.environment.value("noise_sigma", 0.01);
  std::vector<RowSpec> rows;
  for (double noise : {0.0, limited})
    for (auto mc : {env::MapClass::Linear, env::MapClass::Nonlinear})
      for (int dim : {8, 20}) rows.push_back({mc, dim, noise});

  struct Item {
    RowSpec row;
    std::uint64_t trial_base;
  };
  std::vector<Item> items;
  for (const auto& row : rows) {
    const std::string label = std::string(row.map_class == env::MapClass::Linear ? "linear"
                                                                                 : "nonlinear") +
                              std::to_string(row.dim) + (row.noise == 0.0 ? "none" : "limited");
    const std::uint64_t row_base = derive_seed(base_seed, tag(label));
    for (int t = 0; t < cfg.trials; ++t)
      items.push_back({row, derive_seed(row_base, static_cast<std::uint64_t>(t))});
  }

  std::vector<json> records(items.size());
  detail::parallel_for(static_cast<int>(items.size()), jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& it = items[i];
    env::MathManipConfig mc;
    mc.dim = it.row.dim;
    mc.n_relevant = it.row.dim / 2;
    mc.goal_dim = it.row.dim / 2;
    mc.map_class = it.row.map_class;
    mc.noise_sigma = it.row.noise;
    Rng gen(derive_seed(it.trial_base, tag("task-gen")));
    const auto task = env::MathManipEnv::generate(mc, gen);
    const std::uint64_t disc_seed = derive_seed(it.trial_base, tag("discover"));
    const auto res = discovery::run_discovery(task, dcfg, disc_seed);
    const auto metrics = discovery::score_discovery(res.graph, task.ground_truth(),
                                                    task.schema_ptr()->dimension());
    json r = make_record("table1", cfg.raw, disc_seed);
    r["map_class"] = it.row.map_class == env::MapClass::Linear ? "linear" : "nonlinear";
    r["dim"] = it.row.dim;
    r["noise"] = it.row.noise == 0.0 ? "none" : "limited";
    r["noise_sigma"] = it.row.noise;
    r["metrics"] = detail::metrics_json(metrics);
    r["evaluations"] = res.evaluations;
    r["inconclusive"] = res.inconclusive;
    r["discarded_contexts"] = res.discarded_contexts;
    r["base_contexts"] = dcfg.n_contexts;
    r["wall_clock_sec"] = detail::seconds_since(t0);
    records[i] = std::move(r);
  });

  detail::check_row_failure_rates(records, 0.2);
  return records;
}

// ---- discover_only: structure recovery per seed ----------------------------

inline std::vector<json> run_discover_only(const ExperimentConfig& cfg, std::uint64_t base_seed,
                                           int jobs = 1) {
  const auto dcfg = discovery_config_from_json(cfg.discovery);
  std::vector<json> records(cfg.seeds.size());
  detail::parallel_for(static_cast<int>(cfg.seeds.size()), jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = derive_seed(base_seed, cfg.seeds[i]);
    json env_block = cfg.environment;
    if (!env_block.contains("name")) env_block["name"] = "blocks";
    json r = with_environment(env_block, seed, [&](const auto& task) {
      const auto res = discovery::run_discovery(task, dcfg, seed);
      json rec = make_record("discover_only", cfg.raw, cfg.seeds[i]);
      rec["structure"] = to_json(res.graph, *task.schema_ptr(), task.param_names());
      rec["evaluations"] = res.evaluations;
      if constexpr (requires { task.ground_truth(); }) {
        rec["metrics"] = detail::metrics_json(discovery::score_discovery(
            res.graph, task.ground_truth(), task.schema_ptr()->dimension()));
      }
      return rec;
    });
    r["wall_clock_sec"] = detail::seconds_since(t0);
    records[i] = std::move(r);
  });
  return records;
}

// ---- blocks_scaling: policy cost as the context grows -----------------------

inline std::vector<json> run_blocks_scaling(const ExperimentConfig& cfg, std::uint64_t base_seed,
                                            int jobs = 1) {
  const auto dcfg = discovery_config_from_json(cfg.discovery);
  const auto tcfg = detail::merged_train({{"solve_threshold", -0.02}}, cfg.train);
  const auto blocks_list =
      cfg.environment.value("n_blocks_list", std::vector<int>{2, 6, 10, 14, 18});
  const auto kinds = detail::arch_list(cfg.environment);
  const double exec_noise = cfg.environment.value("exec_noise", 0.005);

  struct Item {
    int n_blocks;
    nn::ArchKind kind;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  for (int nb : blocks_list)
    for (auto kind : kinds)
      for (std::uint64_t s : cfg.seeds) items.push_back({nb, kind, s});

  std::vector<json> records(items.size());
  detail::parallel_for(static_cast<int>(items.size()), jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& it = items[i];
    const std::uint64_t item_base = derive_seed(
        derive_seed(derive_seed(derive_seed(base_seed, tag("scaling")),
                                static_cast<std::uint64_t>(it.n_blocks)),
                    tag(nn::to_string(it.kind))),
        it.seed);

    env::BlocksConfig bc = blocks_config_from_json(cfg.environment);
    bc.n_blocks = it.n_blocks;
    const env::BlocksEnv internal(bc);
    const env::BlocksTargetEnv target(bc, exec_noise);

    json r = make_record("blocks_scaling", cfg.raw, it.seed);
    r["n_blocks"] = it.n_blocks;
    r["arch"] = nn::to_string(it.kind);

    const bool reduced = it.kind != nn::ArchKind::MLP;
    StructureGraph structure;
    if (reduced) {
      const auto res =
          discovery::run_discovery(internal, dcfg, derive_seed(item_base, tag("discover")));
      structure = res.graph;
      r["discovery"] = json{{"metrics", detail::metrics_json(discovery::score_discovery(
                                            structure, internal.ground_truth(),
                                            internal.schema_ptr()->dimension()))},
                            {"evaluations", res.evaluations}};
    } else {
      structure = detail::full_structure(*internal.schema_ptr(), internal.param_dim());
    }

    const auto built =
        nn::build_policy(it.kind, *internal.schema_ptr(), structure, internal.param_dim());
    Rng rng(derive_seed(item_base, tag("pretrain")));
    auto policy = train::make_policy_state(built, internal, rng);
    ContextSampler sampler = internal.make_sampler();
    if (reduced) sampler.pin_irrelevant(structure.relevant);
    const auto pre = train::pretrain(policy, internal, sampler, tcfg, rng);
    r["pretrain"] = detail::trace_json(pre, tcfg);

    train::TrainConfig xcfg = tcfg;
    xcfg.solve_threshold = target.success_threshold();
    Rng xrng(derive_seed(item_base, tag("transfer")));
    const auto res =
        train::transfer_and_finetune(policy, target, target.make_sampler(), xcfg, xrng);
    json x = detail::trace_json(res.trace, xcfg);
    x["zero_shot"] = res.zero_shot;
    r["transfer"] = std::move(x);
    r["wall_clock_sec"] = detail::seconds_since(t0);
    records[i] = std::move(r);
  });
  return records;
}

// ---- color shift: paired targets differing only in color draws -------------

inline std::vector<json> run_color_shift(const ExperimentConfig& cfg, std::uint64_t base_seed,
                                         int jobs = 1) {
  const bool crate = cfg.experiment == "crate_color_shift";
  const auto dcfg = discovery_config_from_json(cfg.discovery);
  const auto tcfg =
      detail::merged_train({{"solve_threshold", crate ? -0.05 : -0.02}}, cfg.train);
  const auto kinds = detail::arch_list(cfg.environment);
  const double lo_split = cfg.environment.value("color_split", 0.5);

  struct Item {
    nn::ArchKind kind;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  for (auto kind : kinds)
    for (std::uint64_t s : cfg.seeds) items.push_back({kind, s});

  std::vector<json> records(items.size());
  detail::parallel_for(static_cast<int>(items.size()), jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& it = items[i];
    const std::uint64_t item_base =
        derive_seed(derive_seed(derive_seed(base_seed, tag(cfg.experiment)),
                                tag(nn::to_string(it.kind))),
                    it.seed);

    json r = make_record(cfg.experiment, cfg.raw, it.seed);
    r["arch"] = nn::to_string(it.kind);

    // Build internal and target environments for the chosen family. The
    // target matches the internal dynamics so the only difference between
    // the paired targets is where the color draws land.
    const auto run = [&](const auto& internal, const auto& target) {
      const bool reduced = it.kind != nn::ArchKind::MLP;
      StructureGraph structure;
      if (reduced) {
        const auto res =
            discovery::run_discovery(internal, dcfg, derive_seed(item_base, tag("discover")));
        structure = res.graph;
        r["discovery"] = json{{"evaluations", res.evaluations}};
      } else {
        structure = detail::full_structure(*internal.schema_ptr(), internal.param_dim());
      }

      const auto built =
          nn::build_policy(it.kind, *internal.schema_ptr(), structure, internal.param_dim());
      Rng rng(derive_seed(item_base, tag("pretrain")));
      auto policy = train::make_policy_state(built, internal, rng);
      ContextSampler pre_sampler = internal.make_sampler();
      if (reduced) pre_sampler.pin_irrelevant(structure.relevant);
      pre_sampler.restrict_group("color", 0.0, lo_split);
      const auto pre = train::pretrain(policy, internal, pre_sampler, tcfg, rng);
      r["pretrain"] = detail::trace_json(pre, tcfg);

      ContextSampler noshift = target.make_sampler();
      noshift.restrict_group("color", 0.0, lo_split);
      ContextSampler shift = target.make_sampler();
      shift.restrict_group("color", lo_split, 1.0);

      // Paired zero-shot evaluation: identical streams, colors remapped.
      const std::uint64_t eval_seed = derive_seed(item_base, tag("shift-eval"));
      Rng ev_a(eval_seed), ev_b(eval_seed);
      const Eigen::VectorXd r_ns =
          train::validation_rewards(policy, target, noshift, tcfg.validation_tasks, ev_a);
      const Eigen::VectorXd r_s =
          train::validation_rewards(policy, target, shift, tcfg.validation_tasks, ev_b);
      r["rewards_identical"] = (r_ns == r_s);

      train::TrainConfig xcfg = tcfg;
      xcfg.solve_threshold = target.success_threshold();
      const std::uint64_t xfer_seed = derive_seed(item_base, tag("transfer"));
      const std::pair<const char*, const ContextSampler*> sides[] = {{"noshift", &noshift},
                                                                     {"shift", &shift}};
      for (const auto& [label, sampler] : sides) {
        auto p = policy;  // both sides fine-tune from the same pretrained weights
        Rng xrng(xfer_seed);
        const auto res = train::transfer_and_finetune(p, target, *sampler, xcfg, xrng);
        json x = detail::trace_json(res.trace, xcfg);
        x["zero_shot"] = res.zero_shot;
        r[label] = std::move(x);
      }
    };

    if (crate) {
      const auto cc = crate_config_from_json(cfg.environment);
      run(env::CrateEnv(cc), env::CrateTargetEnv(cc, cfg.environment.value("stiffness", 0.0)));
    } else {
      const auto bc = blocks_config_from_json(cfg.environment);
      run(env::BlocksEnv(bc),
          env::BlocksTargetEnv(bc, cfg.environment.value("exec_noise", 0.0)));
    }
    r["wall_clock_sec"] = detail::seconds_since(t0);
    records[i] = std::move(r);
  });
  return records;
}

// ---- crate transfer: fine-tuning cost against dynamics mismatch ------------

inline std::vector<json> run_crate_transfer(const ExperimentConfig& cfg, std::uint64_t base_seed,
                                            int jobs = 1) {
  const auto dcfg = discovery_config_from_json(cfg.discovery);
  const auto tcfg = detail::merged_train({{"solve_threshold", -0.05}}, cfg.train);
  const auto kinds = detail::arch_list(cfg.environment);
  const bool nominal_only = cfg.experiment == "crate_nominal";
  const auto stiffness_list = cfg.environment.value(
      "stiffness_list", nominal_only ? std::vector<double>{0.5}
                                     : std::vector<double>{0.1, 0.5, 1.5});

  struct Item {
    nn::ArchKind kind;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  for (auto kind : kinds)
    for (std::uint64_t s : cfg.seeds) items.push_back({kind, s});

  std::vector<json> records(items.size());
  detail::parallel_for(static_cast<int>(items.size()), jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& it = items[i];
    const std::uint64_t item_base =
        derive_seed(derive_seed(derive_seed(base_seed, tag("crate-transfer")),
                                tag(nn::to_string(it.kind))),
                    it.seed);

    const auto cc = crate_config_from_json(cfg.environment);
    const env::CrateEnv internal(cc);

    json r = make_record(cfg.experiment, cfg.raw, it.seed);
    r["arch"] = nn::to_string(it.kind);

    const bool reduced = it.kind != nn::ArchKind::MLP;
    StructureGraph structure;
    if (reduced) {
      const auto res =
          discovery::run_discovery(internal, dcfg, derive_seed(item_base, tag("discover")));
      structure = res.graph;
      r["discovery"] = json{{"evaluations", res.evaluations}};
    } else {
      structure = detail::full_structure(*internal.schema_ptr(), internal.param_dim());
    }

    const auto built =
        nn::build_policy(it.kind, *internal.schema_ptr(), structure, internal.param_dim());
    Rng rng(derive_seed(item_base, tag("pretrain")));
    auto policy = train::make_policy_state(built, internal, rng);
    ContextSampler sampler = internal.make_sampler();
    if (reduced) sampler.pin_irrelevant(structure.relevant);
    const auto pre = train::pretrain(policy, internal, sampler, tcfg, rng);
    r["pretrain"] = detail::trace_json(pre, tcfg);

    json runs = json::array();
    for (std::size_t si = 0; si < stiffness_list.size(); ++si) {
      const double stiffness = stiffness_list[si];
      const env::CrateTargetEnv target(cc, stiffness);
      train::TrainConfig xcfg = tcfg;
      xcfg.solve_threshold = target.success_threshold();
      auto p = policy;  // each stiffness fine-tunes from the same pretrained weights
      Rng xrng(derive_seed(derive_seed(item_base, tag("transfer")), si));
      const auto res = train::transfer_and_finetune(p, target, target.make_sampler(), xcfg, xrng);
      json x = detail::trace_json(res.trace, xcfg);
      x["zero_shot"] = res.zero_shot;
      x["stiffness"] = stiffness;
      x["val0"] = res.trace.rows.empty() ? json() : json(res.trace.rows.front().validation_reward);
      runs.push_back(std::move(x));
    }
    r["stiffness_runs"] = std::move(runs);
    r["wall_clock_sec"] = detail::seconds_since(t0);
    records[i] = std::move(r);
  });
  return records;
}

// Dispatches on cfg.experiment.
inline std::vector<json> run_experiment(const ExperimentConfig& cfg, std::uint64_t base_seed,
                                        int jobs = 1) {
  if (cfg.experiment == "table1") return run_table1(cfg, base_seed, jobs);
  if (cfg.experiment == "discover_only") return run_discover_only(cfg, base_seed, jobs);
  if (cfg.experiment == "blocks_scaling") return run_blocks_scaling(cfg, base_seed, jobs);
  if (cfg.experiment == "blocks_color_shift" || cfg.experiment == "crate_color_shift")
    return run_color_shift(cfg, base_seed, jobs);
  if (cfg.experiment == "crate_nominal" || cfg.experiment == "crate_stiffness")
    return run_crate_transfer(cfg, base_seed, jobs);
  throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace crest::exp
