#pragma once

// JSON experiment configuration: environment selection and per-module
// settings, every field optional with the library default filled in.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "crest/core/rng.hpp"
#include "crest/discovery/discover.hpp"
#include "crest/env/blocks.hpp"
#include "crest/env/crate.hpp"
#include "crest/env/mathmanip.hpp"
#include "crest/io.hpp"
#include "crest/train/ppo.hpp"
#include "crest/train/supervised.hpp"

namespace crest::exp {

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

// Stable fingerprint of a configuration document (FNV-1a over the canonical
// dump; nlohmann keeps object keys sorted), so every artifact traces back to
// the exact settings that produced it.
inline std::string config_fingerprint(const json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json to_json(const discovery::DiscoveryConfig& cfg) {
  return json{{"n_contexts", cfg.n_contexts},
              {"interventions_per_variable", cfg.interventions_per_variable},
              {"intervention_sampler", discovery::to_string(cfg.intervention_sampler)},
              {"solve_budget", cfg.solve_budget},
              {"resolve_budget", cfg.resolve_budget},
              {"subset_search_cap", cfg.subset_search_cap},
              {"max_context_attempts", cfg.max_context_attempts},
              {"evaluations_per_test", cfg.evaluations_per_test},
              {"solve_margin", cfg.solve_margin}};
}

inline discovery::DiscoveryConfig discovery_config_from_json(const json& j) {
  discovery::DiscoveryConfig cfg;
  cfg.n_contexts = j.value("n_contexts", cfg.n_contexts);
  cfg.interventions_per_variable =
      j.value("interventions_per_variable", cfg.interventions_per_variable);
  if (j.contains("intervention_sampler"))
    cfg.intervention_sampler = discovery::intervention_sampler_from_string(
        j.at("intervention_sampler").get<std::string>());
  cfg.solve_budget = j.value("solve_budget", cfg.solve_budget);
  cfg.resolve_budget = j.value("resolve_budget", cfg.resolve_budget);
  cfg.subset_search_cap = j.value("subset_search_cap", cfg.subset_search_cap);
  cfg.max_context_attempts = j.value("max_context_attempts", cfg.max_context_attempts);
  cfg.evaluations_per_test = j.value("evaluations_per_test", cfg.evaluations_per_test);
  cfg.solve_margin = j.value("solve_margin", cfg.solve_margin);
  validate(cfg);
  return cfg;
}

inline json to_json(const train::TrainConfig& cfg) {
  return json{{"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"clip_ratio", cfg.clip_ratio},
              {"epochs_per_update", cfg.epochs_per_update},
              {"validation_tasks", cfg.validation_tasks},
              {"solve_threshold", cfg.solve_threshold},
              {"max_updates", cfg.max_updates}};
}

inline train::TrainConfig train_config_from_json(const json& j) {
  train::TrainConfig cfg;
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.clip_ratio = j.value("clip_ratio", cfg.clip_ratio);
  cfg.epochs_per_update = j.value("epochs_per_update", cfg.epochs_per_update);
  cfg.validation_tasks = j.value("validation_tasks", cfg.validation_tasks);
  cfg.solve_threshold = j.value("solve_threshold", cfg.solve_threshold);
  cfg.max_updates = j.value("max_updates", cfg.max_updates);
  validate(cfg);
  return cfg;
}

inline json to_json(const train::SupervisedConfig& cfg) {
  return json{{"iterations", cfg.iterations},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"final_lr_fraction", cfg.final_lr_fraction},
              {"polish_period", cfg.polish_period},
              {"hidden_init_scale", cfg.hidden_init_scale}};
}

inline train::SupervisedConfig supervised_config_from_json(const json& j) {
  train::SupervisedConfig cfg;
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.final_lr_fraction = j.value("final_lr_fraction", cfg.final_lr_fraction);
  cfg.polish_period = j.value("polish_period", cfg.polish_period);
  cfg.hidden_init_scale = j.value("hidden_init_scale", cfg.hidden_init_scale);
  return cfg;
}

inline const char* to_string(train::Randomization r) {
  return r == train::Randomization::RelevantOnly ? "relevant-only" : "full";
}

inline train::Randomization randomization_from_string(const std::string& s) {
  if (s == "full") return train::Randomization::FullContext;
  if (s == "relevant-only" || s == "relevant_only") return train::Randomization::RelevantOnly;
  throw std::invalid_argument("unknown randomization mode '" + s + "'");
}

inline env::BlocksConfig blocks_config_from_json(const json& j) {
  env::BlocksConfig cfg;
  cfg.n_blocks = j.value("n_blocks", cfg.n_blocks);
  cfg.discrete_heights = j.value("discrete_heights", cfg.discrete_heights);
  return cfg;
}

inline env::CrateConfig crate_config_from_json(const json& j) {
  env::CrateConfig cfg;
  cfg.n_fillers = j.value("n_fillers", cfg.n_fillers);
  cfg.n_waypoints = j.value("n_waypoints", cfg.n_waypoints);
  return cfg;
}

inline env::MathManipConfig mathmanip_config_from_json(const json& j) {
  env::MathManipConfig cfg;
  cfg.dim = j.value("dim", cfg.dim);
  cfg.n_relevant = j.value("n_relevant", cfg.n_relevant);
  cfg.goal_dim = j.value("goal_dim", cfg.n_relevant);
  const std::string map = j.value("map", std::string("linear"));
  if (map == "linear") {
    cfg.map_class = env::MapClass::Linear;
  } else if (map == "nonlinear") {
    cfg.map_class = env::MapClass::Nonlinear;
  } else {
    throw std::invalid_argument("unknown map class '" + map + "'");
  }
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  return cfg;
}

// Builds the environment named by cfg["name"] and calls f with it. Synthetic
// task instances are generated from `seed`, so equal (config, seed) pairs
// give identical tasks.
template <class F>
auto with_environment(const json& cfg, std::uint64_t seed, F&& f) {
  const std::string name = cfg.at("name").get<std::string>();
  if (name == "blocks") {
    return std::forward<F>(f)(env::BlocksEnv(blocks_config_from_json(cfg)));
  }
  if (name == "blocks_target") {
    return std::forward<F>(f)(env::BlocksTargetEnv(blocks_config_from_json(cfg),
                                                   cfg.value("exec_noise", 0.0),
                                                   cfg.value("threshold", -0.025)));
  }
  if (name == "crate") {
    return std::forward<F>(f)(env::CrateEnv(crate_config_from_json(cfg)));
  }
  if (name == "crate_target") {
    return std::forward<F>(f)(env::CrateTargetEnv(crate_config_from_json(cfg),
                                                  cfg.value("stiffness", 0.5),
                                                  cfg.value("threshold", -0.05)));
  }
  if (name == "mathmanip") {
    Rng rng(derive_seed(seed, tag("task-gen")));
    return std::forward<F>(f)(
        env::MathManipEnv::generate(mathmanip_config_from_json(cfg), rng));
  }
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace crest::exp
