#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "crest/discovery/discover.hpp"
#include "crest/discovery/metrics.hpp"
#include "crest/exp/config.hpp"
#include "crest/exp/report.hpp"
#include "crest/exp/runner.hpp"
#include "crest/io.hpp"
#include "crest/nn/builder.hpp"
#include "crest/train/policy.hpp"
#include "crest/train/supervised.hpp"
#include "crest/train/trace_io.hpp"
#include "crest/train/transfer.hpp"

namespace {

namespace fs = std::filesystem;
using crest::json;

json metrics_to_json(const crest::discovery::DiscoveryMetrics& m) {
  return json{{"agg_accuracy", m.agg_accuracy},
              {"agg_false_positive", m.agg_false_positive},
              {"map_accuracy", m.map_accuracy},
              {"map_false_positive", m.map_false_positive}};
}

std::string prepare_out_dir(const std::string& out_dir) {
  fs::create_directories(out_dir);
  return out_dir;
}

// Reads the structure graph named in the config, or falls back to the fully
// connected graph (every variable relevant, every variable a parent of every
// parameter) when no discovery output is given.
crest::StructureGraph load_structure(const json& cfg, const crest::ContextSchema& schema,
                                     const std::vector<std::string>& param_names) {
  if (cfg.contains("structure")) {
    const json j = crest::exp::load_json_file(cfg.at("structure").get<std::string>());
    return crest::structure_from_json(j, schema, param_names);
  }
  crest::StructureGraph g;
  g.parents.resize(param_names.size());
  for (int v = 0; v < schema.dimension(); ++v) {
    g.relevant.insert(v);
    for (auto& p : g.parents) p.insert(v);
  }
  return g;
}

// Training distribution: the environment's own sampler (so discrete variables
// stay discrete), optionally pinned to the relevant set and restricted to a
// color sub-range ("color_bounds": [lo, hi] in unit coordinates).
template <class Env>
crest::ContextSampler make_train_sampler(const Env& task, const json& cfg,
                                         crest::train::Randomization mode,
                                         const crest::StructureGraph& structure) {
  crest::ContextSampler s = [&] {
    if constexpr (requires { task.make_sampler(); }) {
      return task.make_sampler();
    } else {
      return crest::ContextSampler(task.schema_ptr());
    }
  }();
  if (mode == crest::train::Randomization::RelevantOnly) s.pin_irrelevant(structure.relevant);
  if (cfg.contains("color_bounds")) {
    const auto& b = cfg.at("color_bounds");
    s.restrict_group("color", b.at(0).get<double>(), b.at(1).get<double>());
  }
  return s;
}

void write_train_outputs(const std::string& out_dir, const crest::train::PolicyState& policy,
                         const crest::train::TrainTrace& trace, const json& result) {
  const std::string trace_path = out_dir + "/trace.jsonl";
  std::ofstream(trace_path, std::ios::trunc).close();
  crest::train::append_trace_rows(trace_path, trace);
  crest::exp::write_json_file(out_dir + "/actor.json",
                              crest::weights_to_json(policy.actor, policy.actor_weights));
  crest::exp::write_json_file(out_dir + "/critic.json",
                              crest::weights_to_json(policy.critic, policy.critic_weights));
  crest::exp::write_json_file(out_dir + "/result.json", result);
}

json base_result(const char* command, const json& cfg, std::uint64_t seed,
                 const crest::train::TrainTrace& trace) {
  return json{{"command", command},
              {"seed", seed},
              {"config_fingerprint", crest::exp::config_fingerprint(cfg)},
              {"config", cfg},
              {"solved", trace.solved},
              {"updates_to_solve", trace.updates_to_solve},
              {"samples_used", trace.samples_used},
              {"diverged", trace.diverged},
              {"final_validation",
               trace.rows.empty() ? json() : json(trace.rows.back().validation_reward)}};
}

void print_train_summary(const crest::train::TrainTrace& trace, const std::string& out_dir) {
  if (trace.solved) {
    std::cout << "solved after " << trace.updates_to_solve << " updates (" << trace.samples_used
              << " samples)\n";
  } else if (trace.diverged) {
    std::cout << "diverged\n";
  } else {
    std::cout << "not solved within budget\n";
  }
  if (!trace.rows.empty())
    std::cout << "final validation reward: " << trace.rows.back().validation_reward << "\n";
  std::cout << "wrote " << out_dir << "/{trace.jsonl,actor.json,critic.json,result.json}\n";
}

int run_discover(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  const json cfg = crest::exp::load_json_file(config_path);
  const auto dcfg = crest::exp::discovery_config_from_json(cfg.value("discovery", json::object()));

  const json report = crest::exp::with_environment(cfg.at("env"), seed, [&](const auto& task) {
    const auto res = crest::discovery::run_discovery(task, dcfg, seed);
    json out = crest::to_json(res.graph, *task.schema_ptr(), task.param_names());
    if constexpr (requires { task.ground_truth(); }) {
      const auto metrics = crest::discovery::score_discovery(res.graph, task.ground_truth(),
                                                             task.schema_ptr()->dimension());
      out["metrics"] = metrics_to_json(metrics);
    }
    out["config"] = json{{"env", cfg.at("env")}, {"discovery", crest::exp::to_json(dcfg)}};
    out["config_fingerprint"] = crest::exp::config_fingerprint(cfg);
    out["seeds"] = json{{"trial", seed}};
    out["evaluations"] = res.evaluations;
    out["inconclusive"] = res.inconclusive;
    out["discarded_contexts"] = res.discarded_contexts;
    return out;
  });

  const std::string path = prepare_out_dir(out_dir) + "/discovery.json";
  crest::exp::write_json_file(path, report);
  std::cout << "relevant variables: " << report.at("relevant").size() << "\n"
            << "wrote " << path << "\n";
  return 0;
}

int run_pretrain(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  const json cfg = crest::exp::load_json_file(config_path);
  const auto tcfg = crest::exp::train_config_from_json(cfg.value("train", json::object()));
  const auto kind = crest::nn::arch_from_string(cfg.value("arch", std::string("rmlp")));
  const auto mode =
      crest::exp::randomization_from_string(cfg.value("randomization", std::string("full")));

  return crest::exp::with_environment(cfg.at("env"), seed, [&](const auto& task) {
    const auto structure = load_structure(cfg, *task.schema_ptr(), task.param_names());
    const auto built =
        crest::nn::build_policy(kind, *task.schema_ptr(), structure, task.param_dim());
    crest::Rng rng(crest::derive_seed(seed, crest::tag("pretrain")));
    auto policy = crest::train::make_policy_state(built, task, rng);

    json oracle;
    if (cfg.value("oracle_init", false)) {
      if constexpr (crest::train::OracleEnvironment<std::decay_t<decltype(task)>>) {
        const auto scfg =
            crest::exp::supervised_config_from_json(cfg.value("supervised", json::object()));
        const int n = cfg.value("oracle_samples", 4096);
        auto sup = crest::train::supervised_pretrain_oracle(built.actor, task, n, rng, scfg);
        sup.weights.log_std = policy.actor_weights.log_std;
        policy.actor_weights = std::move(sup.weights);
        oracle = json{{"samples", n}, {"rmse", sup.rmse}};
        std::cout << "oracle fit rmse: " << sup.rmse << "\n";
      } else {
        throw std::invalid_argument(
            "oracle_init requires an environment with an analytic optimum");
      }
    }

    const auto sampler = make_train_sampler(task, cfg, mode, structure);
    const auto trace = crest::train::pretrain(policy, task, sampler, tcfg, rng);

    json result = base_result("pretrain", cfg, seed, trace);
    result["arch"] = crest::nn::to_string(kind);
    result["randomization"] = crest::exp::to_string(mode);
    result["structure"] = crest::to_json(structure, *task.schema_ptr(), task.param_names());
    if (!oracle.is_null()) result["oracle_init"] = oracle;

    write_train_outputs(prepare_out_dir(out_dir), policy, trace, result);
    print_train_summary(trace, out_dir);
    return 0;
  });
}

int run_transfer(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  const json cfg = crest::exp::load_json_file(config_path);
  const auto tcfg = crest::exp::train_config_from_json(cfg.value("train", json::object()));
  const std::string weights_dir = cfg.at("weights").get<std::string>();
  const auto actor = crest::weights_from_json(crest::exp::load_json_file(weights_dir + "/actor.json"));
  const auto critic =
      crest::weights_from_json(crest::exp::load_json_file(weights_dir + "/critic.json"));

  return crest::exp::with_environment(cfg.at("env"), seed, [&](const auto& task) {
    crest::train::PolicyState policy{actor.spec, critic.spec, actor.weights, critic.weights};
    crest::StructureGraph structure;
    crest::train::Randomization mode = crest::train::Randomization::FullContext;
    if (cfg.contains("randomization"))
      mode = crest::exp::randomization_from_string(cfg.at("randomization").get<std::string>());
    if (mode == crest::train::Randomization::RelevantOnly || cfg.contains("structure"))
      structure = load_structure(cfg, *task.schema_ptr(), task.param_names());

    const auto sampler = make_train_sampler(task, cfg, mode, structure);
    crest::Rng rng(crest::derive_seed(seed, crest::tag("transfer")));
    const auto res = crest::train::transfer_and_finetune(policy, task, sampler, tcfg, rng);

    json result = base_result("transfer", cfg, seed, res.trace);
    result["zero_shot"] = res.zero_shot;
    write_train_outputs(prepare_out_dir(out_dir), policy, res.trace, result);
    std::cout << (res.zero_shot ? "zero-shot transfer succeeded\n" : "fine-tuning required\n");
    print_train_summary(res.trace, out_dir);
    return 0;
  });
}

// Writes the artifacts every suite produces: the raw per-trial records, the
// aggregate table, and a summary with enough provenance to regenerate both.
void write_suite_outputs(const std::string& out_dir, const std::string& experiment,
                         const std::vector<json>& records, const json& cfg, std::uint64_t seed) {
  const std::string records_path = out_dir + "/records.jsonl";
  std::ofstream(records_path, std::ios::trunc).close();
  crest::exp::append_records(records_path, records);

  const auto table = crest::exp::build_table(experiment, records);
  const std::string csv_path = out_dir + "/" + experiment + ".csv";
  crest::exp::write_csv_file(csv_path, table);

  json summary{{"experiment", experiment},
               {"seed", seed},
               {"config_fingerprint", crest::exp::config_fingerprint(cfg)},
               {"records", records.size()}};
  if (experiment == "blocks_scaling") summary["fit"] = crest::exp::scaling_summary(records);
  crest::exp::write_json_file(out_dir + "/summary.json", summary);

  std::cout << records.size() << " records\n"
            << "wrote " << records_path << "\n"
            << "wrote " << csv_path << "\n";
  if (summary.contains("fit")) std::cout << "slope fits: " << summary["fit"].dump() << "\n";
}

int run_suite(const std::vector<std::string>& allowed, const std::string& config_path,
              std::uint64_t seed, const std::string& out_dir, int jobs) {
  json cfg = crest::exp::load_json_file(config_path);
  if (!cfg.contains("experiment")) cfg["experiment"] = allowed.front();
  const std::string experiment = cfg.at("experiment").get<std::string>();
  if (std::find(allowed.begin(), allowed.end(), experiment) == allowed.end()) {
    std::string names;
    for (const auto& a : allowed) names += (names.empty() ? "" : ", ") + a;
    throw std::invalid_argument("this subcommand runs {" + names + "}, got '" + experiment + "'");
  }
  const auto ecfg = crest::exp::experiment_config_from_json(cfg);
  const auto records = crest::exp::run_experiment(ecfg, seed, jobs);
  write_suite_outputs(prepare_out_dir(out_dir), experiment, records, cfg, seed);
  return 0;
}

// Rebuilds tables from stored records; running a suite and reporting on its
// records.jsonl produce the same bytes.
int run_report(const std::string& config_path, const std::string& out_dir) {
  const json cfg = crest::exp::load_json_file(config_path);
  std::vector<std::string> paths;
  const json& src = cfg.at("records");
  if (src.is_string()) {
    paths.push_back(src.get<std::string>());
  } else {
    paths = src.get<std::vector<std::string>>();
  }

  std::map<std::string, std::vector<json>> by_experiment;
  for (const auto& path : paths)
    for (auto& r : crest::exp::read_records(path))
      by_experiment[r.at("experiment").get<std::string>()].push_back(std::move(r));
  if (by_experiment.empty()) throw std::invalid_argument("report: no records found");

  prepare_out_dir(out_dir);
  for (const auto& [experiment, records] : by_experiment) {
    const auto table = crest::exp::build_table(experiment, records);
    const std::string csv_path = out_dir + "/" + experiment + ".csv";
    crest::exp::write_csv_file(csv_path, table);
    std::cout << "wrote " << csv_path << " (" << records.size() << " records)\n";
    if (experiment == "blocks_scaling") {
      crest::exp::write_json_file(out_dir + "/scaling_summary.json",
                                  crest::exp::scaling_summary(records));
      std::cout << "wrote " << out_dir << "/scaling_summary.json\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crest: causal structure discovery and structured policy transfer"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "trial seed");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* discover = app.add_subcommand("discover", "find relevant variables and mappings");
  add_common(discover);
  CLI::App* pretrain =
      app.add_subcommand("pretrain", "domain-randomized training on the internal model");
  add_common(pretrain);
  CLI::App* transfer =
      app.add_subcommand("transfer", "evaluate zero-shot and fine-tune in a target");
  add_common(transfer);
  CLI::App* table1 = app.add_subcommand("table1", "structure discovery study on synthetic tasks");
  add_common(table1);
  CLI::App* scaling =
      app.add_subcommand("blocks-scaling", "training cost versus context size study");
  add_common(scaling);
  CLI::App* color = app.add_subcommand("color-shift", "irrelevant-variable shift study");
  add_common(color);
  CLI::App* stiffness =
      app.add_subcommand("crate-stiffness", "fine-tuning cost versus dynamics mismatch study");
  add_common(stiffness);
  CLI::App* report = app.add_subcommand("report", "rebuild tables from stored records");
  add_common(report);

  CLI11_PARSE(app, argc, argv);

  try {
    if (discover->parsed()) return run_discover(config_path, seed, out_dir);
    if (pretrain->parsed()) return run_pretrain(config_path, seed, out_dir);
    if (transfer->parsed()) return run_transfer(config_path, seed, out_dir);
    if (table1->parsed()) return run_suite({"table1"}, config_path, seed, out_dir, jobs);
    if (scaling->parsed()) return run_suite({"blocks_scaling"}, config_path, seed, out_dir, jobs);
    if (color->parsed())
      return run_suite({"blocks_color_shift", "crate_color_shift"}, config_path, seed, out_dir,
                       jobs);
    if (stiffness->parsed())
      return run_suite({"crate_stiffness", "crate_nominal"}, config_path, seed, out_dir, jobs);
    if (report->parsed()) return run_report(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
