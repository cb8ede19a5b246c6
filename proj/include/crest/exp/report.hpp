#pragma once

// Run records and report generation. Every experiment emits one JSON record
// per unit of work (a seed, or a seed and setting); reports are pure
// functions of those records so regeneration is byte-identical.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "crest/exp/config.hpp"
#include "crest/exp/stats.hpp"

namespace crest::exp {

inline constexpr int kRecordVersion = 1;

inline json make_record(const std::string& experiment, const json& cfg, std::uint64_t seed) {
  return json{{"experiment", experiment},
              {"config_fingerprint", config_fingerprint(cfg)},
              {"seed", seed},
              {"record_version", kRecordVersion},
              {"wall_clock_sec", 0.0}};
}

inline void append_records(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open record file: " + path);
  for (const json& r : records) out << r.dump() << "\n";
}

inline std::vector<json> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open record file: " + path);
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(json::parse(line));
  }
  return records;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  emit(t.header);
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw std::logic_error("csv row width mismatch");
    emit(row);
  }
  return out;
}

inline void write_csv_file(const std::string& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_csv(t);
}

namespace detail {

inline double ksamples(double samples) { return samples / 1000.0; }

template <class Key>
std::vector<Key> sorted_keys(const std::map<Key, std::vector<json>>& groups) {
  std::vector<Key> keys;
  for (const auto& [k, v] : groups) keys.push_back(k);
  return keys;
}

inline std::vector<double> pluck(const std::vector<json>& rs, const char* outer,
                                 const char* field) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const json& r : rs) out.push_back(r.at(outer).at(field).get<double>());
  return out;
}

inline double fraction(const std::vector<json>& rs, const char* outer, const char* field) {
  double hits = 0.0;
  for (const json& r : rs)
    if (r.at(outer).at(field).get<bool>()) hits += 1.0;
  return rs.empty() ? 0.0 : hits / rs.size();
}

}  // namespace detail

// ---- table builders, one per experiment ------------------------------------

inline Table table1_table(const std::vector<json>& records) {
  std::map<std::tuple<std::string, int, std::string>, std::vector<json>> groups;
  for (const json& r : records)
    groups[{r.at("map_class").get<std::string>(), r.at("dim").get<int>(),
            r.at("noise").get<std::string>()}]
        .push_back(r);
  Table t;
  t.header = {"class",  "dim",    "noise",  "trials",      "agg_acc",
              "agg_fp", "map_acc", "map_fp", "failure_rate"};
  // Paper row order: noise level first, then class, then dimension.
  std::vector<std::tuple<std::string, int, std::string>> keys = detail::sorted_keys(groups);
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    const auto rank = [](const auto& k) {
      return std::tuple{std::get<2>(k) == "none" ? 0 : 1, std::get<0>(k) == "linear" ? 0 : 1,
                        std::get<1>(k)};
    };
    return rank(a) < rank(b);
  });
  for (const auto& key : keys) {
    const auto& rs = groups.at(key);
    auto mean_of = [&](const char* field) {
      double s = 0.0;
      for (const json& r : rs) s += r.at("metrics").at(field).get<double>();
      return s / rs.size();
    };
    double discarded = 0.0, base = 0.0;
    for (const json& r : rs) {
      discarded += r.at("discarded_contexts").get<double>();
      base += r.at("base_contexts").get<double>();
    }
    t.rows.push_back({std::get<0>(key), std::to_string(std::get<1>(key)), std::get<2>(key),
                      std::to_string(rs.size()), fmt_num(mean_of("agg_accuracy")),
                      fmt_num(mean_of("agg_false_positive")), fmt_num(mean_of("map_accuracy")),
                      fmt_num(mean_of("map_false_positive")),
                      fmt_num(discarded / (discarded + base))});
  }
  return t;
}

inline Table scaling_table(const std::vector<json>& records) {
  std::map<std::pair<int, std::string>, std::vector<json>> groups;
  for (const json& r : records)
    groups[{r.at("n_blocks").get<int>(), r.at("arch").get<std::string>()}].push_back(r);
  Table t;
  t.header = {"n_blocks",       "arch",           "seeds",           "pre_solved_frac",
              "pre_updates_mean", "pre_updates_std", "pre_ksamples_mean", "zero_shot_frac",
              "finetune_updates_mean", "finetune_updates_std"};
  for (const auto& key : detail::sorted_keys(groups)) {
    const auto& rs = groups.at(key);
    const auto pre = summarize(detail::pluck(rs, "pretrain", "updates_capped"));
    const auto pre_samples = summarize(detail::pluck(rs, "pretrain", "samples"));
    const auto ft = summarize(detail::pluck(rs, "transfer", "updates_capped"));
    t.rows.push_back({std::to_string(key.first), key.second, std::to_string(rs.size()),
                      fmt_num(detail::fraction(rs, "pretrain", "solved")), fmt_num(pre.mean),
                      fmt_num(pre.stddev), fmt_num(detail::ksamples(pre_samples.mean)),
                      fmt_num(detail::fraction(rs, "transfer", "zero_shot")), fmt_num(ft.mean),
                      fmt_num(ft.stddev)});
  }
  return t;
}

// Per-architecture regression of pretraining updates-to-solve against the
// block count, with the 95% interval on the slope.
inline json scaling_summary(const std::vector<json>& records) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> points;
  for (const json& r : records) {
    auto& [xs, ys] = points[r.at("arch").get<std::string>()];
    xs.push_back(r.at("n_blocks").get<double>());
    ys.push_back(r.at("pretrain").at("updates_capped").get<double>());
  }
  json out = json::object();
  for (const auto& [arch, xy] : points) {
    // The regression needs spread on the x axis; partial runs get raw counts only.
    std::set<double> distinct(xy.first.begin(), xy.first.end());
    if (distinct.size() < 3) {
      out[arch] = json{{"slope", nullptr}, {"n", static_cast<int>(xy.first.size())}};
      continue;
    }
    const LineFit f = fit_line(xy.first, xy.second);
    out[arch] = json{{"slope", f.slope},
                     {"slope_stderr", f.slope_stderr},
                     {"slope_lo", f.slope_lo},
                     {"slope_hi", f.slope_hi},
                     {"n", f.n}};
  }
  return out;
}

inline Table color_shift_table(const std::vector<json>& records) {
  std::map<std::string, std::vector<json>> groups;
  for (const json& r : records) groups[r.at("arch").get<std::string>()].push_back(r);
  Table t;
  t.header = {"arch",
              "seeds",
              "pre_solved_frac",
              "zero_shot_frac_noshift",
              "zero_shot_frac_shift",
              "finetune_updates_mean_noshift",
              "finetune_updates_mean_shift",
              "finetune_ksamples_mean_shift",
              "rewards_identical_frac"};
  for (const auto& key : detail::sorted_keys(groups)) {
    const auto& rs = groups.at(key);
    const auto ft_ns = summarize(detail::pluck(rs, "noshift", "updates_capped"));
    const auto ft_s = summarize(detail::pluck(rs, "shift", "updates_capped"));
    const auto ks = summarize(detail::pluck(rs, "shift", "samples"));
    double ident = 0.0;
    for (const json& r : rs)
      if (r.at("rewards_identical").get<bool>()) ident += 1.0;
    t.rows.push_back({key, std::to_string(rs.size()),
                      fmt_num(detail::fraction(rs, "pretrain", "solved")),
                      fmt_num(detail::fraction(rs, "noshift", "zero_shot")),
                      fmt_num(detail::fraction(rs, "shift", "zero_shot")), fmt_num(ft_ns.mean),
                      fmt_num(ft_s.mean), fmt_num(detail::ksamples(ks.mean)),
                      fmt_num(ident / rs.size())});
  }
  return t;
}

inline Table stiffness_table(const std::vector<json>& records) {
  std::map<std::pair<std::string, double>, std::vector<json>> groups;
  for (const json& r : records)
    for (const json& run : r.at("stiffness_runs"))
      groups[{r.at("arch").get<std::string>(), run.at("stiffness").get<double>()}].push_back(run);
  Table t;
  t.header = {"arch",           "stiffness",      "seeds",         "zero_shot_frac",
              "solved_frac",    "finetune_updates_mean", "finetune_updates_std",
              "finetune_ksamples_mean"};
  for (const auto& key : detail::sorted_keys(groups)) {
    const auto& rs = groups.at(key);
    std::vector<double> updates, samples;
    double zs = 0.0, solved = 0.0;
    for (const json& r : rs) {
      updates.push_back(r.at("updates_capped").get<double>());
      samples.push_back(r.at("samples").get<double>());
      zs += r.at("zero_shot").get<bool>() ? 1.0 : 0.0;
      solved += r.at("solved").get<bool>() ? 1.0 : 0.0;
    }
    const auto u = summarize(updates);
    const auto s = summarize(samples);
    t.rows.push_back({key.first, fmt_num(key.second), std::to_string(rs.size()),
                      fmt_num(zs / rs.size()), fmt_num(solved / rs.size()), fmt_num(u.mean),
                      fmt_num(u.stddev), fmt_num(detail::ksamples(s.mean))});
  }
  return t;
}

inline Table discover_table(const std::vector<json>& records) {
  Table t;
  t.header = {"seed", "agg_acc", "agg_fp", "map_acc", "map_fp", "evaluations"};
  std::vector<json> sorted = records;
  std::sort(sorted.begin(), sorted.end(), [](const json& a, const json& b) {
    return a.at("seed").get<std::uint64_t>() < b.at("seed").get<std::uint64_t>();
  });
  for (const json& r : sorted) {
    const json& m = r.at("metrics");
    t.rows.push_back({std::to_string(r.at("seed").get<std::uint64_t>()),
                      fmt_num(m.at("agg_accuracy").get<double>()),
                      fmt_num(m.at("agg_false_positive").get<double>()),
                      fmt_num(m.at("map_accuracy").get<double>()),
                      fmt_num(m.at("map_false_positive").get<double>()),
                      std::to_string(r.at("evaluations").get<long long>())});
  }
  return t;
}

// Builds the CSV for whichever experiment produced the records.
inline Table build_table(const std::string& experiment, const std::vector<json>& records) {
  if (records.empty()) throw std::invalid_argument("report: no records for " + experiment);
  if (experiment == "table1") return table1_table(records);
  if (experiment == "blocks_scaling") return scaling_table(records);
  if (experiment == "blocks_color_shift" || experiment == "crate_color_shift")
    return color_shift_table(records);
  if (experiment == "crate_nominal" || experiment == "crate_stiffness")
    return stiffness_table(records);
  if (experiment == "discover_only") return discover_table(records);
  throw std::invalid_argument("report: unknown experiment '" + experiment + "'");
}

}  // namespace crest::exp
