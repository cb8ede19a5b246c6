#pragma once

// JSON-lines persistence for training traces: one object per update row.

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "crest/train/ppo.hpp"

namespace crest::train {

using json = nlohmann::json;

// JSON has no NaN literal; the pre-update row stores null for batch_reward.
inline json trace_row_to_json(const TrainTraceRow& row) {
  json j;
  j["update"] = row.update;
  if (std::isfinite(row.batch_reward)) {
    j["batch_reward"] = row.batch_reward;
  } else {
    j["batch_reward"] = nullptr;
  }
  j["validation_reward"] = row.validation_reward;
  j["solved"] = row.solved;
  return j;
}

inline TrainTraceRow trace_row_from_json(const json& j) {
  TrainTraceRow row;
  row.update = j.at("update").get<int>();
  const auto& br = j.at("batch_reward");
  row.batch_reward = br.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                  : br.get<double>();
  row.validation_reward = j.at("validation_reward").get<double>();
  row.solved = j.at("solved").get<bool>();
  return row;
}

inline void append_trace_rows(const std::string& path, const TrainTrace& trace,
                              std::size_t from_row = 0) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open trace file: " + path);
  for (std::size_t i = from_row; i < trace.rows.size(); ++i) {
    out << trace_row_to_json(trace.rows[i]).dump() << '\n';
  }
}

inline std::vector<TrainTraceRow> read_trace_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<TrainTraceRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(trace_row_from_json(json::parse(line)));
  }
  return rows;
}

}  // namespace crest::train
