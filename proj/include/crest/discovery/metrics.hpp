#pragma once

// Scoring a discovered structure graph against ground truth, for one trial.
// Averaging across trials happens at the experiment level.

#include <algorithm>
#include <stdexcept>

#include "crest/core/types.hpp"

namespace crest::discovery {

struct DiscoveryMetrics {
  double agg_accuracy = 0.0;        // 1 iff every truly relevant variable was found
  double agg_false_positive = 0.0;  // found-but-irrelevant / truly-irrelevant
  double map_accuracy = 0.0;        // 1 iff every true (parameter, variable) pair was found
  double map_false_positive = 0.0;  // found-but-false pairs / truly-absent pairs
};

inline void validate(const DiscoveryMetrics& m) {
  for (double v : {m.agg_accuracy, m.agg_false_positive, m.map_accuracy, m.map_false_positive})
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("discovery metrics must lie in [0, 1]");
}

inline DiscoveryMetrics score_discovery(const StructureGraph& found,
                                        const StructureGraph& truth, int context_dim) {
  if (found.parents.size() != truth.parents.size())
    throw std::invalid_argument("score_discovery: parameter dimension mismatch");
  validate(found, context_dim);
  validate(truth, context_dim);

  DiscoveryMetrics m;
  m.agg_accuracy = std::includes(found.relevant.begin(), found.relevant.end(),
                                 truth.relevant.begin(), truth.relevant.end())
                       ? 1.0
                       : 0.0;
  int extra = 0;
  for (int v : found.relevant) extra += truth.relevant.count(v) ? 0 : 1;
  const int irrelevant = context_dim - static_cast<int>(truth.relevant.size());
  m.agg_false_positive = irrelevant == 0 ? 0.0 : static_cast<double>(extra) / irrelevant;

  bool all_pairs = true;
  int extra_pairs = 0;
  for (size_t j = 0; j < truth.parents.size(); ++j) {
    if (!std::includes(found.parents[j].begin(), found.parents[j].end(),
                       truth.parents[j].begin(), truth.parents[j].end()))
      all_pairs = false;
    for (int v : found.parents[j]) extra_pairs += truth.parents[j].count(v) ? 0 : 1;
  }
  m.map_accuracy = all_pairs ? 1.0 : 0.0;
  const int absent_pairs =
      static_cast<int>(truth.parents.size()) * context_dim - truth.parent_pair_count();
  m.map_false_positive =
      absent_pairs == 0 ? 0.0 : static_cast<double>(extra_pairs) / absent_pairs;
  validate(m);
  return m;
}

}  // namespace crest::discovery
