#pragma once

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace crest {

// Named policy parameter vector.
struct PolicyParameters {
  Eigen::VectorXd values;
  std::vector<std::string> names;
};

inline void validate(const PolicyParameters& p) {
  if (static_cast<int>(p.names.size()) != p.values.size())
    throw std::invalid_argument("policy parameter names/values length mismatch");
  for (int i = 0; i < p.values.size(); ++i)
    if (!std::isfinite(p.values[i]))
      throw std::invalid_argument("policy parameter must be finite");
}

// Discovery result: the relevant context variables and, per policy
// parameter, the context variables it depends on.
struct StructureGraph {
  std::set<int> relevant;
  std::vector<std::set<int>> parents;

  bool is_relevant(int var) const { return relevant.count(var) > 0; }

  int parent_pair_count() const {
    int n = 0;
    for (const auto& p : parents) n += static_cast<int>(p.size());
    return n;
  }
};

inline void validate(const StructureGraph& g, int context_dim) {
  for (int v : g.relevant)
    if (v < 0 || v >= context_dim)
      throw std::invalid_argument("structure graph: relevant index out of range");
  for (const auto& ps : g.parents)
    for (int v : ps) {
      if (v < 0 || v >= context_dim)
        throw std::invalid_argument("structure graph: parent index out of range");
      if (!g.relevant.count(v))
        throw std::invalid_argument("structure graph: parent not in relevant set");
    }
}

// Result of one task execution.
struct TaskOutcome {
  double reward = 0.0;
  bool success = false;
  std::map<std::string, double> diagnostics;
};

// Enforces the invariant success <=> reward >= threshold and finiteness.
inline TaskOutcome make_outcome(double reward, double success_threshold,
                                std::map<std::string, double> diagnostics = {}) {
  if (!std::isfinite(reward)) throw std::runtime_error("non-finite reward from evaluation");
  TaskOutcome out;
  out.reward = reward;
  out.success = reward >= success_threshold;
  out.diagnostics = std::move(diagnostics);
  return out;
}

}  // namespace crest
