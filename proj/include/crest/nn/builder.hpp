#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "crest/core/context.hpp"
#include "crest/core/types.hpp"
#include "crest/nn/network.hpp"

namespace crest::nn {

enum class ArchKind { MLP, RMLP, PMLP, PMLP_R };

inline const char* to_string(ArchKind k) {
  switch (k) {
    case ArchKind::MLP: return "mlp";
    case ArchKind::RMLP: return "rmlp";
    case ArchKind::PMLP: return "pmlp";
    case ArchKind::PMLP_R: return "pmlp-r";
  }
  return "?";
}

inline ArchKind arch_from_string(const std::string& s) {
  if (s == "mlp") return ArchKind::MLP;
  if (s == "rmlp") return ArchKind::RMLP;
  if (s == "pmlp") return ArchKind::PMLP;
  if (s == "pmlp-r" || s == "pmlp_r") return ArchKind::PMLP_R;
  throw std::invalid_argument("unknown architecture '" + s + "'");
}

struct BuiltPolicy {
  ArchKind kind = ArchKind::MLP;
  NetworkSpec actor;
  NetworkSpec critic;
  std::vector<std::string> warnings;
};

// actor + critic weights and biases, plus one log_std per action dimension
inline int total_policy_params(const BuiltPolicy& p) {
  return count_params(p.actor) + count_params(p.critic) + p.actor.output_dim();
}

namespace detail {

inline std::vector<int> sorted_vec(const std::set<int>& s) { return {s.begin(), s.end()}; }

inline std::vector<int> all_indices(int dim) {
  std::vector<int> v(dim);
  for (int i = 0; i < dim; ++i) v[i] = i;
  return v;
}

inline NetworkSpec single_head(std::vector<int> inputs, std::vector<int> widths, int out) {
  NetworkSpec s;
  s.heads.push_back({std::move(inputs), std::move(widths), out});
  return s;
}

}  // namespace detail

// Architecture sizing:
//   mlp    — one head on the full context, hidden widths base_hidden*d, 3 layers
//   rmlp   — same widths, inputs restricted to the relevant set
//   pmlp   — one head per parameter on its parent set, hidden [base_hidden]*3
//   pmlp-r — pmlp with head width snapped to the multiple of base_hidden whose
//            total parameter count is closest to the rmlp's
// Critics read the same inputs as the actor (the relevant set for reduced
// variants) with matching widths and a scalar output.
inline BuiltPolicy build_policy(ArchKind kind, const ContextSchema& schema,
                                const StructureGraph& structure, int param_dim,
                                int base_hidden = 8) {
  if (param_dim <= 0) throw std::invalid_argument("build_policy: param_dim must be positive");
  const int dim = schema.dimension();
  validate(structure, dim);

  const bool needs_relevant = kind != ArchKind::MLP;
  const bool needs_parents = kind == ArchKind::PMLP || kind == ArchKind::PMLP_R;
  if (needs_parents && static_cast<int>(structure.parents.size()) != param_dim)
    throw std::invalid_argument("build_policy: structure parents do not match param_dim");

  BuiltPolicy out;
  out.kind = kind;
  const std::vector<int> full = detail::all_indices(dim);
  const std::vector<int> tau = detail::sorted_vec(structure.relevant);
  if (needs_relevant && tau.empty())
    out.warnings.push_back("relevant set is empty; reduced policy sees a constant input");

  const int wide = base_hidden * param_dim;
  const std::vector<int> wide3 = {wide, wide, wide};

  auto pmlp_spec = [&](int width) {
    NetworkSpec s;
    const std::vector<int> w3 = {width, width, width};
    for (int j = 0; j < param_dim; ++j)
      s.heads.push_back({detail::sorted_vec(structure.parents[j]), w3, 1});
    return s;
  };

  switch (kind) {
    case ArchKind::MLP:
      out.actor = detail::single_head(full, wide3, param_dim);
      out.critic = detail::single_head(full, wide3, 1);
      break;
    case ArchKind::RMLP:
      out.actor = detail::single_head(tau, wide3, param_dim);
      out.critic = detail::single_head(tau, wide3, 1);
      break;
    case ArchKind::PMLP: {
      out.actor = pmlp_spec(base_hidden);
      out.critic = detail::single_head(tau, {base_hidden, base_hidden, base_hidden}, 1);
      break;
    }
    case ArchKind::PMLP_R: {
      BuiltPolicy rmlp = build_policy(ArchKind::RMLP, schema, structure, param_dim, base_hidden);
      const int target = total_policy_params(rmlp);
      int best_width = base_hidden;
      long best_err = -1;
      for (int m = 1; m <= 64; ++m) {
        const int width = m * base_hidden;
        NetworkSpec actor = pmlp_spec(width);
        NetworkSpec critic = detail::single_head(tau, {width, width, width}, 1);
        const long total = count_params(actor) + count_params(critic) + param_dim;
        const long err = std::abs(total - target);
        if (best_err < 0 || err < best_err) {
          best_err = err;
          best_width = width;
        }
      }
      out.actor = pmlp_spec(best_width);
      out.critic = detail::single_head(tau, {best_width, best_width, best_width}, 1);
      break;
    }
  }

  if (needs_parents)
    for (int j = 0; j < param_dim; ++j)
      if (structure.parents[j].empty())
        out.warnings.push_back("parameter " + std::to_string(j) +
                               " has no parents; its head sees a constant input");
  return out;
}

}  // namespace crest::nn
