#pragma once

// Weight transfer into a target domain: score the carried-over policy as-is
// first; only if that fails, fine-tune every weight in place with the same
// update rule used for pretraining.

#include "crest/core/sampler.hpp"
#include "crest/env/environment.hpp"
#include "crest/train/policy.hpp"
#include "crest/train/ppo.hpp"

namespace crest::train {

struct TransferResult {
  bool zero_shot = false;  // solved before any target update
  TrainTrace trace;
};

template <env::TaskEnvironment Env>
TransferResult transfer_and_finetune(PolicyState& policy, const Env& target,
                                     const ContextSampler& contexts, const TrainConfig& cfg,
                                     Rng& rng) {
  TransferResult out;
  out.trace = pretrain(policy, target, contexts, cfg, rng);
  out.zero_shot = out.trace.solved && out.trace.updates_to_solve == 0;
  return out;
}

template <env::TaskEnvironment Env>
TransferResult transfer_and_finetune(PolicyState& policy, const Env& target,
                                     const TrainConfig& cfg, Rng& rng) {
  return transfer_and_finetune(policy, target, ContextSampler(target.schema_ptr()), cfg, rng);
}

}  // namespace crest::train
