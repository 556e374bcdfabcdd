#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "core/draft_engine.hpp"
#include "core/numerics.hpp"
#include "core/toy_lm.hpp"

namespace specvoc {

// Full-vocabulary next-token distribution of the target given a sequence.
using TargetDistributionFn = std::function<Vector(std::span<const TokenId>)>;

TargetDistributionFn target_distribution_fn(const ToyModelPair& model);

enum class VerifyMode { kLossless, kGreedy };

struct VerificationOutcome {
  std::size_t accepted_count = 0;
  std::vector<TokenId> committed;  // accepted prefix plus one corrective or bonus token
  std::vector<bool> accepted;      // one entry per examined position
  VerifyMode mode = VerifyMode::kGreedy;
};

// Rejection-sampling verification of a single proposal chain.
VerificationOutcome verify_chain_lossless(const TargetDistributionFn& target,
                                          std::span<const TokenId> prefix,
                                          std::span<const TokenId> chain,
                                          std::span<const Vector> drafter_dists, SeededRng& rng);

// Deterministic walk of the candidate tree along the target's greedy tokens.
VerificationOutcome verify_tree_greedy(const TargetDistributionFn& target,
                                       std::span<const TokenId> prefix, const DraftResult& draft);

// Mean committed tokens per cycle.
double mean_accepted_length(std::span<const VerificationOutcome> outcomes);

}  // namespace specvoc
