#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "core/numerics.hpp"
#include "core/shortlist.hpp"
#include "core/toy_lm.hpp"

namespace specvoc {

enum class DrafterKind {
  kDrafter,
  // Debug: the target's own hidden states stand in for the drafter.
  kTargetOracle,
};

struct DraftSession {
  std::vector<TokenId> prefix;
  Vector anchor_hidden;  // target hidden state at the second-to-last prefix position
  std::size_t gamma = 4;
  std::size_t k_t = 4;
  const ShortlistPolicy* policy = nullptr;
  DrafterKind drafter = DrafterKind::kDrafter;
};

// Builds a session whose anchor is the target hidden state preceding the
// last prefix token (zeros for a one-token prefix).
DraftSession make_session(const ToyModelPair& model, std::span<const TokenId> prefix,
                          std::size_t gamma, std::size_t k_t, const ShortlistPolicy& policy,
                          DrafterKind drafter = DrafterKind::kDrafter);

struct DraftCandidate {
  TokenId token = 0;
  double score = 0.0;  // cumulative log-probability
  std::size_t step = 0;
  std::ptrdiff_t parent = -1;  // index into candidates, -1 at depth 0
  std::size_t eval = 0;        // index into evals
};

// One drafter evaluation: a beam expanded at one step.
struct DraftEval {
  std::size_t step = 0;
  std::size_t budget = 0;
  std::vector<TokenId> shortlist;
  std::vector<std::size_t> clusters;
  Vector log_probs;  // over shortlist positions
};

struct DraftResult {
  std::vector<DraftCandidate> candidates;  // re-ranked, best first
  std::vector<std::size_t> chain;          // candidate indices of the greedy path
  std::vector<DraftEval> evals;

  std::vector<TokenId> chain_tokens() const;
  // Drafter distribution for chain position i, zero outside the shortlist.
  Vector chain_distribution(std::size_t i, std::size_t vocab_size) const;
  std::vector<std::size_t> shortlist_sizes() const;
};

DraftResult draft_cycle(const DraftSession& session, const ToyModelPair& model);

// Single chain sampled from the shortlist-restricted drafter distributions.
struct SampledChain {
  std::vector<TokenId> tokens;
  std::vector<Vector> dists;  // full-vocabulary q per position
  std::vector<std::size_t> shortlist_sizes;
};

SampledChain draft_chain_sampled(const DraftSession& session, const ToyModelPair& model,
                                 SeededRng& rng);

struct CostDims {
  std::size_t hidden_dim = 0;
  std::size_t vocab_size = 0;
  double core_flops_per_eval = 0.0;
};

struct DraftCost {
  double head_flops = 0.0;
  double core_flops = 0.0;
  double vocab_dependent_fraction = 0.0;
};

DraftCost draft_cost(std::span<const std::size_t> shortlist_sizes, const CostDims& dims);
DraftCost draft_cost(const DraftResult& result, const CostDims& dims);

}  // namespace specvoc
