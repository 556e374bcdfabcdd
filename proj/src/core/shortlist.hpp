#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/meta_router.hpp"
#include "core/numerics.hpp"
#include "core/toy_lm.hpp"
#include "core/vocab_clusters.hpp"

namespace specvoc {

struct FrequencyRanking {
  std::vector<TokenId> order;          // most frequent first
  std::vector<std::uint64_t> counts;   // indexed by token id
};

// Ranks tokens by corpus count, ties to the lower id; unseen tokens follow in
// id order.
FrequencyRanking frequency_ranking(std::span<const Sequence> corpus, std::size_t vocab_size);

enum class PolicyKind {
  kFullVocab,
  kStaticFrequency,
  kPositionAwareFrequency,
  kDynamicFixed,
  kDynamicPositionAware,
};

struct ShortlistContext {
  std::span<const double> prev_hidden;
  std::span<const double> token_embedding;
};

struct Shortlist {
  std::vector<TokenId> tokens;         // sorted; position -> vocabulary id
  std::vector<std::size_t> clusters;   // selected clusters (dynamic variants)
  std::size_t budget = 0;              // clusters (dynamic) or tokens (frequency variants)
};

class ShortlistPolicy {
 public:
  static ShortlistPolicy full_vocab(std::size_t vocab_size);
  static ShortlistPolicy static_frequency(std::shared_ptr<const FrequencyRanking> ranking,
                                          std::size_t k);
  static ShortlistPolicy position_aware_frequency(std::shared_ptr<const FrequencyRanking> ranking,
                                                  std::size_t k_max);
  static ShortlistPolicy dynamic_fixed(std::shared_ptr<const RouterModel> router,
                                       std::shared_ptr<const ClusterPartition> partition,
                                       std::size_t k);
  static ShortlistPolicy dynamic_position_aware(std::shared_ptr<const RouterModel> router,
                                                std::shared_ptr<const ClusterPartition> partition,
                                                BudgetSchedule schedule);

  PolicyKind kind() const { return kind_; }
  std::size_t vocab_size() const { return vocab_size_; }
  bool needs_context() const;
  std::string name() const;

  // Budget the policy applies at draft step t (clusters or tokens).
  std::size_t budget_at(std::size_t t) const;

  Shortlist shortlist(const ShortlistContext& context, std::size_t t) const;

  const ClusterPartition* partition() const { return partition_.get(); }

 private:
  PolicyKind kind_ = PolicyKind::kFullVocab;
  std::size_t vocab_size_ = 0;
  std::size_t k_ = 0;
  BudgetSchedule schedule_;
  std::shared_ptr<const FrequencyRanking> ranking_;
  std::shared_ptr<const RouterModel> router_;
  std::shared_ptr<const ClusterPartition> partition_;
  std::vector<TokenId> static_tokens_;
};

// Frequency-shortlist size at step t: k_max for t in {0, 1}, then
// max(1, floor(k_max / (t + 1))).
std::size_t position_aware_frequency_budget(std::size_t t, std::size_t k_max);

double mean_shortlist_size(std::span<const std::size_t> sizes);

}  // namespace specvoc
