#include "core/shortlist.hpp"

#include <algorithm>
#include <numeric>

#include "core/error.hpp"

namespace specvoc {
namespace {

std::vector<TokenId> sorted_prefix(const FrequencyRanking& ranking, std::size_t k) {
  std::vector<TokenId> out(ranking.order.begin(),
                           ranking.order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

FrequencyRanking frequency_ranking(std::span<const Sequence> corpus, std::size_t vocab_size) {
  require(!corpus.empty(), ErrorCode::kEmptyInput, "frequency_ranking: empty corpus");
  FrequencyRanking r;
  r.counts.assign(vocab_size, 0);
  for (const auto& seq : corpus) {
    validate_tokens(seq, vocab_size);
    for (TokenId t : seq) ++r.counts[static_cast<std::size_t>(t)];
  }
  r.order.resize(vocab_size);
  std::iota(r.order.begin(), r.order.end(), TokenId{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](TokenId a, TokenId b) {
    return r.counts[static_cast<std::size_t>(a)] > r.counts[static_cast<std::size_t>(b)];
  });
  return r;
}

std::size_t position_aware_frequency_budget(std::size_t t, std::size_t k_max) {
  if (t <= 1) return k_max;
  return std::max<std::size_t>(1, k_max / (t + 1));
}

ShortlistPolicy ShortlistPolicy::full_vocab(std::size_t vocab_size) {
  require(vocab_size >= 1, ErrorCode::kEmptyShortlist, "full_vocab: empty vocabulary");
  ShortlistPolicy p;
  p.kind_ = PolicyKind::kFullVocab;
  p.vocab_size_ = vocab_size;
  p.static_tokens_.resize(vocab_size);
  std::iota(p.static_tokens_.begin(), p.static_tokens_.end(), TokenId{0});
  return p;
}

ShortlistPolicy ShortlistPolicy::static_frequency(std::shared_ptr<const FrequencyRanking> ranking,
                                                  std::size_t k) {
  require(ranking != nullptr, ErrorCode::kConfigError, "static_frequency: missing ranking");
  if (k < 1) fail(ErrorCode::kEmptyShortlist, "static_frequency: K must be at least 1");
  if (k > ranking->order.size()) {
    fail(ErrorCode::kInvalidBudget, "static_frequency: K exceeds vocabulary size");
  }
  ShortlistPolicy p;
  p.kind_ = PolicyKind::kStaticFrequency;
  p.vocab_size_ = ranking->order.size();
  p.k_ = k;
  p.static_tokens_ = sorted_prefix(*ranking, k);
  p.ranking_ = std::move(ranking);
  return p;
}

ShortlistPolicy ShortlistPolicy::position_aware_frequency(
    std::shared_ptr<const FrequencyRanking> ranking, std::size_t k_max) {
  require(ranking != nullptr, ErrorCode::kConfigError, "position_aware_frequency: missing ranking");
  if (k_max < 1) fail(ErrorCode::kEmptyShortlist, "position_aware_frequency: k_max must be >= 1");
  if (k_max > ranking->order.size()) {
    fail(ErrorCode::kInvalidBudget, "position_aware_frequency: k_max exceeds vocabulary size");
  }
  ShortlistPolicy p;
  p.kind_ = PolicyKind::kPositionAwareFrequency;
  p.vocab_size_ = ranking->order.size();
  p.k_ = k_max;
  p.ranking_ = std::move(ranking);
  return p;
}

ShortlistPolicy ShortlistPolicy::dynamic_fixed(std::shared_ptr<const RouterModel> router,
                                               std::shared_ptr<const ClusterPartition> partition,
                                               std::size_t k) {
  require(router != nullptr && partition != nullptr, ErrorCode::kConfigError,
          "dynamic_fixed: router and partition required");
  if (router->num_clusters() != partition->num_clusters) {
    fail(ErrorCode::kShapeError, "router output size does not match partition M");
  }
  if (k < 1 || k > partition->num_clusters) {
    fail(ErrorCode::kInvalidBudget, "dynamic_fixed: k outside [1, M]");
  }
  ShortlistPolicy p;
  p.kind_ = PolicyKind::kDynamicFixed;
  p.vocab_size_ = partition->vocab_size();
  p.k_ = k;
  p.router_ = std::move(router);
  p.partition_ = std::move(partition);
  return p;
}

ShortlistPolicy ShortlistPolicy::dynamic_position_aware(
    std::shared_ptr<const RouterModel> router, std::shared_ptr<const ClusterPartition> partition,
    BudgetSchedule schedule) {
  require(router != nullptr && partition != nullptr, ErrorCode::kConfigError,
          "dynamic_position_aware: router and partition required");
  if (router->num_clusters() != partition->num_clusters) {
    fail(ErrorCode::kShapeError, "router output size does not match partition M");
  }
  schedule.validate(partition->num_clusters);
  ShortlistPolicy p;
  p.kind_ = PolicyKind::kDynamicPositionAware;
  p.vocab_size_ = partition->vocab_size();
  p.schedule_ = schedule;
  p.router_ = std::move(router);
  p.partition_ = std::move(partition);
  return p;
}

bool ShortlistPolicy::needs_context() const {
  return kind_ == PolicyKind::kDynamicFixed || kind_ == PolicyKind::kDynamicPositionAware;
}

std::string ShortlistPolicy::name() const {
  switch (kind_) {
    case PolicyKind::kFullVocab: return "full";
    case PolicyKind::kStaticFrequency: return "static:" + std::to_string(k_);
    case PolicyKind::kPositionAwareFrequency: return "pa-fr:" + std::to_string(k_);
    case PolicyKind::kDynamicFixed: return "dynamic-fixed:" + std::to_string(k_);
    case PolicyKind::kDynamicPositionAware:
      return "dynamic-pa:" + std::to_string(schedule_.k_max) + "/" + std::to_string(schedule_.k_min);
  }
  return "unknown";
}

std::size_t ShortlistPolicy::budget_at(std::size_t t) const {
  switch (kind_) {
    case PolicyKind::kFullVocab: return vocab_size_;
    case PolicyKind::kStaticFrequency: return k_;
    case PolicyKind::kPositionAwareFrequency: return position_aware_frequency_budget(t, k_);
    case PolicyKind::kDynamicFixed: return k_;
    case PolicyKind::kDynamicPositionAware: return budget(t, schedule_);
  }
  return 0;
}

Shortlist ShortlistPolicy::shortlist(const ShortlistContext& context, std::size_t t) const {
  Shortlist out;
  out.budget = budget_at(t);
  switch (kind_) {
    case PolicyKind::kFullVocab:
    case PolicyKind::kStaticFrequency:
      out.tokens = static_tokens_;
      break;
    case PolicyKind::kPositionAwareFrequency:
      out.tokens = sorted_prefix(*ranking_, out.budget);
      break;
    case PolicyKind::kDynamicFixed:
    case PolicyKind::kDynamicPositionAware: {
      if (context.prev_hidden.empty() || context.token_embedding.empty()) {
        fail(ErrorCode::kConfigError, "dynamic shortlist needs prev_hidden and token embedding");
      }
      const Vector scores = route(*router_, context.prev_hidden, context.token_embedding);
      out.clusters = select_clusters(scores, out.budget);
      out.tokens = cluster_union(*partition_, out.clusters);
      break;
    }
  }
  if (out.tokens.empty()) fail(ErrorCode::kEmptyShortlist, name() + " produced an empty shortlist");
  return out;
}

double mean_shortlist_size(std::span<const std::size_t> sizes) {
  if (sizes.empty()) fail(ErrorCode::kEmptyTrace, "mean_shortlist_size: empty trace");
  double total = 0.0;
  for (std::size_t s : sizes) total += static_cast<double>(s);
  return total / static_cast<double>(sizes.size());
}

}  // namespace specvoc
