#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>

#include "core/data_pipeline.hpp"
#include "core/shortlist.hpp"
#include "test_util.hpp"

namespace specvoc {
namespace {

std::shared_ptr<const FrequencyRanking> ranking_of(std::vector<Sequence> corpus, std::size_t V) {
  return std::make_shared<const FrequencyRanking>(frequency_ranking(corpus, V));
}

struct RoutedFixture {
  std::shared_ptr<const ClusterPartition> partition;
  std::shared_ptr<const RouterModel> router;
  Vector prev;
  Vector emb;
};

RoutedFixture routed(std::size_t V, std::size_t M, std::size_t d) {
  std::vector<std::size_t> assign(V);
  for (std::size_t v = 0; v < V; ++v) assign[v] = (v * 3 + 1) % M;
  RoutedFixture f;
  f.partition =
      std::make_shared<const ClusterPartition>(ClusterPartition::from_assignment(M, assign));
  f.router = std::make_shared<const RouterModel>(init_router(2 * d, 8, M, 3));
  SeededRng rng(2);
  f.prev.resize(d);
  f.emb.resize(d);
  for (double& v : f.prev) v = rng.normal();
  for (double& v : f.emb) v = rng.normal();
  return f;
}

TEST(FrequencyRanking, Cases) {
  EXPECT_EQ(frequency_ranking(std::vector<Sequence>{{0, 0, 1}}, 3).order,
            (std::vector<TokenId>{0, 1, 2}));
  EXPECT_EQ(frequency_ranking(std::vector<Sequence>{{3, 2, 1, 0}}, 4).order,
            (std::vector<TokenId>{0, 1, 2, 3}));
  EXPECT_EQ(frequency_ranking(std::vector<Sequence>{{2, 2, 1}}, 4).order,
            (std::vector<TokenId>{2, 1, 0, 3}));
  EXPECT_SPECVOC_ERROR(frequency_ranking(std::vector<Sequence>{}, 3), ErrorCode::kEmptyInput);
}

TEST(FrequencyRanking, MatchesCountingOracle) {
  CorpusSpec spec;
  spec.generator = CorpusGenerator::kZipfianBigram;
  spec.vocab_size = 64;
  spec.num_sequences = 40;
  spec.sequence_length = 50;
  const Corpus c = gen_corpus(spec);
  std::map<TokenId, std::uint64_t> counts;
  for (const auto& s : c.sequences) {
    for (TokenId t : s) ++counts[t];
  }
  std::vector<std::pair<std::int64_t, TokenId>> keyed;
  for (TokenId t = 0; t < 64; ++t) keyed.push_back({-static_cast<std::int64_t>(counts[t]), t});
  std::sort(keyed.begin(), keyed.end());
  const FrequencyRanking r = frequency_ranking(c.sequences, 64);
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    EXPECT_EQ(r.order[i], keyed[i].second);
    EXPECT_EQ(r.counts[keyed[i].second], counts[keyed[i].second]);
  }
}

TEST(ShortlistPolicy, FullVocab) {
  const auto p = ShortlistPolicy::full_vocab(6);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(p.shortlist({}, t).tokens, (std::vector<TokenId>{0, 1, 2, 3, 4, 5}));
  }
  EXPECT_FALSE(p.needs_context());
  EXPECT_EQ(p.name(), "full");
}

TEST(ShortlistPolicy, StaticFrequencyIsSortedTopK) {
  const auto r = ranking_of({{5, 5, 5, 2, 2, 7, 1}}, 8);
  const auto p = ShortlistPolicy::static_frequency(r, 3);
  EXPECT_EQ(p.shortlist({}, 0).tokens, (std::vector<TokenId>{1, 2, 5}));  // 1 and 7 tie; lower id wins
  EXPECT_EQ(p.shortlist({}, 3).tokens, (std::vector<TokenId>{1, 2, 5}));
  EXPECT_EQ(p.name(), "static:3");
  EXPECT_SPECVOC_ERROR(ShortlistPolicy::static_frequency(r, 9), ErrorCode::kInvalidBudget);
  EXPECT_SPECVOC_ERROR(ShortlistPolicy::static_frequency(r, 0), ErrorCode::kEmptyShortlist);
}

TEST(ShortlistPolicy, PositionAwareFrequencyBudgets) {
  EXPECT_EQ(position_aware_frequency_budget(0, 32768), 32768u);
  EXPECT_EQ(position_aware_frequency_budget(1, 32768), 32768u);
  EXPECT_EQ(position_aware_frequency_budget(2, 32768), 10922u);
  EXPECT_EQ(position_aware_frequency_budget(3, 32768), 8192u);
  EXPECT_EQ(position_aware_frequency_budget(9, 4), 1u);
  const auto r = ranking_of({{3, 3, 3, 1, 1, 0}}, 6);
  const auto p = ShortlistPolicy::position_aware_frequency(r, 4);
  EXPECT_EQ(p.shortlist({}, 1).tokens, (std::vector<TokenId>{0, 1, 2, 3}));
  EXPECT_EQ(p.shortlist({}, 2).tokens, (std::vector<TokenId>{3}));
  EXPECT_EQ(p.budget_at(2), 1u);
}

TEST(ShortlistPolicy, DynamicFixedIsClusterUnionOfTopScores) {
  const RoutedFixture f = routed(20, 5, 3);
  const auto p = ShortlistPolicy::dynamic_fixed(f.router, f.partition, 2);
  const Shortlist s = p.shortlist({f.prev, f.emb}, 3);
  const Vector scores = route(*f.router, f.prev, f.emb);
  std::vector<std::size_t> order(5);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<TokenId> want;
  for (std::size_t v = 0; v < 20; ++v) {
    const std::size_t c = f.partition->assignment[v];
    if (c == order[0] || c == order[1]) want.push_back(static_cast<TokenId>(v));
  }
  EXPECT_EQ(s.tokens, want);
  EXPECT_EQ(s.budget, 2u);
  EXPECT_TRUE(p.needs_context());
  EXPECT_SPECVOC_ERROR(p.shortlist({}, 0), ErrorCode::kConfigError);
}

TEST(ShortlistPolicy, DynamicPositionAwareFollowsSchedule) {
  const RoutedFixture f = routed(20, 5, 3);
  const auto p = ShortlistPolicy::dynamic_position_aware(f.router, f.partition, BudgetSchedule{5, 1});
  const Shortlist s0 = p.shortlist({f.prev, f.emb}, 0);
  std::vector<TokenId> all(20);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(s0.tokens, all);
  for (std::size_t t = 0; t < 6; ++t) {
    const Shortlist s = p.shortlist({f.prev, f.emb}, t);
    EXPECT_EQ(s.clusters.size(), budget(t, BudgetSchedule{5, 1}));
    EXPECT_EQ(s.budget, p.budget_at(t));
    EXPECT_TRUE(std::is_sorted(s.tokens.begin(), s.tokens.end()));
  }
  EXPECT_SPECVOC_ERROR(
      ShortlistPolicy::dynamic_position_aware(f.router, f.partition, BudgetSchedule{6, 1}),
      ErrorCode::kInvalidBudget);
}

TEST(MeanShortlistSize, Cases) {
  EXPECT_DOUBLE_EQ(mean_shortlist_size(std::vector<std::size_t>{10, 10, 10}), 10.0);
  EXPECT_DOUBLE_EQ(mean_shortlist_size(std::vector<std::size_t>{8, 4}), 6.0);
  EXPECT_SPECVOC_ERROR(mean_shortlist_size(std::vector<std::size_t>{}), ErrorCode::kEmptyTrace);
}

}  // namespace
}  // namespace specvoc
