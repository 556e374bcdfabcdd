#include <gtest/gtest.h>

#include <algorithm>
#include <memory>
#include <numeric>

#include "../common/draft_oracle.hpp"
#include "core/draft_engine.hpp"
#include "core/shortlist.hpp"
#include "test_util.hpp"

namespace specvoc {
namespace {

using testing::tiny_model_config;

std::vector<std::size_t> spread_assignment(std::size_t V, std::size_t M) {
  std::vector<std::size_t> a(V);
  for (std::size_t v = 0; v < V; ++v) a[v] = v % M;
  return a;
}

TEST(DraftCycle, TargetOracleGammaOneGivesGreedyToken) {
  const ToyModelPair m = init_pair(tiny_model_config(12, 5));
  const auto policy = ShortlistPolicy::full_vocab(12);
  const std::vector<TokenId> prefix{4, 7, 1};
  const DraftSession s = make_session(m, prefix, 1, 1, policy, DrafterKind::kTargetOracle);
  const DraftResult r = draft_cycle(s, m);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.candidates[0].token,
            static_cast<TokenId>(argmax(target_next_distribution(m, prefix))));
}

TEST(DraftCycle, BeamWidthOneIsAChain) {
  const ToyModelPair m = init_pair(tiny_model_config(12, 5));
  const auto policy = ShortlistPolicy::full_vocab(12);
  const DraftSession s = make_session(m, std::vector<TokenId>{2, 3}, 5, 1, policy);
  const DraftResult r = draft_cycle(s, m);
  ASSERT_EQ(r.candidates.size(), 5u);
  ASSERT_EQ(r.chain.size(), 5u);
  for (std::size_t d = 0; d < 5; ++d) {
    const auto& c = r.candidates[r.chain[d]];
    EXPECT_EQ(c.step, d);
    EXPECT_EQ(c.parent, d == 0 ? -1 : static_cast<std::ptrdiff_t>(r.chain[d - 1]));
  }
}

TEST(DraftCycle, HandSizedInstanceMatchesEnumeration) {
  // d=2, |V|=4, gamma=2, k_t=2.
  ToyModelPair m = init_pair(tiny_model_config(4, 2, 3));
  m.lm_head = DenseMatrix(2, 4, {1.0, -0.5, 0.25, 2.0, 0.5, 1.5, -1.0, 0.0});
  const auto policy = ShortlistPolicy::full_vocab(4);
  const DraftSession s = make_session(m, std::vector<TokenId>{1, 2}, 2, 2, policy);
  const oracle::PathEnumerator en(m, s);
  ASSERT_FALSE(en.has_score_ties());
  EXPECT_EQ(en.nodes().size(), 4u + 16u);
  const auto got = oracle::candidate_paths(draft_cycle(s, m));
  EXPECT_EQ(got, en.beam_candidates());
  EXPECT_EQ(got.size(), 2u + 4u);
}

TEST(DraftCycle, RandomSmallInstancesMatchEnumeration) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SeededRng rng(seed);
    const std::size_t V = 4 + rng.uniform_index(5);
    const std::size_t M = 2;
    const ToyModelPair m = init_pair(tiny_model_config(V, 3, 100 + seed));
    auto part = std::make_shared<const ClusterPartition>(
        ClusterPartition::from_assignment(M, spread_assignment(V, M)));
    auto router = std::make_shared<const RouterModel>(init_router(6, 4, M, seed));
    const auto policy = ShortlistPolicy::dynamic_position_aware(router, part, BudgetSchedule{M, 1});
    std::vector<TokenId> prefix{static_cast<TokenId>(rng.uniform_index(V)),
                                static_cast<TokenId>(rng.uniform_index(V))};
    const std::size_t gamma = 1 + rng.uniform_index(3);
    const std::size_t k_t = 1 + rng.uniform_index(2);
    const DraftSession s = make_session(m, prefix, gamma, k_t, policy);
    const oracle::PathEnumerator en(m, s);
    if (en.has_score_ties()) continue;
    EXPECT_EQ(oracle::candidate_paths(draft_cycle(s, m)), en.beam_candidates()) << "seed " << seed;
  }
}

TEST(DraftCycle, Invariants) {
  const std::size_t V = 24;
  const ToyModelPair m = init_pair(tiny_model_config(V, 4, 9));
  auto part = std::make_shared<const ClusterPartition>(
      ClusterPartition::from_assignment(6, spread_assignment(V, 6)));
  auto router = std::make_shared<const RouterModel>(init_router(8, 8, 6, 1));
  const BudgetSchedule sched{6, 2};
  const auto policy = ShortlistPolicy::dynamic_position_aware(router, part, sched);
  const DraftSession s = make_session(m, std::vector<TokenId>{3, 9, 11}, 4, 3, policy);
  const DraftResult r = draft_cycle(s, m);
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& c = r.candidates[i];
    const auto& e = r.evals[c.eval];
    EXPECT_EQ(e.step, c.step);
    EXPECT_TRUE(std::binary_search(e.shortlist.begin(), e.shortlist.end(), c.token));
    if (c.parent >= 0) {
      const auto& p = r.candidates[static_cast<std::size_t>(c.parent)];
      EXPECT_EQ(p.step + 1, c.step);
      EXPECT_LE(c.score, p.score);
    }
    if (i > 0) {
      EXPECT_GE(r.candidates[i - 1].score, c.score);
    }
  }
  for (const auto& e : r.evals) EXPECT_EQ(e.budget, budget(e.step, sched));
  EXPECT_LE(r.chain.size(), 4u);
  // Chain head is the best depth-0 candidate.
  double best0 = -1e300;
  for (const auto& c : r.candidates) {
    if (c.step == 0) best0 = std::max(best0, c.score);
  }
  EXPECT_EQ(r.candidates[r.chain[0]].score, best0);
  // Chain distributions vanish off the shortlist and sum to one.
  for (std::size_t i = 0; i < r.chain.size(); ++i) {
    const Vector q = r.chain_distribution(i, V);
    const auto& e = r.evals[r.candidates[r.chain[i]].eval];
    for (std::size_t v = 0; v < V; ++v) {
      if (!std::binary_search(e.shortlist.begin(), e.shortlist.end(), static_cast<TokenId>(v))) {
        EXPECT_EQ(q[v], 0.0);
      }
    }
    EXPECT_NEAR(testing::sum(q), 1.0, 1e-12);
  }
}

TEST(DraftCycle, FullShortlistEqualsUnrestrictedDrafter) {
  const ToyModelPair m = init_pair(tiny_model_config(10, 4, 2));
  const auto full = ShortlistPolicy::full_vocab(10);
  const DraftSession s = make_session(m, std::vector<TokenId>{1, 2, 3}, 3, 1, full);
  const DraftResult r = draft_cycle(s, m);
  Vector prev = s.anchor_hidden;
  TokenId tok = 3;
  double score = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    const Vector h = draft_forward(m, prev, tok);
    const Vector lp = log_softmax(matvec(h, m.lm_head));
    const std::size_t best = argmax(lp);
    score += lp[best];
    EXPECT_EQ(r.candidates[r.chain[d]].token, static_cast<TokenId>(best));
    EXPECT_EQ(r.candidates[r.chain[d]].score, score);
    prev = h;
    tok = static_cast<TokenId>(best);
  }
}

TEST(DraftCycle, Errors) {
  const ToyModelPair m = init_pair(tiny_model_config(10, 4));
  auto r = std::make_shared<const FrequencyRanking>(
      frequency_ranking(std::vector<Sequence>{{1, 2, 3}}, 10));
  const auto st = ShortlistPolicy::static_frequency(r, 2);
  EXPECT_SPECVOC_ERROR(draft_cycle(make_session(m, std::vector<TokenId>{1}, 2, 3, st), m),
                       ErrorCode::kInvalidBudget);
  EXPECT_SPECVOC_ERROR(draft_cycle(make_session(m, std::vector<TokenId>{1}, 0, 1, st), m),
                       ErrorCode::kInvalidBudget);
  EXPECT_SPECVOC_ERROR(make_session(m, std::vector<TokenId>{}, 1, 1, st), ErrorCode::kEmptyInput);
  const auto wrong = ShortlistPolicy::full_vocab(11);
  EXPECT_SPECVOC_ERROR(draft_cycle(make_session(m, std::vector<TokenId>{1}, 1, 1, wrong), m),
                       ErrorCode::kShapeError);
}

TEST(DraftChainSampled, SupportAndShape) {
  const ToyModelPair m = init_pair(tiny_model_config(10, 4));
  auto r = std::make_shared<const FrequencyRanking>(
      frequency_ranking(std::vector<Sequence>{{1, 1, 4, 4, 4, 7}}, 10));
  const auto st = ShortlistPolicy::static_frequency(r, 3);
  const DraftSession s = make_session(m, std::vector<TokenId>{0, 5}, 4, 1, st);
  SeededRng rng(1);
  for (int i = 0; i < 50; ++i) {
    const SampledChain c = draft_chain_sampled(s, m, rng);
    ASSERT_EQ(c.tokens.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_GT(c.dists[j][c.tokens[j]], 0.0);
      EXPECT_EQ(c.dists[j][0], 0.0);
      EXPECT_EQ(c.shortlist_sizes[j], 3u);
    }
  }
}

TEST(DraftCost, Linearity) {
  CostDims dims{8, 64, 100.0};
  const std::vector<std::size_t> full(4, 64);
  const std::vector<std::size_t> quarter(4, 16);
  const DraftCost a = draft_cost(full, dims);
  const DraftCost b = draft_cost(quarter, dims);
  EXPECT_EQ(a.head_flops, 4.0 * 2.0 * 8.0 * 64.0);
  EXPECT_EQ(b.head_flops, a.head_flops / 4.0);
  EXPECT_EQ(a.core_flops, 400.0);
  EXPECT_DOUBLE_EQ(a.vocab_dependent_fraction, a.head_flops / (a.head_flops + 400.0));
  EXPECT_EQ(draft_cost(std::vector<std::size_t>{}, dims).vocab_dependent_fraction, 0.0);
}

}  // namespace
}  // namespace specvoc
