#include <gtest/gtest.h>

#include <cmath>

#include "core/draft_engine.hpp"
#include "core/verifier.hpp"
#include "test_util.hpp"

namespace specvoc {
namespace {

using testing::tiny_model_config;

// Markov target: next-token law depends on the last token only.
TargetDistributionFn markov_target(std::vector<Vector> table) {
  return [table = std::move(table)](std::span<const TokenId> seq) {
    return table[static_cast<std::size_t>(seq.back())];
  };
}

DraftCandidate cand(TokenId tok, double score, std::size_t step, std::ptrdiff_t parent) {
  DraftCandidate c;
  c.token = tok;
  c.score = score;
  c.step = step;
  c.parent = parent;
  return c;
}

TEST(VerifyLossless, EqualDistributionsAcceptEverything) {
  const Vector p{0.2, 0.5, 0.3};
  const auto target = markov_target({p, p, p});
  SeededRng rng(1);
  const std::vector<TokenId> prefix{0};
  for (int i = 0; i < 200; ++i) {
    const std::vector<TokenId> chain{static_cast<TokenId>(rng.categorical(p)),
                                     static_cast<TokenId>(rng.categorical(p)),
                                     static_cast<TokenId>(rng.categorical(p))};
    const std::vector<Vector> q{p, p, p};
    const VerificationOutcome o = verify_chain_lossless(target, prefix, chain, q, rng);
    EXPECT_EQ(o.accepted_count, 3u);
    EXPECT_EQ(o.committed.size(), 4u);
    EXPECT_EQ(o.mode, VerifyMode::kLossless);
  }
}

TEST(VerifyLossless, TwoTokenHandCase) {
  const Vector p{0.6, 0.4};
  const Vector q{0.5, 0.5};
  const auto target = markov_target({p, p});
  SeededRng rng(2);
  const std::vector<TokenId> prefix{0};
  const int n = 200000;
  int accepted = 0;
  std::vector<int> first(2, 0);
  for (int i = 0; i < n; ++i) {
    const std::vector<TokenId> chain{static_cast<TokenId>(rng.categorical(q))};
    const VerificationOutcome o =
        verify_chain_lossless(target, prefix, chain, std::vector<Vector>{q}, rng);
    if (o.accepted_count == 1) {
      ++accepted;
    } else {
      // The residual (p - q)+ is concentrated on token 0.
      EXPECT_EQ(o.committed[0], 0);
      EXPECT_EQ(chain[0], 1);
    }
    ++first[static_cast<std::size_t>(o.committed[0])];
  }
  EXPECT_NEAR(accepted / static_cast<double>(n), 0.9, 0.005);
  EXPECT_NEAR(first[0] / static_cast<double>(n), 0.6, 0.005);
}

TEST(VerifyLossless, CommittedTokensFollowTarget) {
  // Two-position chain against a Markov target; the law of the first two
  // committed tokens must match the target's two-step law.
  const std::vector<Vector> table{{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}, {0.3, 0.3, 0.4}};
  const std::vector<Vector> qtab{{0.2, 0.8, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.0, 1.0}};
  const auto target = markov_target(table);
  SeededRng rng(3);
  const std::vector<TokenId> prefix{0};
  std::vector<double> counts(9, 0.0);
  int pairs = 0;
  for (int i = 0; i < 200000; ++i) {
    const auto x0 = static_cast<TokenId>(rng.categorical(qtab[0]));
    const auto x1 = static_cast<TokenId>(rng.categorical(qtab[x0]));
    const std::vector<TokenId> chain{x0, x1};
    const std::vector<Vector> q{qtab[0], qtab[x0]};
    const auto o = verify_chain_lossless(target, prefix, chain, q, rng);
    if (o.committed.size() >= 2) {
      ++counts[o.committed[0] * 3 + o.committed[1]];
      ++pairs;
    } else {
      // Resample the continuation from the target to complete the pair.
      const auto y = static_cast<TokenId>(rng.categorical(table[o.committed[0]]));
      ++counts[o.committed[0] * 3 + y];
      ++pairs;
    }
  }
  double tv = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      tv += std::abs(counts[a * 3 + b] / pairs - table[0][a] * table[a][b]);
    }
  }
  EXPECT_LT(0.5 * tv, 0.01);
}

TEST(VerifyLossless, Errors) {
  const Vector p{0.5, 0.5};
  const auto target = markov_target({p, p});
  SeededRng rng(4);
  const std::vector<TokenId> prefix{0};
  EXPECT_SPECVOC_ERROR(verify_chain_lossless(target, prefix, std::vector<TokenId>{1},
                                             std::vector<Vector>{{1.0, 0.0}}, rng),
                       ErrorCode::kInvalidProposal);
  EXPECT_SPECVOC_ERROR(verify_chain_lossless(target, prefix, std::vector<TokenId>{1},
                                             std::vector<Vector>{}, rng),
                       ErrorCode::kShapeError);
}

TEST(VerifyGreedy, HandBuiltTreeMatchesWalk) {
  // Target greedy path from token 0: 0 -> 2 -> 1 -> 3.
  const std::vector<Vector> table{{0.1, 0.1, 0.7, 0.1},
                                  {0.1, 0.1, 0.1, 0.7},
                                  {0.1, 0.7, 0.1, 0.1},
                                  {0.7, 0.1, 0.1, 0.1}};
  const auto target = markov_target(table);
  DraftResult d;
  d.candidates = {cand(2, -0.1, 0, -1), cand(1, -0.5, 0, -1), cand(1, -0.2, 1, 0),
                  cand(0, -0.3, 1, 0), cand(3, -0.9, 1, 1)};
  const std::vector<TokenId> prefix{0};
  const VerificationOutcome o = verify_tree_greedy(target, prefix, d);
  EXPECT_EQ(o.accepted_count, 2u);
  EXPECT_EQ(o.committed, (std::vector<TokenId>{2, 1, 3}));
  EXPECT_EQ(o.accepted, (std::vector<bool>{true, true}));

  // Walk oracle over the explicit tree.
  std::vector<TokenId> seq = prefix;
  std::ptrdiff_t node = -1;
  std::size_t accepted = 0;
  for (std::size_t depth = 0; depth < 3; ++depth) {
    const auto best = static_cast<TokenId>(argmax(table[seq.back()]));
    std::ptrdiff_t hit = -1;
    for (std::size_t i = 0; i < d.candidates.size(); ++i) {
      if (d.candidates[i].parent == node && d.candidates[i].token == best) hit = static_cast<std::ptrdiff_t>(i);
    }
    seq.push_back(best);
    if (hit < 0) break;
    ++accepted;
    node = hit;
  }
  EXPECT_EQ(o.accepted_count, accepted);
  EXPECT_EQ(o.committed, std::vector<TokenId>(seq.begin() + 1, seq.end()));
}

TEST(VerifyGreedy, MissingArgmaxAtDepthZero) {
  const std::vector<Vector> table{{0.1, 0.9}, {0.9, 0.1}};
  DraftResult d;
  d.candidates = {cand(0, -0.1, 0, -1)};
  const auto o = verify_tree_greedy(markov_target(table), std::vector<TokenId>{0}, d);
  EXPECT_EQ(o.accepted_count, 0u);
  EXPECT_EQ(o.committed, (std::vector<TokenId>{1}));
  EXPECT_EQ(o.accepted, (std::vector<bool>{false}));
}

TEST(VerifyGreedy, TargetAsDrafterAcceptsGamma) {
  const ToyModelPair m = init_pair(tiny_model_config(16, 6, 5));
  const auto full = ShortlistPolicy::full_vocab(16);
  const auto target = target_distribution_fn(m);
  SeededRng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TokenId> prefix;
    for (int i = 0; i < 5; ++i) prefix.push_back(static_cast<TokenId>(rng.uniform_index(16)));
    const DraftSession s = make_session(m, prefix, 4, 1, full, DrafterKind::kTargetOracle);
    const auto o = verify_tree_greedy(target, prefix, draft_cycle(s, m));
    EXPECT_EQ(o.accepted_count, 4u);
    EXPECT_EQ(o.committed.size(), 5u);
  }
}

// With k_t > 1 the beam ranks by cumulative score, so the target's greedy
// path can be pruned even when the drafter is the target itself.
TEST(VerifyGreedy, WiderBeamCanPruneTargetGreedyPath) {
  ModelConfig c = tiny_model_config(8, 4, 1);
  c.window = 3;
  const ToyModelPair m = init_pair(c);
  const auto full = ShortlistPolicy::full_vocab(8);
  const std::vector<TokenId> prefix{1, 2};
  const auto target = target_distribution_fn(m);
  const DraftResult d = draft_cycle(make_session(m, prefix, 4, 2, full, DrafterKind::kTargetOracle), m);
  const auto o = verify_tree_greedy(target, prefix, d);
  EXPECT_LT(o.accepted_count, 4u);
  // The first rejected greedy token is absent below the last accepted node.
  std::vector<TokenId> seq = prefix;
  seq.insert(seq.end(), o.committed.begin(), o.committed.end() - 1);
  const auto miss = static_cast<TokenId>(argmax(target(seq)));
  EXPECT_EQ(miss, o.committed.back());
  const DraftResult one =
      draft_cycle(make_session(m, prefix, 4, 1, full, DrafterKind::kTargetOracle), m);
  EXPECT_EQ(verify_tree_greedy(target, prefix, one).accepted_count, 4u);
}

TEST(MeanAcceptedLength, Cases) {
  std::vector<VerificationOutcome> v(3);
  v[0].committed.resize(3);
  v[1].committed.resize(4);
  v[2].committed.resize(2);
  EXPECT_DOUBLE_EQ(mean_accepted_length(v), 3.0);
  std::vector<VerificationOutcome> perfect(7);
  for (auto& o : perfect) o.committed.resize(5);
  EXPECT_DOUBLE_EQ(mean_accepted_length(perfect), 5.0);
  EXPECT_SPECVOC_ERROR(mean_accepted_length(std::vector<VerificationOutcome>{}),
                       ErrorCode::kEmptyInput);
}

}  // namespace
}  // namespace specvoc
