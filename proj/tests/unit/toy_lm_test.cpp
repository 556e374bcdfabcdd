#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "core/data_pipeline.hpp"
#include "core/toy_lm.hpp"
#include "test_util.hpp"

namespace specvoc {
namespace {

using testing::tiny_model_config;

Corpus small_corpus(std::size_t vocab, std::size_t n, std::size_t len, std::uint64_t seed) {
  CorpusSpec spec;
  spec.vocab_size = vocab;
  spec.num_sequences = n;
  spec.sequence_length = len;
  spec.seed = seed;
  spec.generator = CorpusGenerator::kPeriodic;
  spec.period = 3;
  return gen_corpus(spec);
}

TEST(ToyLm, UntrainedDistributionNormalized) {
  const ToyModelPair m = init_pair(tiny_model_config(16, 6));
  const std::vector<TokenId> prefix{3, 1, 4, 1, 5};
  const TargetOutput out = target_forward(m, prefix);
  EXPECT_EQ(out.hidden.rows(), prefix.size());
  EXPECT_EQ(out.hidden.cols(), 6u);
  EXPECT_NEAR(testing::sum(out.next_dist), 1.0, 1e-12);
  for (double p : out.next_dist) EXPECT_GT(p, 0.0);
}

TEST(ToyLm, Deterministic) {
  const ToyModelPair a = init_pair(tiny_model_config());
  const ToyModelPair b = init_pair(tiny_model_config());
  EXPECT_EQ(a, b);
  const std::vector<TokenId> prefix{2};
  EXPECT_EQ(target_forward(a, prefix).next_dist, target_forward(b, prefix).next_dist);
  EXPECT_NE(model_hash(a), model_hash(init_pair(tiny_model_config(8, 4, 8))));
}

TEST(ToyLm, WeightsAreFloat32Representable) {
  const ToyModelPair m = init_pair(tiny_model_config());
  for (double v : m.lm_head.data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(ToyLm, CausalPrefixConsistency) {
  const ToyModelPair m = init_pair(tiny_model_config(16, 6));
  const std::vector<TokenId> seq{1, 2, 3, 4, 5, 6, 7};
  const TargetOutput full = target_forward(m, seq);
  for (std::size_t n = 1; n <= seq.size(); ++n) {
    const TargetOutput part = target_forward(m, std::span(seq).first(n));
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(part.hidden(n - 1, c), full.hidden(n - 1, c));
  }
}

TEST(ToyLm, HiddenTailMatchesFullForward) {
  ModelConfig cfg = tiny_model_config(16, 6);
  cfg.target_blocks = 2;
  const ToyModelPair m = init_pair(cfg);
  std::vector<TokenId> seq(3 * receptive_field(cfg) + 2);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = static_cast<TokenId>((i * 7) % 16);
  const TargetOutput full = target_forward(m, seq);
  const DenseMatrix tail = target_hidden_tail(m, seq, 2);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_EQ(tail(r, c), full.hidden(seq.size() - 2 + r, c));
    }
  }
}

TEST(ToyLm, InvalidTokens) {
  const ToyModelPair m = init_pair(tiny_model_config());
  EXPECT_SPECVOC_ERROR(target_forward(m, std::vector<TokenId>{8}), ErrorCode::kInvalidToken);
  EXPECT_SPECVOC_ERROR(target_forward(m, std::vector<TokenId>{-1}), ErrorCode::kInvalidToken);
  EXPECT_SPECVOC_ERROR(target_forward(m, std::vector<TokenId>{}), ErrorCode::kEmptyInput);
  EXPECT_SPECVOC_ERROR(draft_logits(m, Vector(4, 0.0), std::vector<TokenId>{9}),
                       ErrorCode::kIndexOutOfRange);
}

TEST(ToyLm, DraftForwardZeroBlockIsFeedForwardOfEmbedding) {
  ToyModelPair m = init_pair(tiny_model_config());
  const std::size_t d = m.hidden_dim();
  m.draft_block = BlockParams::zeros(d, m.config.window);
  // Projection passes the embedding half straight through.
  m.draft_proj = DenseMatrix(2 * d, d);
  for (std::size_t i = 0; i < d; ++i) m.draft_proj(d + i, i) = 1.0;
  const Vector out = draft_forward(m, Vector(d, 0.0), 0);
  const auto emb = m.embedding_of(0);
  for (std::size_t i = 0; i < d; ++i) EXPECT_EQ(out[i], emb[i]);
  EXPECT_EQ(out, draft_forward(m, Vector(d, 0.0), 0));
}

TEST(ToyLm, DraftLogitsMatchDenseHead) {
  const ToyModelPair m = init_pair(tiny_model_config(16, 6));
  Vector h(6);
  SeededRng rng(4);
  for (double& x : h) x = rng.normal();
  std::vector<TokenId> all(16);
  std::iota(all.begin(), all.end(), 0);
  const Vector dense = matvec(h, m.lm_head);
  EXPECT_EQ(draft_logits(m, h, all), dense);
  const std::vector<TokenId> some{1, 5, 11};
  const Vector part = draft_logits(m, h, some);
  for (std::size_t i = 0; i < some.size(); ++i) EXPECT_EQ(part[i], dense[some[i]]);
  const Vector single = softmax(draft_logits(m, h, std::vector<TokenId>{3}));
  EXPECT_EQ(single, (Vector{1.0}));
}

TEST(ToyLm, ZeroStepsLeavesInitialization) {
  const Corpus c = small_corpus(8, 4, 12, 1);
  TrainConfig t;
  t.target_steps = 0;
  t.draft_steps = 0;
  const ModelConfig mc = tiny_model_config();
  EXPECT_EQ(train_pair(c.sequences, mc, t).lm_head, init_pair(mc).lm_head);
}

TEST(ToyLm, TrainingReducesLossAndImprovesAgreement) {
  const Corpus c = small_corpus(8, 32, 24, 2);
  TrainConfig t;
  t.target_steps = 300;
  t.draft_steps = 300;
  t.target_batch = 4;
  TrainReport rep;
  const ToyModelPair m = train_pair(c.sequences, tiny_model_config(8, 8), t, &rep);
  EXPECT_LT(rep.target_loss_after, 0.5 * rep.target_loss_before);
  EXPECT_GT(rep.draft_agreement_after, rep.draft_agreement_before);
  EXPECT_GT(drafter_agreement(m, c.sequences), 0.8);
  for (const auto& b : m.target_blocks) EXPECT_TRUE(b.all_finite());
}

TEST(ToyLm, CostModelCounts) {
  const ModelConfig c = tiny_model_config(16, 4);
  EXPECT_GT(drafter_core_flops(c), 0.0);
  EXPECT_GT(target_flops_per_token(c), drafter_core_flops(c));
}

}  // namespace
}  // namespace specvoc
