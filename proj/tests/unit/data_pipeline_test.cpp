#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "core/data_pipeline.hpp"
#include "core/vocab_clusters.hpp"
#include "test_util.hpp"

namespace specvoc {
namespace {

using testing::tiny_model_config;

TEST(GenCorpus, PeriodicAlternates) {
  CorpusSpec s;
  s.generator = CorpusGenerator::kPeriodic;
  s.period = 2;
  s.vocab_size = 10;
  s.num_sequences = 5;
  s.sequence_length = 12;
  const Corpus c = gen_corpus(s);
  ASSERT_EQ(c.sequences.size(), 5u);
  for (const auto& seq : c.sequences) {
    ASSERT_EQ(seq.size(), 12u);
    EXPECT_NE(seq[0], seq[1]);
    for (std::size_t i = 2; i < seq.size(); ++i) EXPECT_EQ(seq[i], seq[i - 2]);
  }
}

TEST(GenCorpus, ZipfianRankFrequencySlope) {
  CorpusSpec s;
  s.generator = CorpusGenerator::kZipfianBigram;
  s.vocab_size = 256;
  s.num_sequences = 400;
  s.sequence_length = 256;
  s.zipf_exponent = 1.1;
  const Corpus c = gen_corpus(s);
  std::vector<double> counts(256, 0.0);
  for (const auto& seq : c.sequences) {
    for (TokenId t : seq) counts[t] += 1.0;
  }
  std::sort(counts.begin(), counts.end(), std::greater<>());
  // Least-squares slope of log count on log rank over the well-sampled head.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = 64;
  for (int r = 0; r < n; ++r) {
    const double x = std::log(r + 1.0);
    const double y = std::log(counts[r]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -1.1, 0.15);
}

TEST(GenCorpus, MixtureTopicsAreDistinct) {
  CorpusSpec s;
  s.vocab_size = 256;
  s.num_sequences = 200;
  s.sequence_length = 64;
  s.num_topics = 4;
  s.no_repeat_window = 8;
  const Corpus c = gen_corpus(s);
  std::vector<Vector> uni(4, Vector(256, 0.0));
  for (std::size_t i = 0; i < c.sequences.size(); ++i) {
    for (TokenId t : c.sequences[i]) uni[c.topics[i]][t] += 1.0;
  }
  for (auto& u : uni) {
    const double total = testing::sum(u);
    ASSERT_GT(total, 0.0);
    for (double& v : u) v /= total;
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      double tv = 0.0;
      for (std::size_t v = 0; v < 256; ++v) tv += std::abs(uni[a][v] - uni[b][v]);
      EXPECT_GT(0.5 * tv, 0.3);
    }
  }
  // No token recurs within the window.
  for (const auto& seq : c.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t j = i + 1; j < seq.size() && j <= i + 8; ++j) EXPECT_NE(seq[i], seq[j]);
    }
  }
}

TEST(GenCorpus, DeterministicAndValidated) {
  CorpusSpec s;
  s.vocab_size = 64;
  s.num_sequences = 10;
  s.shared_tokens = 8;
  EXPECT_EQ(gen_corpus(s).sequences, gen_corpus(s).sequences);
  s.vocab_size = 1;
  EXPECT_SPECVOC_ERROR(gen_corpus(s), ErrorCode::kConfigError);
  EXPECT_SPECVOC_ERROR(parse_generator("markov"), ErrorCode::kConfigError);
  EXPECT_EQ(parse_generator(generator_name(CorpusGenerator::kPeriodic)), CorpusGenerator::kPeriodic);
}

struct DatasetFixture : ::testing::Test {
  void SetUp() override {
    model = init_pair(tiny_model_config(12, 4, 3));
    KMeansOptions o;
    o.num_clusters = 4;
    partition = spherical_kmeans(normalize_columns(model.lm_head), o);
    partition.head_hash = matrix_hash(model.lm_head);
    CorpusSpec s;
    s.vocab_size = 12;
    s.num_sequences = 4;
    s.sequence_length = 10;
    s.generator = CorpusGenerator::kZipfianBigram;
    corpus = gen_corpus(s).sequences;
  }
  ToyModelPair model;
  ClusterPartition partition;
  std::vector<Sequence> corpus;
};

TEST_F(DatasetFixture, FullTopLGivesAllOnes) {
  const RouterDataset d = collect_router_dataset(model, partition, corpus, {12, 2, 3});
  ASSERT_FALSE(d.examples.empty());
  for (const auto& ex : d.examples) EXPECT_EQ(ex.labels, std::vector<std::uint8_t>(4, 1));
}

TEST_F(DatasetFixture, SingleTopTokenGivesOnePositive) {
  const RouterDataset d = collect_router_dataset(model, partition, corpus, {1, 3, 1});
  for (const auto& ex : d.examples) {
    int ones = 0;
    for (auto y : ex.labels) ones += y;
    EXPECT_EQ(ones, 1);
    EXPECT_EQ(ex.features.size(), 8u);
  }
}

TEST_F(DatasetFixture, LabelsReplayFromTopTokens) {
  const RouterDataset d = collect_router_dataset(model, partition, corpus, {3, 2, 2});
  for (const auto& ex : d.examples) {
    std::vector<std::uint8_t> replay(4, 0);
    for (TokenId t : ex.top_tokens) replay[partition.assignment[t]] = 1;
    EXPECT_EQ(ex.labels, replay);
  }
}

TEST_F(DatasetFixture, SaveLoadRoundTripAndCorruption) {
  const RouterDataset d = collect_router_dataset(model, partition, corpus, {3, 2, 2});
  testing::TempDir dir("ds");
  save_router_dataset(dir.path(), d);
  const RouterDataset back = load_router_dataset(dir.path());
  ASSERT_EQ(back.examples.size(), d.examples.size());
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    EXPECT_EQ(back.examples[i].features, d.examples[i].features);
    EXPECT_EQ(back.examples[i].labels, d.examples[i].labels);
    EXPECT_EQ(back.examples[i].top_tokens, d.examples[i].top_tokens);
  }
  EXPECT_EQ(back.partition_hash, d.partition_hash);
  {
    std::fstream f(dir.path() / "labels.bits", std::ios::in | std::ios::out | std::ios::binary);
    char b = 0;
    f.read(&b, 1);
    f.seekp(0);
    b = static_cast<char>(b ^ 0x01);
    f.write(&b, 1);
  }
  EXPECT_SPECVOC_ERROR(load_router_dataset(dir.path()), ErrorCode::kHashMismatch);
}

TEST_F(DatasetFixture, StalePartitionRejected) {
  partition.head_hash ^= 1;
  EXPECT_SPECVOC_ERROR(collect_router_dataset(model, partition, corpus, {3, 2, 2}),
                       ErrorCode::kHashMismatch);
}

}  // namespace
}  // namespace specvoc
