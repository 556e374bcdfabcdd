#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/meta_router.hpp"
#include "core/toy_lm.hpp"
#include "core/vocab_clusters.hpp"

namespace specvoc {

enum class CorpusGenerator { kZipfianBigram, kPeriodic, kMixture };

CorpusGenerator parse_generator(const std::string& name);
std::string generator_name(CorpusGenerator g);

struct CorpusSpec {
  std::size_t vocab_size = 512;
  std::size_t num_sequences = 512;
  std::size_t sequence_length = 64;
  std::uint64_t seed = 1;
  CorpusGenerator generator = CorpusGenerator::kMixture;
  double zipf_exponent = 1.1;
  std::size_t num_topics = 4;
  std::size_t period = 2;            // periodic generator
  std::size_t shared_tokens = 32;    // mixture: tokens common to every topic
  std::size_t successors = 4;        // mixture: preferred next tokens per token
  double successor_prob = 0.7;       // mixture: chance of following a successor
  std::size_t no_repeat_window = 0;  // mixture: a token may not recur within this many positions
  double pair_prob = 0.5;            // zipfian_bigram: chance of jumping to the paired token
};

struct Corpus {
  std::vector<Sequence> sequences;
  std::vector<std::size_t> topics;  // per sequence; 0 unless the generator has topics
};

Corpus gen_corpus(const CorpusSpec& spec);

struct RouterDataset {
  std::vector<RouterExample> examples;
  std::size_t num_clusters = 0;
  std::size_t top_l = 0;
  std::uint64_t model_hash = 0;
  std::uint64_t partition_hash = 0;
};

struct CollectOptions {
  std::size_t top_l = 8;
  std::size_t steps = 4;    // drafter steps rolled out per anchor position
  std::size_t stride = 1;   // anchor positions sampled every `stride` tokens
};

std::uint64_t partition_hash(const ClusterPartition& partition);

// Rolls the full-vocabulary drafter forward from target anchors and labels
// each step with the clusters of its top-L tokens.
RouterDataset collect_router_dataset(const ToyModelPair& model, const ClusterPartition& partition,
                                     std::span<const Sequence> corpus, const CollectOptions& options);

// Returns the chained hash of the blobs, also recorded in the manifest.
std::uint64_t save_router_dataset(const std::filesystem::path& dir, const RouterDataset& dataset);
RouterDataset load_router_dataset(const std::filesystem::path& dir);

}  // namespace specvoc
