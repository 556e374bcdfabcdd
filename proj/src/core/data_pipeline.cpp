#include "core/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/io.hpp"

namespace specvoc {
namespace {

Vector zipf_weights(std::size_t n, double exponent) {
  Vector w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = std::pow(static_cast<double>(r + 1), -exponent);
  return w;
}

std::vector<TokenId> permutation(std::size_t n, SeededRng& rng) {
  std::vector<TokenId> p(n);
  std::iota(p.begin(), p.end(), TokenId{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
  return p;
}

void validate_spec(const CorpusSpec& s) {
  if (s.vocab_size < 2) fail(ErrorCode::kConfigError, "corpus vocab_size must be >= 2");
  if (s.num_sequences < 1 || s.sequence_length < 1) {
    fail(ErrorCode::kConfigError, "corpus needs at least one non-empty sequence");
  }
  if (!(s.zipf_exponent > 0.0)) fail(ErrorCode::kConfigError, "zipf exponent must be positive");
  if (s.generator == CorpusGenerator::kPeriodic &&
      (s.period < 1 || s.period > s.vocab_size)) {
    fail(ErrorCode::kConfigError, "period must lie in [1, vocab_size]");
  }
  if (s.generator == CorpusGenerator::kMixture) {
    if (s.num_topics < 1) fail(ErrorCode::kConfigError, "mixture needs at least one topic");
    if (s.shared_tokens + s.num_topics > s.vocab_size) {
      fail(ErrorCode::kConfigError, "mixture: shared tokens leave no room for topic blocks");
    }
    if (s.successors < 1) fail(ErrorCode::kConfigError, "mixture: successors must be >= 1");
    if (s.no_repeat_window + 1 >= s.shared_tokens + (s.vocab_size - s.shared_tokens) / s.num_topics) {
      fail(ErrorCode::kConfigError, "mixture: no_repeat_window must be smaller than a topic vocabulary");
    }
    if (s.successor_prob < 0.0 || s.successor_prob > 1.0) {
      fail(ErrorCode::kConfigError, "mixture: successor_prob outside [0, 1]");
    }
  }
}

Corpus gen_zipfian_bigram(const CorpusSpec& s) {
  SeededRng rng = SeededRng::stream(s.seed, 1);
  const auto rank_to_token = permutation(s.vocab_size, rng);
  std::vector<std::size_t> rank_of(s.vocab_size);
  for (std::size_t r = 0; r < s.vocab_size; ++r) rank_of[static_cast<std::size_t>(rank_to_token[r])] = r;
  const Vector w = zipf_weights(s.vocab_size, s.zipf_exponent);
  Corpus c;
  for (std::size_t i = 0; i < s.num_sequences; ++i) {
    Sequence seq;
    seq.reserve(s.sequence_length);
    seq.push_back(rank_to_token[rng.categorical(w)]);
    while (seq.size() < s.sequence_length) {
      if (rng.uniform() < s.pair_prob) {
        // Adjacent ranks are paired: 0<->1, 2<->3, ...
        const std::size_t r = rank_of[static_cast<std::size_t>(seq.back())] ^ 1U;
        seq.push_back(rank_to_token[std::min(r, s.vocab_size - 1)]);
      } else {
        seq.push_back(rank_to_token[rng.categorical(w)]);
      }
    }
    c.sequences.push_back(std::move(seq));
    c.topics.push_back(0);
  }
  return c;
}

Corpus gen_periodic(const CorpusSpec& s) {
  SeededRng rng = SeededRng::stream(s.seed, 2);
  const auto perm = permutation(s.vocab_size, rng);
  Corpus c;
  for (std::size_t i = 0; i < s.num_sequences; ++i) {
    const std::size_t phase = rng.uniform_index(s.period);
    Sequence seq(s.sequence_length);
    for (std::size_t t = 0; t < s.sequence_length; ++t) seq[t] = perm[(phase + t) % s.period];
    c.sequences.push_back(std::move(seq));
    c.topics.push_back(0);
  }
  return c;
}

Corpus gen_mixture(const CorpusSpec& s) {
  SeededRng rng = SeededRng::stream(s.seed, 3);
  const auto perm = permutation(s.vocab_size, rng);
  const std::size_t T = s.num_topics;
  const std::size_t block = (s.vocab_size - s.shared_tokens) / T;

  // Topic vocabulary: shared tokens plus the topic's own block, in shuffled
  // Zipf rank order. The last topic absorbs the remainder.
  std::vector<std::vector<TokenId>> topic_vocab(T);
  for (std::size_t k = 0; k < T; ++k) {
    std::vector<TokenId> v(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s.shared_tokens));
    const std::size_t lo = s.shared_tokens + k * block;
    const std::size_t hi = k + 1 == T ? s.vocab_size : lo + block;
    v.insert(v.end(), perm.begin() + static_cast<std::ptrdiff_t>(lo),
             perm.begin() + static_cast<std::ptrdiff_t>(hi));
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
    topic_vocab[k] = std::move(v);
  }
  std::vector<Vector> topic_w(T);
  for (std::size_t k = 0; k < T; ++k) topic_w[k] = zipf_weights(topic_vocab[k].size(), s.zipf_exponent);

  // successors[k][v]: preferred continuations of v under topic k.
  std::vector<std::vector<std::vector<TokenId>>> successors(T);
  for (std::size_t k = 0; k < T; ++k) {
    successors[k].resize(s.vocab_size);
    for (std::size_t v = 0; v < s.vocab_size; ++v) {
      for (std::size_t j = 0; j < s.successors; ++j) {
        successors[k][v].push_back(topic_vocab[k][rng.categorical(topic_w[k])]);
      }
    }
  }

  Corpus c;
  for (std::size_t i = 0; i < s.num_sequences; ++i) {
    const std::size_t k = rng.uniform_index(T);
    Sequence seq;
    seq.reserve(s.sequence_length);
    seq.push_back(topic_vocab[k][rng.categorical(topic_w[k])]);
    while (seq.size() < s.sequence_length) {
      const std::size_t lo = seq.size() > s.no_repeat_window ? seq.size() - s.no_repeat_window : 0;
      auto recent = [&](TokenId t) { return std::find(seq.begin() + static_cast<std::ptrdiff_t>(lo), seq.end(), t) != seq.end(); };
      TokenId next = 0;
      do {
        if (rng.uniform() < s.successor_prob) {
          const auto& succ = successors[k][static_cast<std::size_t>(seq.back())];
          next = succ[rng.uniform_index(succ.size())];
        } else {
          next = topic_vocab[k][rng.categorical(topic_w[k])];
        }
      } while (recent(next));
      seq.push_back(next);
    }
    c.sequences.push_back(std::move(seq));
    c.topics.push_back(k);
  }
  return c;
}

}  // namespace

CorpusGenerator parse_generator(const std::string& name) {
  if (name == "zipfian_bigram") return CorpusGenerator::kZipfianBigram;
  if (name == "periodic") return CorpusGenerator::kPeriodic;
  if (name == "mixture") return CorpusGenerator::kMixture;
  fail(ErrorCode::kConfigError, "unknown corpus generator '" + name + "'");
}

std::string generator_name(CorpusGenerator g) {
  switch (g) {
    case CorpusGenerator::kZipfianBigram: return "zipfian_bigram";
    case CorpusGenerator::kPeriodic: return "periodic";
    case CorpusGenerator::kMixture: return "mixture";
  }
  return "unknown";
}

Corpus gen_corpus(const CorpusSpec& spec) {
  validate_spec(spec);
  switch (spec.generator) {
    case CorpusGenerator::kZipfianBigram: return gen_zipfian_bigram(spec);
    case CorpusGenerator::kPeriodic: return gen_periodic(spec);
    case CorpusGenerator::kMixture: return gen_mixture(spec);
  }
  fail(ErrorCode::kConfigError, "unknown corpus generator");
}

std::uint64_t partition_hash(const ClusterPartition& partition) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(4 * partition.assignment.size() + 4);
  auto put = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  };
  put(static_cast<std::uint32_t>(partition.num_clusters));
  for (std::size_t a : partition.assignment) put(static_cast<std::uint32_t>(a));
  return fnv1a64(bytes);
}

RouterDataset collect_router_dataset(const ToyModelPair& model, const ClusterPartition& partition,
                                     std::span<const Sequence> corpus, const CollectOptions& options) {
  require(!corpus.empty(), ErrorCode::kEmptyInput, "collect_router_dataset: empty corpus");
  if (partition.head_hash != matrix_hash(model.lm_head)) {
    fail(ErrorCode::kHashMismatch, "partition head hash " + hex64(partition.head_hash) +
                                       " does not match model head " +
                                       hex64(matrix_hash(model.lm_head)));
  }
  require(partition.vocab_size() == model.vocab_size(), ErrorCode::kShapeError,
          "partition vocabulary does not match the model");
  if (options.top_l < 1 || options.top_l > model.vocab_size()) {
    fail(ErrorCode::kInvalidBudget, "top_l outside [1, |V|]");
  }
  require(options.steps >= 1 && options.stride >= 1, ErrorCode::kConfigError,
          "collect_router_dataset: steps and stride must be >= 1");

  RouterDataset ds;
  ds.num_clusters = partition.num_clusters;
  ds.top_l = options.top_l;
  ds.model_hash = model_hash(model);
  ds.partition_hash = partition_hash(partition);
  const std::size_t d = model.hidden_dim();
  for (const auto& seq : corpus) {
    const DenseMatrix H = target_forward(model, seq).hidden;
    for (std::size_t i = 0; i + 1 < seq.size(); i += options.stride) {
      Vector prev(d, 0.0);
      if (i > 0) prev.assign(H.row(i - 1).begin(), H.row(i - 1).end());
      TokenId token = seq[i];
      for (std::size_t j = 0; j < options.steps; ++j) {
        const Vector h = draft_forward(model, prev, token);
        const Vector logits = matvec(h, model.lm_head);
        const TopK top = top_k(logits, options.top_l);
        RouterExample ex;
        ex.features = prev;
        const auto emb = model.embedding_of(token);
        ex.features.insert(ex.features.end(), emb.begin(), emb.end());
        round_to_float(ex.features);
        for (std::size_t idx : top.indices) ex.top_tokens.push_back(static_cast<TokenId>(idx));
        ex.labels = cluster_labels(ex.top_tokens, partition);
        require(std::any_of(ex.labels.begin(), ex.labels.end(), [](auto v) { return v != 0; }),
                ErrorCode::kShapeError, "router example without a positive cluster");
        ds.examples.push_back(std::move(ex));
        prev = h;
        token = static_cast<TokenId>(top.indices.front());
      }
    }
  }
  return ds;
}

std::uint64_t save_router_dataset(const std::filesystem::path& dir, const RouterDataset& ds) {
  require(!ds.examples.empty(), ErrorCode::kEmptyInput, "save_router_dataset: empty dataset");
  std::filesystem::create_directories(dir);
  const std::size_t n = ds.examples.size();
  const std::size_t f = ds.examples.front().features.size();
  const std::size_t M = ds.num_clusters;
  const std::size_t row_bytes = (M + 7) / 8;

  Vector features;
  features.reserve(n * f);
  std::vector<std::uint8_t> labels(n * row_bytes, 0);
  std::vector<std::uint8_t> tokens;
  tokens.reserve(n * ds.top_l * 4);
  for (std::size_t e = 0; e < n; ++e) {
    const auto& ex = ds.examples[e];
    require(ex.features.size() == f && ex.labels.size() == M && ex.top_tokens.size() == ds.top_l,
            ErrorCode::kShapeError, "save_router_dataset: ragged examples");
    features.insert(features.end(), ex.features.begin(), ex.features.end());
    for (std::size_t m = 0; m < M; ++m) {
      if (ex.labels[m]) labels[e * row_bytes + m / 8] |= static_cast<std::uint8_t>(1U << (m % 8));
    }
    for (TokenId t : ex.top_tokens) {
      const auto u = static_cast<std::uint32_t>(t);
      for (int b = 0; b < 4; ++b) tokens.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
    }
  }
  const auto fbytes = encode_f32(features);
  write_bytes(dir / "features.f32", fbytes);
  write_bytes(dir / "labels.bits", labels);
  write_bytes(dir / "top_tokens.i32", tokens);

  Json manifest;
  manifest["format"] = "specvoc-router-dataset";
  manifest["version"] = 1;
  manifest["examples"] = n;
  manifest["feature_dim"] = f;
  manifest["num_clusters"] = M;
  manifest["top_l"] = ds.top_l;
  manifest["model_hash"] = hex64(ds.model_hash);
  manifest["partition_hash"] = hex64(ds.partition_hash);
  manifest["files"] = {
      {"features.f32", hex64(fnv1a64(fbytes))},
      {"labels.bits", hex64(fnv1a64(labels))},
      {"top_tokens.i32", hex64(fnv1a64(tokens))},
  };
  std::uint64_t chained = fnv1a64(fbytes);
  chained = fnv1a64(labels, chained);
  chained = fnv1a64(tokens, chained);
  manifest["hash"] = hex64(chained);
  write_json(dir / "manifest.json", manifest);
  return chained;
}

RouterDataset load_router_dataset(const std::filesystem::path& dir) {
  const Json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "specvoc-router-dataset") {
    fail(ErrorCode::kConfigError, (dir / "manifest.json").string() + " is not a router dataset");
  }
  RouterDataset ds;
  const auto n = manifest.at("examples").get<std::size_t>();
  const auto f = manifest.at("feature_dim").get<std::size_t>();
  ds.num_clusters = manifest.at("num_clusters").get<std::size_t>();
  ds.top_l = manifest.at("top_l").get<std::size_t>();
  ds.model_hash = std::stoull(manifest.at("model_hash").get<std::string>(), nullptr, 16);
  ds.partition_hash = std::stoull(manifest.at("partition_hash").get<std::string>(), nullptr, 16);

  auto load = [&](const std::string& name) {
    const auto path = dir / name;
    auto bytes = read_bytes(path);
    const std::string expected = manifest.at("files").at(name).get<std::string>();
    if (hex64(fnv1a64(bytes)) != expected) {
      fail(ErrorCode::kHashMismatch, "blob hash mismatch in " + path.string());
    }
    return bytes;
  };
  const Vector features = decode_f32(load("features.f32"));
  const auto labels = load("labels.bits");
  const auto tokens = load("top_tokens.i32");
  const std::size_t M = ds.num_clusters;
  const std::size_t row_bytes = (M + 7) / 8;
  require(features.size() == n * f && labels.size() == n * row_bytes &&
              tokens.size() == n * ds.top_l * 4,
          ErrorCode::kShapeError, "router dataset blobs do not match the manifest");
  ds.examples.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    auto& ex = ds.examples[e];
    ex.features.assign(features.begin() + static_cast<std::ptrdiff_t>(e * f),
                       features.begin() + static_cast<std::ptrdiff_t>((e + 1) * f));
    ex.labels.resize(M);
    for (std::size_t m = 0; m < M; ++m) ex.labels[m] = (labels[e * row_bytes + m / 8] >> (m % 8)) & 1U;
    for (std::size_t l = 0; l < ds.top_l; ++l) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) {
        u |= static_cast<std::uint32_t>(tokens[(e * ds.top_l + l) * 4 + static_cast<std::size_t>(b)])
             << (8 * b);
      }
      ex.top_tokens.push_back(static_cast<TokenId>(u));
    }
  }
  return ds;
}

}  // namespace specvoc
