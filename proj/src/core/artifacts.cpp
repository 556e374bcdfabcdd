#include "core/artifacts.hpp"

#include <string>

#include "core/error.hpp"

namespace specvoc {
namespace {

NamedTensor named(const std::string& name, std::size_t rows, std::size_t cols,
                  std::span<const double> values) {
  return NamedTensor{name, rows, cols, std::vector<double>(values.begin(), values.end())};
}

void fill(std::span<double> dst, const NamedTensor& src, std::size_t rows, std::size_t cols) {
  if (src.rows != rows || src.cols != cols) {
    fail(ErrorCode::kShapeError, "tensor '" + src.name + "' has shape " + std::to_string(src.rows) +
                                     "x" + std::to_string(src.cols) + ", expected " +
                                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::copy(src.values.begin(), src.values.end(), dst.begin());
}

void add_block(Checkpoint& ck, const std::string& prefix, const BlockParams& b) {
  const std::size_t d = b.norm_scale.size();
  ck.tensors.push_back(named(prefix + ".norm_scale", 1, d, b.norm_scale));
  ck.tensors.push_back(named(prefix + ".mix_offsets", 1, b.mix_offsets.size(), b.mix_offsets));
  ck.tensors.push_back(named(prefix + ".mix", d, d, b.mix.data()));
  ck.tensors.push_back(named(prefix + ".ff_in", d, 4 * d, b.ff_in.data()));
  ck.tensors.push_back(named(prefix + ".ff_in_bias", 1, 4 * d, b.ff_in_bias));
  ck.tensors.push_back(named(prefix + ".ff_out", 4 * d, d, b.ff_out.data()));
  ck.tensors.push_back(named(prefix + ".ff_out_bias", 1, d, b.ff_out_bias));
}

void read_block(const Checkpoint& ck, const std::string& prefix, BlockParams& b) {
  const std::size_t d = b.norm_scale.size();
  fill(b.norm_scale, ck.tensor(prefix + ".norm_scale"), 1, d);
  fill(b.mix_offsets, ck.tensor(prefix + ".mix_offsets"), 1, b.mix_offsets.size());
  fill(b.mix.data(), ck.tensor(prefix + ".mix"), d, d);
  fill(b.ff_in.data(), ck.tensor(prefix + ".ff_in"), d, 4 * d);
  fill(b.ff_in_bias, ck.tensor(prefix + ".ff_in_bias"), 1, 4 * d);
  fill(b.ff_out.data(), ck.tensor(prefix + ".ff_out"), 4 * d, d);
  fill(b.ff_out_bias, ck.tensor(prefix + ".ff_out_bias"), 1, d);
}

template <class T>
std::vector<T> json_vector(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    fail(ErrorCode::kConfigError, std::string("missing array field '") + key + "'");
  }
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

std::uint64_t save_model(const std::filesystem::path& dir, const ToyModelPair& m) {
  Checkpoint ck;
  ck.kind = "toy_model_pair";
  const auto& c = m.config;
  ck.meta = {{"vocab_size", c.vocab_size},
             {"hidden_dim", c.hidden_dim},
             {"window", c.window},
             {"target_blocks", c.target_blocks},
             {"seed", c.seed}};
  const std::size_t d = c.hidden_dim;
  ck.tensors.push_back(named("embedding", c.vocab_size, d, m.embedding.data()));
  ck.tensors.push_back(named("lm_head", d, c.vocab_size, m.lm_head.data()));
  for (std::size_t b = 0; b < m.target_blocks.size(); ++b) {
    add_block(ck, "target" + std::to_string(b), m.target_blocks[b]);
  }
  ck.tensors.push_back(named("draft_proj", 2 * d, d, m.draft_proj.data()));
  add_block(ck, "draft", m.draft_block);
  return save_checkpoint(dir, ck);
}

ToyModelPair load_model(const std::filesystem::path& dir) {
  const Checkpoint ck = load_checkpoint(dir);
  if (ck.kind != "toy_model_pair") {
    fail(ErrorCode::kConfigError, dir.string() + " holds a '" + ck.kind + "' checkpoint, not a model");
  }
  ModelConfig c;
  c.vocab_size = ck.meta.at("vocab_size").get<std::size_t>();
  c.hidden_dim = ck.meta.at("hidden_dim").get<std::size_t>();
  c.window = ck.meta.at("window").get<std::size_t>();
  c.target_blocks = ck.meta.at("target_blocks").get<std::size_t>();
  c.seed = ck.meta.at("seed").get<std::uint64_t>();
  ToyModelPair m = init_pair(c);
  const std::size_t d = c.hidden_dim;
  fill(m.embedding.data(), ck.tensor("embedding"), c.vocab_size, d);
  fill(m.lm_head.data(), ck.tensor("lm_head"), d, c.vocab_size);
  for (std::size_t b = 0; b < m.target_blocks.size(); ++b) {
    read_block(ck, "target" + std::to_string(b), m.target_blocks[b]);
  }
  fill(m.draft_proj.data(), ck.tensor("draft_proj"), 2 * d, d);
  read_block(ck, "draft", m.draft_block);
  return m;
}

std::uint64_t save_router(const std::filesystem::path& dir, const RouterModel& r) {
  Checkpoint ck;
  ck.kind = "router";
  ck.meta = {{"input_dim", r.input_dim()},
             {"hidden_dim", r.hidden_dim()},
             {"num_clusters", r.num_clusters()}};
  ck.tensors.push_back(named("w1", r.input_dim(), r.hidden_dim(), r.w1.data()));
  ck.tensors.push_back(named("b1", 1, r.hidden_dim(), r.b1));
  ck.tensors.push_back(named("w2", r.hidden_dim(), r.num_clusters(), r.w2.data()));
  ck.tensors.push_back(named("b2", 1, r.num_clusters(), r.b2));
  return save_checkpoint(dir, ck);
}

RouterModel load_router(const std::filesystem::path& dir) {
  const Checkpoint ck = load_checkpoint(dir);
  if (ck.kind != "router") {
    fail(ErrorCode::kConfigError, dir.string() + " holds a '" + ck.kind + "' checkpoint, not a router");
  }
  const auto in = ck.meta.at("input_dim").get<std::size_t>();
  const auto hid = ck.meta.at("hidden_dim").get<std::size_t>();
  const auto M = ck.meta.at("num_clusters").get<std::size_t>();
  RouterModel r = RouterModel::zeros(in, hid, M);
  fill(r.w1.data(), ck.tensor("w1"), in, hid);
  fill(r.b1, ck.tensor("b1"), 1, hid);
  fill(r.w2.data(), ck.tensor("w2"), hid, M);
  fill(r.b2, ck.tensor("b2"), 1, M);
  return r;
}

Json partition_to_json(const ClusterPartition& p) {
  return Json{{"M", p.num_clusters},
              {"assignment", p.assignment},
              {"seed", p.seed},
              {"objective", p.objective},
              {"head_hash", hex64(p.head_hash)},
              {"iterations", p.iterations},
              {"converged", p.converged},
              {"objective_trace", p.objective_trace}};
}

ClusterPartition partition_from_json(const Json& j) {
  if (!j.contains("M")) fail(ErrorCode::kConfigError, "partition JSON lacks 'M'");
  ClusterPartition p = ClusterPartition::from_assignment(
      j.at("M").get<std::size_t>(), json_vector<std::size_t>(j, "assignment"));
  p.seed = j.value("seed", std::uint64_t{0});
  p.objective = j.value("objective", 0.0);
  p.head_hash = std::stoull(j.value("head_hash", std::string("0")), nullptr, 16);
  p.iterations = j.value("iterations", std::size_t{0});
  p.converged = j.value("converged", false);
  if (j.contains("objective_trace")) p.objective_trace = json_vector<double>(j, "objective_trace");
  return p;
}

Json ranking_to_json(const FrequencyRanking& r) {
  return Json{{"counts", r.counts}, {"permutation", r.order}};
}

FrequencyRanking ranking_from_json(const Json& j) {
  FrequencyRanking r;
  r.counts = json_vector<std::uint64_t>(j, "counts");
  r.order = json_vector<TokenId>(j, "permutation");
  const std::size_t n = r.counts.size();
  std::vector<bool> seen(n, false);
  require(r.order.size() == n, ErrorCode::kShapeError, "ranking permutation length != counts length");
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId t = r.order[i];
    if (t < 0 || static_cast<std::size_t>(t) >= n || seen[static_cast<std::size_t>(t)]) {
      fail(ErrorCode::kConfigError, "ranking is not a permutation of [0, |V|)");
    }
    seen[static_cast<std::size_t>(t)] = true;
    if (i > 0 && r.counts[static_cast<std::size_t>(r.order[i - 1])] < r.counts[static_cast<std::size_t>(t)]) {
      fail(ErrorCode::kConfigError, "ranking is not ordered by descending count");
    }
  }
  return r;
}

}  // namespace specvoc
