#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/numerics.hpp"

namespace specvoc {

using Sequence = std::vector<TokenId>;

struct ModelConfig {
  std::size_t vocab_size = 512;
  std::size_t hidden_dim = 32;
  std::size_t window = 8;
  std::size_t target_blocks = 2;
  std::uint64_t seed = 1;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  std::size_t target_steps = 1200;
  std::size_t draft_steps = 3000;
  std::size_t target_batch = 4;  // sequences per step
  std::size_t draft_batch = 32;  // positions per step
  double target_lr = 0.5;
  double draft_lr = 0.5;
  double clip_norm = 1.0;
  double hidden_regression_weight = 0.1;
  std::uint64_t seed = 1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Residual block: x + mix(u) + ffn(u) with u = norm_scale * rms_normalize(x).
// mix(u)_t = (sum_k mix_offsets[k] * u_{t-k}) * mix over a causal window.
struct BlockParams {
  Vector norm_scale;   // d
  Vector mix_offsets;  // window
  DenseMatrix mix;     // d x d
  DenseMatrix ff_in;   // d x 4d
  Vector ff_in_bias;   // 4d
  DenseMatrix ff_out;  // 4d x d
  Vector ff_out_bias;  // d

  static BlockParams zeros(std::size_t hidden_dim, std::size_t window);

  // Visits every tensor as (name, flat span) in a fixed order.
  template <class F>
  void for_each_tensor(F&& f) {
    f("norm_scale", std::span<double>(norm_scale));
    f("mix_offsets", std::span<double>(mix_offsets));
    f("mix", mix.data());
    f("ff_in", ff_in.data());
    f("ff_in_bias", std::span<double>(ff_in_bias));
    f("ff_out", ff_out.data());
    f("ff_out_bias", std::span<double>(ff_out_bias));
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    f("norm_scale", std::span<const double>(norm_scale));
    f("mix_offsets", std::span<const double>(mix_offsets));
    f("mix", mix.data());
    f("ff_in", ff_in.data());
    f("ff_in_bias", std::span<const double>(ff_in_bias));
    f("ff_out", ff_out.data());
    f("ff_out_bias", std::span<const double>(ff_out_bias));
  }

  bool all_finite() const;
  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

// Target model and single-block drafter sharing one embedding and LM head.
struct ToyModelPair {
  ModelConfig config;
  TrainConfig train;
  DenseMatrix embedding;  // |V| x d
  DenseMatrix lm_head;    // d x |V|
  std::vector<BlockParams> target_blocks;
  DenseMatrix draft_proj;  // 2d x d, consumes [prev_hidden | embedding]
  BlockParams draft_block;

  std::size_t vocab_size() const { return config.vocab_size; }
  std::size_t hidden_dim() const { return config.hidden_dim; }
  std::span<const double> embedding_of(TokenId token) const;

  friend bool operator==(const ToyModelPair&, const ToyModelPair&) = default;
};

struct TargetOutput {
  DenseMatrix hidden;  // n x d
  Vector next_dist;    // |V|
};

ToyModelPair init_pair(const ModelConfig& config);

// Number of trailing tokens that determine the hidden state at a position.
std::size_t receptive_field(const ModelConfig& config);

TargetOutput target_forward(const ToyModelPair& model, std::span<const TokenId> prefix);

// Hidden states of the last `count` positions computed from the shortest
// sufficient suffix; bit-identical to the matching rows of target_forward.
DenseMatrix target_hidden_tail(const ToyModelPair& model, std::span<const TokenId> prefix,
                               std::size_t count);

Vector target_next_distribution(const ToyModelPair& model, std::span<const TokenId> prefix);

Vector draft_forward(const ToyModelPair& model, std::span<const double> prev_hidden,
                     TokenId token);

Vector draft_logits(const ToyModelPair& model, std::span<const double> hidden,
                    std::span<const TokenId> shortlist);

struct TrainReport {
  double target_loss_before = 0.0;
  double target_loss_after = 0.0;
  double heldout_loss_before = 0.0;
  double heldout_loss_after = 0.0;
  double draft_agreement_before = 0.0;
  double draft_agreement_after = 0.0;
};

// Trains the target, then freezes embedding/head and trains the drafter.
ToyModelPair train_pair(std::span<const Sequence> corpus, const ModelConfig& model_config,
                        const TrainConfig& train_config, TrainReport* report = nullptr,
                        std::span<const Sequence> heldout = {});

void train_target(ToyModelPair& model, std::span<const Sequence> corpus);
void train_drafter(ToyModelPair& model, std::span<const Sequence> corpus);

// Mean next-token cross-entropy of the target over all positions.
double target_cross_entropy(const ToyModelPair& model, std::span<const Sequence> sequences);

// Fraction of positions where the drafter (fed the target's previous hidden
// state) and the target agree on the top-1 next token.
double drafter_agreement(const ToyModelPair& model, std::span<const Sequence> sequences);

std::uint64_t matrix_hash(const DenseMatrix& m);
std::uint64_t model_hash(const ToyModelPair& model);

// Multiply-add counts used by the cost model.
double drafter_core_flops(const ModelConfig& config);
double target_flops_per_token(const ModelConfig& config);

void validate_tokens(std::span<const TokenId> tokens, std::size_t vocab_size);

}  // namespace specvoc
