#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "core/numerics.hpp"
#include "core/vocab_clusters.hpp"

namespace specvoc {

// Two-layer MLP scoring clusters from [prev_hidden | token_embedding].
struct RouterModel {
  DenseMatrix w1;  // input_dim x hidden
  Vector b1;
  DenseMatrix w2;  // hidden x M
  Vector b2;

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t num_clusters() const { return w2.cols(); }

  template <class F>
  void for_each_tensor(F&& f) {
    f("w1", w1.data());
    f("b1", std::span<double>(b1));
    f("w2", w2.data());
    f("b2", std::span<double>(b2));
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    f("w1", w1.data());
    f("b1", std::span<const double>(b1));
    f("w2", w2.data());
    f("b2", std::span<const double>(b2));
  }

  static RouterModel zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_clusters);
  friend bool operator==(const RouterModel&, const RouterModel&) = default;
};

struct BudgetSchedule {
  std::size_t k_max = 16;
  std::size_t k_min = 1;

  // 1 <= k_min <= k_max <= M
  void validate(std::size_t num_clusters) const;
};

struct RouterExample {
  Vector features;                    // [prev_hidden | token_embedding]
  std::vector<std::uint8_t> labels;   // one 0/1 entry per cluster
  std::vector<TokenId> top_tokens;    // the positive token set the labels came from
};

struct RouterTrainConfig {
  std::size_t hidden_dim = 0;  // 0 selects twice the model width
  std::size_t steps = 4000;
  std::size_t batch = 32;
  double lr = 0.5;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
};

RouterModel init_router(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_clusters,
                        std::uint64_t seed);

// Pre-sigmoid cluster scores.
Vector route(const RouterModel& router, std::span<const double> prev_hidden,
             std::span<const double> token_embedding);
Vector route_features(const RouterModel& router, std::span<const double> features);

// Clusters allotted at draft step t: k_max for t in {0, 1}, then
// max(k_min, floor(k_max / ((t + 1) * 2))).
std::size_t budget(std::size_t t, const BudgetSchedule& schedule);

// Top-k cluster ids by score, ties to the lower id.
std::vector<std::size_t> select_clusters(std::span<const double> scores, std::size_t k);

// labels[m] = 1 iff cluster m contains a token of `positives`.
std::vector<std::uint8_t> cluster_labels(std::span<const TokenId> positives,
                                         const ClusterPartition& partition);

// Numerically stable sigmoid + binary cross-entropy for one logit.
double bce_with_logit(double score, double label);

// Mean over examples of the per-example sum of BCE over all clusters.
double router_loss(const RouterModel& router, std::span<const RouterExample> examples);

// Gradient of router_loss, returned in parameter layout.
RouterModel router_loss_gradient(const RouterModel& router, std::span<const RouterExample> examples,
                                 double* loss = nullptr);

double mean_bce_per_label(const RouterModel& router, std::span<const RouterExample> examples);

// Micro-averaged fraction of positive clusters ranked within the top k scores.
double recall_at_k(const RouterModel& router, std::span<const RouterExample> examples, std::size_t k);

RouterModel train_router(std::span<const RouterExample> dataset, std::size_t num_clusters,
                         const RouterTrainConfig& config);

}  // namespace specvoc
