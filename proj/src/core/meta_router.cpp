#include "core/meta_router.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace specvoc {
namespace {

struct Activations {
  Vector pre;  // hidden pre-activation
  Vector act;
  Vector scores;
};

Activations forward(const RouterModel& r, std::span<const double> x) {
  if (x.size() != r.input_dim()) {
    fail(ErrorCode::kShapeError, "router input has length " + std::to_string(x.size()) +
                                     ", expected " + std::to_string(r.input_dim()));
  }
  Activations a;
  a.pre = matvec(x, r.w1);
  a.act.resize(a.pre.size());
  for (std::size_t j = 0; j < a.pre.size(); ++j) {
    a.pre[j] += r.b1[j];
    a.act[j] = a.pre[j] > 0.0 ? a.pre[j] : 0.0;
  }
  a.scores = matvec(a.act, r.w2);
  for (std::size_t m = 0; m < a.scores.size(); ++m) a.scores[m] += r.b2[m];
  return a;
}

void check_example(const RouterModel& r, const RouterExample& ex) {
  if (ex.labels.size() != r.num_clusters()) {
    fail(ErrorCode::kShapeError, "example label count does not match router output size");
  }
}

}  // namespace

RouterModel RouterModel::zeros(std::size_t input_dim, std::size_t hidden_dim,
                               std::size_t num_clusters) {
  RouterModel r;
  r.w1 = DenseMatrix(input_dim, hidden_dim);
  r.b1.assign(hidden_dim, 0.0);
  r.w2 = DenseMatrix(hidden_dim, num_clusters);
  r.b2.assign(num_clusters, 0.0);
  return r;
}

void BudgetSchedule::validate(std::size_t num_clusters) const {
  if (k_min < 1 || k_min > k_max || k_max > num_clusters) {
    fail(ErrorCode::kInvalidBudget, "budget schedule needs 1 <= k_min <= k_max <= M (k_min=" +
                                        std::to_string(k_min) + ", k_max=" + std::to_string(k_max) +
                                        ", M=" + std::to_string(num_clusters) + ")");
  }
}

RouterModel init_router(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_clusters,
                        std::uint64_t seed) {
  RouterModel r = RouterModel::zeros(input_dim, hidden_dim, num_clusters);
  SeededRng rng = SeededRng::stream(seed, 31);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (double& v : r.w1.data()) v = s1 * rng.normal();
  for (double& v : r.w2.data()) v = s2 * rng.normal();
  r.for_each_tensor([](const char*, std::span<double> t) { round_to_float(t); });
  return r;
}

Vector route(const RouterModel& router, std::span<const double> prev_hidden,
             std::span<const double> token_embedding) {
  if (prev_hidden.size() + token_embedding.size() != router.input_dim()) {
    fail(ErrorCode::kShapeError, "route: [prev_hidden | embedding] length does not match router input");
  }
  Vector x(prev_hidden.begin(), prev_hidden.end());
  x.insert(x.end(), token_embedding.begin(), token_embedding.end());
  return forward(router, x).scores;
}

Vector route_features(const RouterModel& router, std::span<const double> features) {
  return forward(router, features).scores;
}

std::size_t budget(std::size_t t, const BudgetSchedule& schedule) {
  if (t <= 1) return schedule.k_max;
  const std::size_t decayed = schedule.k_max / ((t + 1) * 2);
  return std::max(schedule.k_min, decayed);
}

std::vector<std::size_t> select_clusters(std::span<const double> scores, std::size_t k) {
  return top_k(scores, k).indices;
}

std::vector<std::uint8_t> cluster_labels(std::span<const TokenId> positives,
                                         const ClusterPartition& partition) {
  std::vector<std::uint8_t> labels(partition.num_clusters, 0);
  for (TokenId t : positives) {
    if (t < 0 || static_cast<std::size_t>(t) >= partition.vocab_size()) {
      fail(ErrorCode::kInvalidToken, "positive token " + std::to_string(t) + " outside vocabulary");
    }
    labels[partition.assignment[static_cast<std::size_t>(t)]] = 1;
  }
  return labels;
}

double bce_with_logit(double s, double y) {
  return std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
}

double router_loss(const RouterModel& router, std::span<const RouterExample> examples) {
  require(!examples.empty(), ErrorCode::kEmptyInput, "router_loss: no examples");
  double total = 0.0;
  for (const auto& ex : examples) {
    check_example(router, ex);
    const Vector s = route_features(router, ex.features);
    for (std::size_t m = 0; m < s.size(); ++m) total += bce_with_logit(s[m], ex.labels[m]);
  }
  return total / static_cast<double>(examples.size());
}

RouterModel router_loss_gradient(const RouterModel& router, std::span<const RouterExample> examples,
                                 double* loss) {
  require(!examples.empty(), ErrorCode::kEmptyInput, "router_loss_gradient: no examples");
  RouterModel g = RouterModel::zeros(router.input_dim(), router.hidden_dim(), router.num_clusters());
  const double w = 1.0 / static_cast<double>(examples.size());
  const std::size_t H = router.hidden_dim();
  const std::size_t M = router.num_clusters();
  double total = 0.0;
  Vector ds(M), dact(H);
  for (const auto& ex : examples) {
    check_example(router, ex);
    const Activations a = forward(router, ex.features);
    for (std::size_t m = 0; m < M; ++m) {
      const double y = ex.labels[m];
      total += bce_with_logit(a.scores[m], y);
      const double sig = 1.0 / (1.0 + std::exp(-a.scores[m]));
      ds[m] = w * (sig - y);
      g.b2[m] += ds[m];
    }
    for (std::size_t j = 0; j < H; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        g.w2(j, m) += a.act[j] * ds[m];
        s += router.w2(j, m) * ds[m];
      }
      dact[j] = a.pre[j] > 0.0 ? s : 0.0;
      g.b1[j] += dact[j];
    }
    for (std::size_t i = 0; i < router.input_dim(); ++i) {
      const double xi = ex.features[i];
      if (xi == 0.0) continue;
      auto row = g.w1.row(i);
      for (std::size_t j = 0; j < H; ++j) row[j] += xi * dact[j];
    }
  }
  if (loss) *loss = total * w;
  return g;
}

double mean_bce_per_label(const RouterModel& router, std::span<const RouterExample> examples) {
  return router_loss(router, examples) / static_cast<double>(router.num_clusters());
}

double recall_at_k(const RouterModel& router, std::span<const RouterExample> examples,
                   std::size_t k) {
  std::size_t hits = 0;
  std::size_t positives = 0;
  for (const auto& ex : examples) {
    check_example(router, ex);
    const auto top = select_clusters(route_features(router, ex.features), k);
    for (std::size_t m = 0; m < ex.labels.size(); ++m) positives += ex.labels[m];
    for (std::size_t m : top) hits += ex.labels[m];
  }
  require(positives > 0, ErrorCode::kEmptyInput, "recall_at_k: no positive labels");
  return static_cast<double>(hits) / static_cast<double>(positives);
}

RouterModel train_router(std::span<const RouterExample> dataset, std::size_t num_clusters,
                         const RouterTrainConfig& config) {
  require(!dataset.empty(), ErrorCode::kEmptyInput, "train_router: empty dataset");
  const std::size_t input_dim = dataset.front().features.size();
  const std::size_t hidden = config.hidden_dim > 0 ? config.hidden_dim : input_dim;
  for (const auto& ex : dataset) {
    if (ex.features.size() != input_dim || ex.labels.size() != num_clusters) {
      fail(ErrorCode::kShapeError, "train_router: inconsistent example shapes");
    }
    for (auto y : ex.labels) {
      if (y > 1) fail(ErrorCode::kConfigError, "train_router: labels must be 0 or 1");
    }
  }
  RouterModel router = init_router(input_dim, hidden, num_clusters, config.seed);
  SeededRng rng = SeededRng::stream(config.seed, 32);
  const std::size_t batch = std::max<std::size_t>(1, std::min(config.batch, dataset.size()));
  std::vector<RouterExample> minibatch(batch);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t b = 0; b < batch; ++b) minibatch[b] = dataset[rng.uniform_index(dataset.size())];
    double loss = 0.0;
    RouterModel g = router_loss_gradient(router, minibatch, &loss);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kNonFiniteLoss, "router loss diverged at step " + std::to_string(step));
    }
    double sq = 0.0;
    g.for_each_tensor([&](const char*, std::span<double> t) {
      for (double v : t) sq += v * v;
    });
    const double norm = std::sqrt(sq);
    const double scale = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
    std::vector<std::span<double>> params, grads;
    router.for_each_tensor([&](const char*, std::span<double> t) { params.push_back(t); });
    g.for_each_tensor([&](const char*, std::span<double> t) { grads.push_back(t); });
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k].size(); ++i) params[k][i] -= config.lr * scale * grads[k][i];
    }
  }
  router.for_each_tensor([](const char*, std::span<double> t) { round_to_float(t); });
  return router;
}

}  // namespace specvoc
