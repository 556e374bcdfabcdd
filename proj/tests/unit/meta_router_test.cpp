#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "core/meta_router.hpp"
#include "test_util.hpp"

namespace specvoc {
namespace {

std::vector<RouterExample> random_examples(std::size_t n, std::size_t in, std::size_t M,
                                           SeededRng& rng) {
  std::vector<RouterExample> out(n);
  for (auto& ex : out) {
    ex.features.resize(in);
    for (double& v : ex.features) v = rng.normal();
    ex.labels.resize(M);
    for (auto& y : ex.labels) y = rng.uniform() < 0.4 ? 1 : 0;
  }
  return out;
}

TEST(Route, ZeroWeightsGiveZeroScores) {
  const RouterModel r = RouterModel::zeros(4, 3, 5);
  const Vector h{1, 2};
  const Vector e{3, 4};
  EXPECT_EQ(route(r, h, e), Vector(5, 0.0));
}

TEST(Route, DeterministicAndShapeChecked) {
  const RouterModel r = init_router(4, 6, 5, 3);
  const Vector h{1, -2};
  const Vector e{0.5, 4};
  EXPECT_EQ(route(r, h, e), route(r, h, e));
  EXPECT_EQ(route(r, h, e), route_features(r, Vector{1, -2, 0.5, 4}));
  EXPECT_SPECVOC_ERROR(route(r, h, Vector{1}), ErrorCode::kShapeError);
}

TEST(Budget, GoldenValues) {
  BudgetSchedule s{16, 1};
  EXPECT_EQ(budget(0, s), 16u);
  EXPECT_EQ(budget(1, s), 16u);
  EXPECT_EQ(budget(2, s), 2u);
  EXPECT_EQ(budget(3, s), 2u);
  EXPECT_EQ(budget(4, s), 1u);
  EXPECT_EQ(budget(5, BudgetSchedule{4, 1}), 1u);
  EXPECT_EQ(budget(5, BudgetSchedule{4, 2}), 2u);
}

TEST(Budget, NonIncreasingAndClamped) {
  for (std::size_t kmax = 1; kmax <= 64; ++kmax) {
    for (std::size_t kmin = 1; kmin <= kmax; ++kmin) {
      BudgetSchedule s{kmax, kmin};
      for (std::size_t t = 1; t < 40; ++t) {
        EXPECT_LE(budget(t, s), budget(t - 1, s));
        EXPECT_GE(budget(t, s), kmin);
        EXPECT_LE(budget(t, s), kmax);
      }
    }
  }
}

TEST(Budget, ScheduleValidation) {
  EXPECT_SPECVOC_ERROR((BudgetSchedule{8, 0}.validate(8)), ErrorCode::kInvalidBudget);
  EXPECT_SPECVOC_ERROR((BudgetSchedule{4, 5}.validate(8)), ErrorCode::kInvalidBudget);
  EXPECT_SPECVOC_ERROR((BudgetSchedule{9, 1}.validate(8)), ErrorCode::kInvalidBudget);
  EXPECT_NO_THROW((BudgetSchedule{8, 8}.validate(8)));
}

TEST(SelectClusters, Cases) {
  EXPECT_EQ(select_clusters(Vector{5, 4, 3, 2, 1}, 3), (std::vector<std::size_t>{0, 1, 2}));
  std::vector<std::size_t> sel = select_clusters(Vector{0.3, 0.1, 0.2}, 3);
  std::sort(sel.begin(), sel.end());
  EXPECT_EQ(sel, (std::vector<std::size_t>{0, 1, 2}));
  SeededRng rng(8);
  Vector s(20);
  for (double& v : s) v = rng.normal();
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  std::vector<std::size_t> got = select_clusters(s, 6);
  std::vector<std::size_t> want(order.begin(), order.begin() + 6);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
}

TEST(ClusterLabels, Cases) {
  const ClusterPartition p = ClusterPartition::from_assignment(2, {0, 0, 1, 1});
  EXPECT_EQ(cluster_labels(std::vector<TokenId>{1}, p), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(cluster_labels(std::vector<TokenId>{1, 3}, p), (std::vector<std::uint8_t>{1, 1}));
  EXPECT_SPECVOC_ERROR(cluster_labels(std::vector<TokenId>{4}, p), ErrorCode::kInvalidToken);
}

TEST(ClusterLabels, MatchesSetIntersection) {
  SeededRng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t V = 30;
    const std::size_t M = 5;
    std::vector<std::size_t> assign(V);
    for (std::size_t v = 0; v < V; ++v) assign[v] = v < M ? v : rng.uniform_index(M);
    const ClusterPartition p = ClusterPartition::from_assignment(M, assign);
    std::vector<TokenId> pos;
    for (std::size_t v = 0; v < V; ++v) {
      if (rng.uniform() < 0.1) pos.push_back(static_cast<TokenId>(v));
    }
    const auto labels = cluster_labels(pos, p);
    const std::set<TokenId> S(pos.begin(), pos.end());
    for (std::size_t m = 0; m < M; ++m) {
      const bool hit = std::any_of(p.members[m].begin(), p.members[m].end(),
                                   [&](TokenId t) { return S.count(t) > 0; });
      EXPECT_EQ(labels[m], hit ? 1 : 0);
    }
  }
}

TEST(Bce, StableAndExact) {
  EXPECT_NEAR(bce_with_logit(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_with_logit(800.0, 0.0), 800.0, 1e-9);
  EXPECT_NEAR(bce_with_logit(-800.0, 1.0), 800.0, 1e-9);
  EXPECT_TRUE(std::isfinite(bce_with_logit(800.0, 1.0)));
}

TEST(RouterLoss, ZeroRouterGivesLn2PerLabel) {
  const RouterModel r = RouterModel::zeros(3, 4, 2);
  std::vector<RouterExample> ex(2);
  ex[0] = {{1, 2, 3}, {1, 0}, {}};
  ex[1] = {{0, 1, 0}, {0, 1}, {}};
  EXPECT_NEAR(mean_bce_per_label(r, ex), std::log(2.0), 1e-15);
  EXPECT_NEAR(router_loss(r, ex), 2.0 * std::log(2.0), 1e-15);
}

TEST(RouterLoss, GradientMatchesCentralDifferences) {
  SeededRng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    RouterModel r = init_router(5, 4, 3, 100 + trial);
    for (double& v : r.b1) v = 0.1 * rng.normal();  // keep units away from the ReLU kink
    const auto ex = random_examples(6, 5, 3, rng);
    const RouterModel g = router_loss_gradient(r, ex);
    std::vector<double> analytic;
    std::vector<double> numeric;
    const double h = 1e-5;
    RouterModel probe = r;
    std::vector<std::span<double>> params;
    probe.for_each_tensor([&](const char*, std::span<double> s) { params.push_back(s); });
    std::vector<std::span<const double>> grads;
    g.for_each_tensor([&](const char*, std::span<const double> s) { grads.push_back(s); });
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        const double keep = params[t][i];
        params[t][i] = keep + h;
        const double up = router_loss(probe, ex);
        params[t][i] = keep - h;
        const double down = router_loss(probe, ex);
        params[t][i] = keep;
        numeric.push_back((up - down) / (2 * h));
        analytic.push_back(grads[t][i]);
      }
    }
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      norm += numeric[i] * numeric[i];
    }
    EXPECT_LE(std::sqrt(diff) / std::sqrt(norm), 1e-5);
  }
}

TEST(TrainRouter, OverfitsSingleExample) {
  RouterExample ex{{0.5, -1.0, 2.0, 0.25}, {1, 0, 0, 1, 0}, {}};
  const std::vector<RouterExample> data(8, ex);
  RouterTrainConfig c;
  c.hidden_dim = 8;
  c.steps = 300;
  c.batch = 4;
  const RouterModel r = train_router(data, 5, c);
  EXPECT_LT(mean_bce_per_label(r, data), 0.1);
  EXPECT_DOUBLE_EQ(recall_at_k(r, data, 2), 1.0);
}

TEST(TrainRouter, Errors) {
  RouterTrainConfig c;
  EXPECT_SPECVOC_ERROR(train_router(std::vector<RouterExample>{}, 3, c), ErrorCode::kEmptyInput);
  std::vector<RouterExample> bad{{{1.0}, {2, 0, 0}, {}}};
  EXPECT_SPECVOC_ERROR(train_router(bad, 3, c), ErrorCode::kConfigError);
}

}  // namespace
}  // namespace specvoc
