#include "core/vocab_clusters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace specvoc {
namespace {

// Normalized member sum per cluster; keeps the previous centroid when the
// sum vanishes.
void update_centroids(const DenseMatrix& X, const std::vector<std::size_t>& assignment,
                      DenseMatrix& centroids) {
  const std::size_t d = X.rows();
  const std::size_t M = centroids.rows();
  DenseMatrix sums(M, d);
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    auto row = sums.row(assignment[v]);
    for (std::size_t i = 0; i < d; ++i) row[i] += X(i, v);
  }
  for (std::size_t m = 0; m < M; ++m) {
    const double norm = l2_norm(sums.row(m));
    if (norm <= 0.0) continue;
    auto dst = centroids.row(m);
    const auto src = sums.row(m);
    for (std::size_t i = 0; i < d; ++i) dst[i] = src[i] / norm;
  }
}

double cosine_to(const DenseMatrix& X, std::size_t v, std::span<const double> centroid) {
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) s += X(i, v) * centroid[i];
  return s;
}

double objective_of(const DenseMatrix& X, const std::vector<std::size_t>& assignment,
                    const DenseMatrix& centroids) {
  double total = 0.0;
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    total += cosine_to(X, v, centroids.row(assignment[v]));
  }
  return total / static_cast<double>(assignment.size());
}

// k-means++ seeding with cosine distance 1 - cos.
DenseMatrix seed_centroids(const DenseMatrix& X, std::size_t M, SeededRng& rng) {
  const std::size_t d = X.rows();
  const std::size_t n = X.cols();
  DenseMatrix centroids(M, d);
  std::vector<bool> chosen(n, false);
  std::vector<double> best_cos(n, -std::numeric_limits<double>::infinity());
  auto take = [&](std::size_t m, std::size_t v) {
    chosen[v] = true;
    for (std::size_t i = 0; i < d; ++i) centroids(m, i) = X(i, v);
    for (std::size_t u = 0; u < n; ++u) best_cos[u] = std::max(best_cos[u], cosine_to(X, u, centroids.row(m)));
  };
  take(0, rng.uniform_index(n));
  std::vector<double> weights(n);
  for (std::size_t m = 1; m < M; ++m) {
    double total = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      const double dist = chosen[u] ? 0.0 : std::max(0.0, 1.0 - best_cos[u]);
      weights[u] = dist * dist;
      total += weights[u];
    }
    if (total <= 0.0) {
      // All remaining points coincide with a centroid; take the first unchosen.
      for (std::size_t u = 0; u < n; ++u) weights[u] = chosen[u] ? 0.0 : 1.0;
    }
    take(m, rng.categorical(weights));
  }
  return centroids;
}

}  // namespace

ClusterPartition ClusterPartition::from_assignment(std::size_t num_clusters,
                                                   std::vector<std::size_t> assignment) {
  require(num_clusters >= 1, ErrorCode::kInvalidClusterCount, "partition needs at least one cluster");
  ClusterPartition p;
  p.num_clusters = num_clusters;
  p.members.assign(num_clusters, {});
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    if (assignment[v] >= num_clusters) {
      fail(ErrorCode::kInvalidClusterId, "token " + std::to_string(v) + " assigned to cluster " +
                                             std::to_string(assignment[v]) + " >= M");
    }
    p.members[assignment[v]].push_back(static_cast<TokenId>(v));
  }
  for (std::size_t m = 0; m < num_clusters; ++m) {
    if (p.members[m].empty()) {
      fail(ErrorCode::kInvalidClusterCount, "cluster " + std::to_string(m) + " is empty");
    }
  }
  p.assignment = std::move(assignment);
  return p;
}

DenseMatrix normalize_columns(const DenseMatrix& W) {
  DenseMatrix out = W;
  for (std::size_t v = 0; v < W.cols(); ++v) {
    double sq = 0.0;
    for (std::size_t i = 0; i < W.rows(); ++i) sq += W(i, v) * W(i, v);
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(ErrorCode::kDegenerateColumn, "column " + std::to_string(v) + " has zero norm");
    }
    for (std::size_t i = 0; i < W.rows(); ++i) out(i, v) = W(i, v) / norm;
  }
  return out;
}

ClusterPartition spherical_kmeans(const DenseMatrix& X, const KMeansOptions& options) {
  const std::size_t n = X.cols();
  const std::size_t M = options.num_clusters;
  if (M < 1 || M > n) {
    fail(ErrorCode::kInvalidClusterCount,
         "M=" + std::to_string(M) + " outside [1, " + std::to_string(n) + "]");
  }
  SeededRng rng(options.seed);
  DenseMatrix centroids = seed_centroids(X, M, rng);

  std::vector<std::size_t> assignment(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> trace;
  bool converged = false;
  std::size_t iter = 0;
  double previous = -std::numeric_limits<double>::infinity();
  std::vector<double> sim(n);
  std::vector<std::size_t> sizes(M);
  while (iter < options.max_iters) {
    ++iter;
    std::size_t changes = 0;
    for (std::size_t v = 0; v < n; ++v) {
      std::size_t best = 0;
      double best_sim = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < M; ++m) {
        const double s = cosine_to(X, v, centroids.row(m));
        if (s > best_sim) {
          best_sim = s;
          best = m;
        }
      }
      if (assignment[v] != best) ++changes;
      assignment[v] = best;
      sim[v] = best_sim;
    }
    // Reseed empty clusters with the worst-fitting point of a multi-member cluster.
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t v = 0; v < n; ++v) ++sizes[assignment[v]];
    for (std::size_t m = 0; m < M; ++m) {
      if (sizes[m] > 0) continue;
      std::size_t worst = n;
      for (std::size_t v = 0; v < n; ++v) {
        if (sizes[assignment[v]] < 2) continue;
        if (worst == n || sim[v] < sim[worst]) worst = v;
      }
      if (worst == n) fail(ErrorCode::kInvalidClusterCount, "cannot fill empty cluster");
      --sizes[assignment[worst]];
      assignment[worst] = m;
      ++sizes[m];
      sim[worst] = 1.0;
      for (std::size_t i = 0; i < X.rows(); ++i) centroids(m, i) = X(i, worst);
      ++changes;
    }
    update_centroids(X, assignment, centroids);
    const double obj = objective_of(X, assignment, centroids);
    trace.push_back(obj);
    if (changes == 0) {
      converged = true;
      break;
    }
    if (std::abs(obj - previous) < options.tol) break;
    previous = obj;
  }

  ClusterPartition p = ClusterPartition::from_assignment(M, std::move(assignment));
  p.centroids = std::move(centroids);
  p.objective = trace.empty() ? 0.0 : trace.back();
  p.objective_trace = std::move(trace);
  p.seed = options.seed;
  p.iterations = iter;
  p.converged = converged;
  return p;
}

double kmeans_objective(const DenseMatrix& X, const ClusterPartition& partition) {
  DenseMatrix centroids(partition.num_clusters, X.rows());
  update_centroids(X, partition.assignment, centroids);
  return objective_of(X, partition.assignment, centroids);
}

std::vector<TokenId> cluster_union(const ClusterPartition& partition,
                                   std::span<const std::size_t> selected) {
  require(!selected.empty(), ErrorCode::kEmptyShortlist, "cluster_union: no clusters selected");
  std::vector<bool> seen(partition.num_clusters, false);
  std::vector<TokenId> out;
  for (std::size_t m : selected) {
    if (m >= partition.num_clusters) {
      fail(ErrorCode::kInvalidClusterId, "cluster id " + std::to_string(m) + " >= M=" +
                                             std::to_string(partition.num_clusters));
    }
    if (seen[m]) continue;
    seen[m] = true;
    out.insert(out.end(), partition.members[m].begin(), partition.members[m].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace specvoc
