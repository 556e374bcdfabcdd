#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "core/numerics.hpp"

namespace specvoc {

// Partition of the vocabulary into M non-empty clusters.
struct ClusterPartition {
  std::size_t num_clusters = 0;
  std::vector<std::size_t> assignment;         // token -> cluster
  std::vector<std::vector<TokenId>> members;   // cluster -> sorted tokens
  DenseMatrix centroids;                       // M x d unit rows; may be empty after load
  double objective = 0.0;                      // mean cosine to assigned centroid
  std::uint64_t seed = 0;
  std::uint64_t head_hash = 0;                 // hash of the LM head the columns came from
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;         // objective after each iteration

  std::size_t vocab_size() const { return assignment.size(); }

  // Builds members from an assignment; validates the partition property.
  static ClusterPartition from_assignment(std::size_t num_clusters,
                                          std::vector<std::size_t> assignment);
};

struct KMeansOptions {
  std::size_t num_clusters = 32;
  std::uint64_t seed = 1;
  std::size_t max_iters = 100;
  double tol = 1e-6;
};

// Scales every column of W (d x |V|) to unit L2 norm.
DenseMatrix normalize_columns(const DenseMatrix& W);

// Spherical k-means over the columns of a d x |V| matrix of unit columns.
ClusterPartition spherical_kmeans(const DenseMatrix& unit_columns, const KMeansOptions& options);

// Mean cosine similarity of each column to the centroid of its cluster.
double kmeans_objective(const DenseMatrix& unit_columns, const ClusterPartition& partition);

// Sorted union of the selected clusters' members.
std::vector<TokenId> cluster_union(const ClusterPartition& partition,
                                   std::span<const std::size_t> selected);

}  // namespace specvoc
