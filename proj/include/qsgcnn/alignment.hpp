#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "qsgcnn/depth_repr.hpp"
#include "qsgcnn/graph.hpp"

namespace qsgcnn {

/// M centroids in depth-K DB-representation space. Row j is prototype j.
struct PrototypeSet {
  int depth = 0;
  Matrix centroids;
  bool order_applied = false;

  // k-means bookkeeping, not serialized.
  int iterations = 0;
  std::vector<double> objective_history;
  /// Centroids that could not be placed on a fresh distinct point.
  int duplicate_centroids = 0;

  int count() const { return static_cast<int>(centroids.rows()); }
};

struct KMeansOptions {
  int max_iter = 300;
  double tol = 1e-10;
};

/// Lloyd's algorithm from deterministic farthest-point seeding. The first
/// centre is the point nearest the global mean; each further centre is the
/// point farthest from those chosen. `seed` only breaks exact distance ties
/// between points with different coordinates. Empty clusters are re-seeded
/// to the point farthest from its own centroid.
PrototypeSet kmeans_prototypes(const Matrix& points, int count, std::uint64_t seed, int max_iter, double tol);

/// Entry (i, j) = Euclidean distance between representation i and centroid j.
Matrix affinity_matrix(const Matrix& vertex_reps, const PrototypeSet& prototypes);

/// 0/1 vertex-to-prototype assignment, exactly one prototype per vertex.
struct CorrespondenceMatrix {
  std::vector<int> prototype_of;
  int prototypes = 0;

  Matrix dense() const;
};

/// Row-wise argmin, ties to the smallest column. NaN entries throw NumericError.
CorrespondenceMatrix correspondence_matrix(const Matrix& affinity);

/// Permutation sorting prototypes by descending degree
/// D(j) = sum_k exp(-|mu_j - mu_k| / K), self term included; ties keep
/// the original index order. perm[new_position] = old_index.
std::vector<int> prototype_order(const PrototypeSet& prototypes);

/// Reorders rows by `perm` and marks the set ordered.
void apply_order(PrototypeSet& prototypes, const std::vector<int>& perm);

struct GridLevel {
  Matrix features;   // M x c, C^T X
  Matrix adjacency;  // M x M, C^T A C
};

GridLevel aligned_grid_level(const FeatureMatrix& features, const Matrix& adjacency, const CorrespondenceMatrix& c);

struct AlignedGrid {
  std::size_t graph_index = 0;
  Matrix features;
  Matrix adjacency;
};

/// Averages the per-level grids for K = 1..L. `db_reps` holds the graph's
/// depth-L representations (one row per vertex); level K uses its first K
/// columns against prototypes_per_level[K-1].
AlignedGrid aligned_grid(std::size_t graph_index, const Graph& graph, const Matrix& db_reps,
                         const std::vector<PrototypeSet>& prototypes_per_level, const FeatureMatrix& features);

/// Convenience overload that computes the DB representations itself.
AlignedGrid aligned_grid(std::size_t graph_index, const Dataset& dataset,
                         const std::vector<PrototypeSet>& prototypes_per_level, const FeatureMatrix& features);

/// Clusters each depth K = 1..L independently on depth-K-truncated DB
/// representations, then applies the ordering of the level-L set to every
/// level. `rows`, when given, restricts clustering to those rows of
/// `db_reps.values` (training-only prototypes).
std::vector<PrototypeSet> discover_prototypes(const DatasetDBRepresentations& db_reps, int count,
                                              std::uint64_t seed, const KMeansOptions& options = {},
                                              const std::optional<std::vector<std::size_t>>& rows = std::nullopt);

/// Prototype file: one block per level, each a header line `K M L seed`
/// followed by M centroid rows in decimal text.
void write_prototypes(const std::filesystem::path& path, const std::vector<PrototypeSet>& levels,
                      std::uint64_t seed);

struct PrototypeFile {
  std::vector<PrototypeSet> levels;
  std::uint64_t seed = 0;
};

PrototypeFile read_prototypes(const std::filesystem::path& path);

}  // namespace qsgcnn
