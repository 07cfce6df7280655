#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qsgcnn/alignment.hpp"
#include "qsgcnn/graph.hpp"
#include "qsgcnn/trainer.hpp"

namespace qsgcnn {

struct PreprocessConfig {
  int prototypes = 64;
  int depth = 10;
  std::uint64_t seed = 1;
  KMeansOptions kmeans;
};

/// Aligned grids and mixing matrices for every graph of a dataset.
struct Preprocessed {
  std::vector<PrototypeSet> prototypes;
  std::vector<AlignedGrid> grids;
  std::vector<Matrix> mixing;
  int feature_channels = 0;
};

/// Computes DB representations, discovers prototypes (over all graphs, or only
/// over `prototype_graphs` when given), and aligns every graph. Q is the
/// average mixing matrix of each aligned adjacency.
Preprocessed preprocess(const Dataset& dataset, const PreprocessConfig& config,
                        const std::optional<std::vector<std::size_t>>& prototype_graphs = std::nullopt);

std::vector<GraphSample> make_samples(const Preprocessed& pre, const std::vector<int>& labels);

/// Preprocessing followed by cross-validation. Transductive runs share one
/// preprocessing; inductive runs re-discover prototypes per fold from its
/// training graphs.
CrossValidationResult train(const Dataset& dataset, const TrainConfig& config,
                            const CrossValidationOptions& options = {});

}  // namespace qsgcnn
