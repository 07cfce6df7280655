#include "qsgcnn/pipeline.hpp"

#include <stdexcept>

#include "qsgcnn/depth_repr.hpp"
#include "qsgcnn/quantum_walk.hpp"

namespace qsgcnn {

Preprocessed preprocess(const Dataset& dataset, const PreprocessConfig& config,
                        const std::optional<std::vector<std::size_t>>& prototype_graphs) {
  if (dataset.size() == 0) throw DataError("dataset is empty");
  const DatasetDBRepresentations reps = dataset_db_representations(dataset, config.depth);

  std::optional<std::vector<std::size_t>> rows;
  if (prototype_graphs) {
    rows.emplace();
    for (std::size_t g : *prototype_graphs) {
      for (std::size_t r = reps.graph_offsets.at(g); r < reps.graph_offsets.at(g + 1); ++r) rows->push_back(r);
    }
  }

  Preprocessed out;
  out.prototypes = discover_prototypes(reps, config.prototypes, config.seed, config.kmeans, rows);
  const bool labelled = dataset.has_vertex_labels();
  const std::vector<int> degrees = labelled ? std::vector<int>{} : degree_alphabet(dataset);
  out.feature_channels = static_cast<int>(labelled ? dataset.label_alphabet.size() : degrees.size());

  for (std::size_t g = 0; g < dataset.size(); ++g) {
    const FeatureMatrix features = labelled ? one_hot_features(dataset, g) : degree_features(dataset, g, degrees);
    const auto begin = static_cast<Eigen::Index>(reps.graph_offsets[g]);
    const auto count = static_cast<Eigen::Index>(reps.graph_offsets[g + 1] - reps.graph_offsets[g]);
    const Matrix graph_reps = reps.values.middleRows(begin, count);
    out.grids.push_back(aligned_grid(g, dataset.graphs[g], graph_reps, out.prototypes, features));
    out.mixing.push_back(average_mixing_matrix(out.grids.back().adjacency));
  }
  return out;
}

std::vector<GraphSample> make_samples(const Preprocessed& pre, const std::vector<int>& labels) {
  if (labels.size() != pre.grids.size()) throw std::invalid_argument("label count does not match grid count");
  std::vector<GraphSample> samples;
  samples.reserve(pre.grids.size());
  for (std::size_t g = 0; g < pre.grids.size(); ++g) {
    samples.push_back({pre.mixing[g], pre.grids[g].features, labels[g]});
  }
  return samples;
}

CrossValidationResult train(const Dataset& dataset, const TrainConfig& config, const CrossValidationOptions& options) {
  config.validate();
  PreprocessConfig pc;
  pc.prototypes = config.prototypes;
  pc.depth = config.depth;
  pc.seed = config.seed;
  const FoldSplit split = kfold_split(dataset.class_labels, config.folds, config.seed);

  std::vector<std::vector<GraphSample>> per_fold;
  int channels = 0;
  if (config.transductive_prototypes) {
    const Preprocessed pre = preprocess(dataset, pc);
    channels = pre.feature_channels;
    per_fold.push_back(make_samples(pre, dataset.class_labels));
  } else {
    for (const Fold& fold : split.folds) {
      const Preprocessed pre = preprocess(dataset, pc, fold.train);
      channels = pre.feature_channels;
      per_fold.push_back(make_samples(pre, dataset.class_labels));
    }
  }
  const SampleSource source = [&](int fold) -> const std::vector<GraphSample>& {
    return per_fold.size() == 1 ? per_fold.front() : per_fold.at(static_cast<std::size_t>(fold));
  };
  return cross_validate(source, split, channels, dataset.num_classes(), config, options);
}

}  // namespace qsgcnn
