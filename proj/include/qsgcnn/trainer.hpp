#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qsgcnn/neural.hpp"

namespace qsgcnn {

struct TrainConfig {
  int prototypes = 64;
  int graph_layers = 5;
  int graph_channels = 32;
  int depth = 10;
  double learning_rate = 5e-5;
  double dropout = 0.5;
  int epochs = 100;
  int batch_size = 32;
  int folds = 10;
  std::uint64_t seed = 1;
  bool transductive_prototypes = true;
  std::string head = "C64-P2-C64-P2-C64-F64";
  int kernel = 5;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  NetworkConfig network(int input_channels, int classes) const;
};

struct AdamState {
  ParameterVector first_moment;
  ParameterVector second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t parameters = 0)
      : first_moment(parameters, 0.0), second_moment(parameters, 0.0) {}
};

/// Bias-corrected Adam update. A non-finite gradient leaves params and state
/// untouched and throws NumericError.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double learning_rate);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct FoldSplit {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;
};

/// Stratified shuffled k-fold partition. Each class is shuffled and dealt
/// round-robin, continuing from the fold where the previous class stopped,
/// so per-class and total fold sizes differ by at most one.
FoldSplit kfold_split(const std::vector<int>& labels, int folds, std::uint64_t seed);

/// Network inputs for one graph: mixing matrix of the aligned adjacency and
/// the aligned feature grid.
struct GraphSample {
  Matrix q;
  Matrix x;
  int label = 0;
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
};

/// Builds accuracy and confusion from predicted and true classes.
Evaluation evaluate_predictions(const std::vector<int>& predicted, const std::vector<int>& truth, int classes);

/// Arg-max prediction (ties to the lowest class) over `indices` of `samples`.
Evaluation evaluate(const Network& network, std::span<const double> params, const std::vector<GraphSample>& samples,
                    const std::vector<std::size_t>& indices);

int predict_class(const Vector& probabilities);

struct FitResult {
  ParameterVector params;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Mini-batch Adam on `indices` of `samples`. Initialization, shuffling and
/// dropout all derive from `seed`. A non-finite loss throws NumericError.
FitResult fit(const Network& network, const std::vector<GraphSample>& samples, const std::vector<std::size_t>& indices,
              const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch = {});

struct FoldResult {
  int fold = 0;
  double accuracy = 0.0;
  double final_loss = 0.0;
  int epochs = 0;
  Evaluation evaluation;
  ParameterVector params;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double standard_error = 0.0;  // over folds
};

/// Samples used by a fold; transductive runs return the same set for all folds.
using SampleSource = std::function<const std::vector<GraphSample>&(int fold)>;

struct CrossValidationOptions {
  int threads = 1;
  std::function<void(int fold, int epoch, double loss)> progress;
};

CrossValidationResult cross_validate(const SampleSource& samples, const FoldSplit& split, int input_channels,
                                     int classes, const TrainConfig& config,
                                     const CrossValidationOptions& options = {});

/// Mean and standard error (sample standard deviation / sqrt(n)).
std::pair<double, double> mean_and_standard_error(const std::vector<double>& values);

/// Per-purpose seed derived from the run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace qsgcnn
