#include "qsgcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qsgcnn {

void TrainConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(prototypes, "prototypes");
  positive(graph_channels, "channels");
  positive(depth, "depth");
  positive(epochs, "epochs");
  positive(batch_size, "batch size");
  positive(kernel, "kernel");
  if (graph_layers < 0) throw std::invalid_argument("layers must be non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (folds < 2) throw std::invalid_argument("folds must be at least 2");
}

NetworkConfig TrainConfig::network(int input_channels, int classes) const {
  NetworkConfig net;
  net.grid_size = prototypes;
  net.input_channels = input_channels;
  net.graph_layers = graph_layers;
  net.graph_channels = graph_channels;
  net.head = head;
  net.kernel = kernel;
  net.classes = classes;
  net.dropout = dropout;
  return net;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double learning_rate) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam: non-finite gradient at parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    params[i] -= learning_rate * (m / correction1) / (std::sqrt(v / correction2) + state.epsilon);
  }
}

FoldSplit kfold_split(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("folds must be at least 2");
  if (static_cast<std::size_t>(folds) > labels.size()) {
    throw std::invalid_argument("cannot split " + std::to_string(labels.size()) + " graphs into " +
                                std::to_string(folds) + " folds");
  }
  FoldSplit split;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::mt19937_64 rng(derive_seed(seed, 0xf01d));
  std::vector<std::vector<std::size_t>> tests(static_cast<std::size_t>(folds));
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(folds)) {
      split.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                               " graphs, fewer than " + std::to_string(folds) + " folds; not stratified");
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      tests[next].push_back(idx);
      next = (next + 1) % static_cast<std::size_t>(folds);
    }
  }
  for (int f = 0; f < folds; ++f) {
    Fold fold;
    fold.test = tests[static_cast<std::size_t>(f)];
    std::sort(fold.test.begin(), fold.test.end());
    for (int g = 0; g < folds; ++g) {
      if (g != f) fold.train.insert(fold.train.end(), tests[static_cast<std::size_t>(g)].begin(),
                                    tests[static_cast<std::size_t>(g)].end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    split.folds.push_back(std::move(fold));
  }
  return split;
}

int predict_class(const Vector& probabilities) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < probabilities.size(); ++i) {
    if (probabilities(i) > probabilities(arg)) arg = i;
  }
  return static_cast<int>(arg);
}

Evaluation evaluate_predictions(const std::vector<int>& predicted, const std::vector<int>& truth, int classes) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and label counts differ");
  Evaluation e;
  e.confusion.assign(static_cast<std::size_t>(classes), std::vector<int>(static_cast<std::size_t>(classes), 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++e.confusion.at(static_cast<std::size_t>(truth[i])).at(static_cast<std::size_t>(predicted[i]));
    if (predicted[i] == truth[i]) ++correct;
  }
  e.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return e;
}

Evaluation evaluate(const Network& network, std::span<const double> params, const std::vector<GraphSample>& samples,
                    const std::vector<std::size_t>& indices) {
  std::vector<int> predicted, truth;
  for (std::size_t i : indices) {
    predicted.push_back(predict_class(network.predict(params, samples.at(i).q, samples.at(i).x)));
    truth.push_back(samples[i].label);
  }
  return evaluate_predictions(predicted, truth, network.config().classes);
}

FitResult fit(const Network& network, const std::vector<GraphSample>& samples, const std::vector<std::size_t>& indices,
              const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch) {
  if (indices.empty()) throw std::invalid_argument("no training graphs");
  FitResult result;
  result.params = network.initial_parameters(derive_seed(seed, 1));
  AdamState adam(result.params.size());
  ParameterVector grad(result.params.size());
  std::mt19937_64 shuffle_rng(derive_seed(seed, 2));
  std::mt19937_64 dropout_rng(derive_seed(seed, 3));
  std::vector<std::size_t> order = indices;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const GraphSample& s = samples.at(order[b]);
        const ForwardTrace trace = network.forward(result.params, s.q, s.x, Mode::Train, &dropout_rng);
        const double loss = network.backward(result.params, trace, s.label, grad);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite training loss at epoch " << epoch + 1 << " on graph " << order[b];
          throw NumericError(msg.str());
        }
        loss_sum += loss;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (double& g : grad) g *= scale;
      adam_step(result.params, grad, adam, config.learning_rate);
    }
    const double mean_loss = loss_sum / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
  }
  return result;
}

std::pair<double, double> mean_and_standard_error(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

CrossValidationResult cross_validate(const SampleSource& samples, const FoldSplit& split, int input_channels,
                                     int classes, const TrainConfig& config, const CrossValidationOptions& options) {
  config.validate();
  const Network network(config.network(input_channels, classes));
  const int folds = static_cast<int>(split.folds.size());
  CrossValidationResult result;
  result.folds.resize(static_cast<std::size_t>(folds));

  std::mutex progress_mutex;
  auto run_fold = [&](int f) {
    const Fold& fold = split.folds[static_cast<std::size_t>(f)];
    const auto& fold_samples = samples(f);
    EpochCallback on_epoch;
    if (options.progress) {
      on_epoch = [&](int epoch, double loss) {
        std::lock_guard lock(progress_mutex);
        options.progress(f, epoch, loss);
      };
    }
    FitResult fitted = fit(network, fold_samples, fold.train, config, derive_seed(config.seed, 100 + f), on_epoch);
    FoldResult& out = result.folds[static_cast<std::size_t>(f)];
    out.fold = f;
    out.epochs = config.epochs;
    out.final_loss = fitted.epoch_loss.back();
    out.evaluation = evaluate(network, fitted.params, fold_samples, fold.test);
    out.accuracy = out.evaluation.accuracy;
    out.params = std::move(fitted.params);
  };

  const int threads = std::max(1, std::min(options.threads, folds));
  if (threads == 1) {
    for (int f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (int f = w; f < folds; f += threads) run_fold(f);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<double> accuracies;
  for (const auto& f : result.folds) accuracies.push_back(f.accuracy);
  std::tie(result.mean_accuracy, result.standard_error) = mean_and_standard_error(accuracies);
  return result;
}

}  // namespace qsgcnn
