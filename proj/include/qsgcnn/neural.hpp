#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qsgcnn/types.hpp"

namespace qsgcnn {

enum class Activation { Relu, Identity };

// ---------------------------------------------------------------------------
// Primitive layers. Sequences are (length x channels) row-major matrices, so
// the k consecutive positions covered by a filter are contiguous in memory.

/// max(0, Q Z W). Throws std::invalid_argument on shape mismatch and
/// NumericError on non-finite input.
Matrix quantum_conv_forward(const Matrix& q, const Matrix& z, const Eigen::Ref<const Matrix>& w,
                            Activation activation = Activation::Relu);

struct ConvStackOutput {
  std::vector<Matrix> layers;         // Z_0 .. Z_T
  std::vector<Matrix> concatenations;  // Z_{0:0} .. Z_{0:T}
};

/// Z_{t+1} = act(Q Z_t W_t) for each weight matrix, plus the running
/// column-wise concatenations.
ConvStackOutput conv_stack_forward(const Matrix& q, const Matrix& z0, const std::vector<Matrix>& weights,
                                   Activation activation = Activation::Relu);

/// Row-at-a-time form of one stacked layer: row i = act(sum_j Q_ij (Z W)_j).
Matrix quantum_conv_forward_rowwise(const Matrix& q, const Matrix& z, const Eigen::Ref<const Matrix>& w,
                                    Activation activation = Activation::Relu);

/// Valid (unpadded) stride-1 cross-correlation. `weights` is
/// out_channels x (kernel * in_channels) with column index tap * in_channels + channel.
Matrix conv1d_forward(const Matrix& input, const Eigen::Ref<const Matrix>& weights,
                      const Eigen::Ref<const Vector>& bias, int kernel);

/// Accumulates into grad_weights / grad_bias and returns d(input).
Matrix conv1d_backward(const Matrix& input, const Eigen::Ref<const Matrix>& weights, const Matrix& grad_output,
                       int kernel, Eigen::Ref<Matrix> grad_weights, Eigen::Ref<Vector> grad_bias);

struct PoolResult {
  Matrix output;
  std::vector<Eigen::Index> argmax;  // source row per output entry, row-major
};

/// Channel-wise max over disjoint windows of `width` rows; a trailing partial
/// window is dropped. Ties resolve to the earliest row.
PoolResult maxpool1d(const Matrix& input, int width = 2);
Matrix maxpool1d_backward(const PoolResult& pooled, const Matrix& grad_output, Eigen::Index input_rows);

// ---------------------------------------------------------------------------
// Network configuration and parameter layout.

struct HeadLayer {
  enum class Kind { Conv, Pool, Dense };
  Kind kind;
  int size;  // channels, pool width, or units
};

/// Parses strings such as "C64-P2-C64-P2-C64-F64". Convolution and pooling
/// layers come first, then one or more dense layers.
std::vector<HeadLayer> parse_head_architecture(const std::string& spec);

struct NetworkConfig {
  int grid_size = 64;
  int input_channels = 1;
  int graph_layers = 5;
  int graph_channels = 32;
  std::string head = "C64-P2-C64-P2-C64-F64";
  int kernel = 5;
  int classes = 2;
  double dropout = 0.5;
  Activation activation = Activation::Relu;
};

struct TensorSlot {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;

/// Named views into one flat parameter vector.
class ParameterLayout {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);
  const TensorSlot& slot(std::size_t index) const { return slots_.at(index); }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  std::size_t total() const { return total_; }

  ConstMatrixMap view(std::span<const double> flat, std::size_t index) const;
  MatrixMap view(std::span<double> flat, std::size_t index) const;
  /// Flat view of a slot, for biases.
  Eigen::Map<const Vector> vector(std::span<const double> flat, std::size_t index) const;
  Eigen::Map<Vector> vector(std::span<double> flat, std::size_t index) const;

 private:
  std::vector<TensorSlot> slots_;
  std::size_t total_ = 0;
};

enum class Mode { Train, Eval };

/// Everything the backward pass needs from one forward pass.
struct ForwardTrace {
  bool valid = false;
  Matrix q;
  std::vector<Matrix> layers;           // Z_0 .. Z_T
  std::vector<Matrix> propagated;       // Q Z_t, t < T
  std::vector<Matrix> concatenations;   // Z_{0:t}
  // Per branch: input of each head layer followed by the final output.
  std::vector<std::vector<Matrix>> head_activations;
  std::vector<std::vector<PoolResult>> head_pools;
  Vector features;      // concatenated branch outputs, before dropout
  Vector dropout_mask;  // 0 or 1/(1-rate); all ones in eval mode
  Vector logits;
  Vector probabilities;
};

/// Quantum spatial graph convolution stack, one 1-D CNN head per
/// concatenation Z_{0:t}, and a dense softmax classifier over all heads.
class Network {
 public:
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.total(); }

  /// Rows of each head layer's output, for shape reporting.
  const std::vector<int>& head_lengths() const { return head_lengths_; }
  int branch_output_size() const { return branch_output_; }

  /// Glorot-uniform weights, zero biases.
  ParameterVector initial_parameters(std::uint64_t seed) const;

  /// `rng` is required in train mode with dropout > 0.
  ForwardTrace forward(std::span<const double> params, const Matrix& q, const Matrix& x, Mode mode,
                       std::mt19937_64* rng = nullptr) const;

  /// Adds d(cross-entropy)/d(params) for `label` into `grad`; returns the loss.
  double backward(std::span<const double> params, const ForwardTrace& trace, int label,
                  std::span<double> grad) const;

  Vector predict(std::span<const double> params, const Matrix& q, const Matrix& x) const;

  /// Output of head `branch` for a given concatenation (eval path).
  Vector head_forward(std::span<const double> params, const Matrix& concatenation, std::size_t branch) const;

 private:
  struct HeadSlots {
    std::vector<std::size_t> weight;  // per conv/dense layer, else npos
    std::vector<std::size_t> bias;
  };

  Vector run_head(std::span<const double> params, const Matrix& input, std::size_t branch,
                  std::vector<Matrix>* activations, std::vector<PoolResult>* pools) const;
  Matrix head_backward(std::span<const double> params, std::size_t branch, const std::vector<Matrix>& activations,
                       const std::vector<PoolResult>& pools, Matrix grad_output, std::span<double> grad) const;

  NetworkConfig config_;
  std::vector<HeadLayer> head_layers_;
  std::vector<int> head_lengths_;
  std::vector<int> head_channels_;
  int branch_output_ = 0;
  ParameterLayout layout_;
  std::vector<std::size_t> graph_weights_;
  std::vector<HeadSlots> heads_;
  std::size_t classifier_weight_ = 0;
  std::size_t classifier_bias_ = 0;
};

/// Softmax with max-subtraction; sums to one.
Vector softmax(const Vector& logits);

/// Classifier block: inverted dropout (train mode only) then dense + softmax.
/// Returns probabilities; `mask` receives the dropout mask applied.
Vector classifier_forward(const Vector& features, const Eigen::Ref<const Matrix>& weight,
                          const Eigen::Ref<const Vector>& bias, double dropout, Mode mode, std::mt19937_64* rng,
                          Vector* mask = nullptr, Vector* logits = nullptr);

/// -ln(p[label]) with p clamped to at least 1e-12.
double cross_entropy(const Vector& probabilities, int label);

/// Maximum relative error between backward() and central differences of the
/// loss, on a random network/input drawn from `seed`, with dropout disabled.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
double finite_difference_check(const NetworkConfig& config, std::uint64_t seed, double epsilon);

}  // namespace qsgcnn
