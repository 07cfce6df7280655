#include "qsgcnn/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qsgcnn/quantum_walk.hpp"

namespace qsgcnn {

namespace {

constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

void activate(Matrix& m, Activation activation) {
  if (activation == Activation::Relu) m = m.cwiseMax(0.0);
}

// Multiplies grad by the activation derivative evaluated through its output.
// ReLU uses the subgradient 0 at 0.
void activation_backward(Matrix& grad, const Matrix& output, Activation activation) {
  if (activation == Activation::Relu) grad = (output.array() > 0.0).select(grad, 0.0);
}

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix quantum_conv_forward(const Matrix& q, const Matrix& z, const Eigen::Ref<const Matrix>& w,
                            Activation activation) {
  require_shape(q.rows() == q.cols() && q.cols() == z.rows() && z.cols() == w.rows(),
                "quantum conv shapes: Q " + shape(q) + ", Z " + shape(z) + ", W " + std::to_string(w.rows()) + "x" +
                    std::to_string(w.cols()));
  if (!q.allFinite() || !z.allFinite() || !w.allFinite()) throw NumericError("quantum conv input is not finite");
  Matrix out = (q * z) * w;
  activate(out, activation);
  return out;
}

Matrix quantum_conv_forward_rowwise(const Matrix& q, const Matrix& z, const Eigen::Ref<const Matrix>& w,
                                    Activation activation) {
  require_shape(q.rows() == q.cols() && q.cols() == z.rows() && z.cols() == w.rows(), "quantum conv shapes");
  const Matrix y = z * w;
  Matrix out(q.rows(), w.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::RowVectorXd acc = q(i, i) * y.row(i);
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (j != i) acc += q(i, j) * y.row(j);
    }
    out.row(i) = acc;
  }
  activate(out, activation);
  return out;
}

ConvStackOutput conv_stack_forward(const Matrix& q, const Matrix& z0, const std::vector<Matrix>& weights,
                                   Activation activation) {
  ConvStackOutput out;
  out.layers.push_back(z0);
  out.concatenations.push_back(z0);
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (weights[t].rows() != out.layers.back().cols()) {
      throw std::invalid_argument("conv stack: W_" + std::to_string(t) + " has " + std::to_string(weights[t].rows()) +
                                  " rows, expected " + std::to_string(out.layers.back().cols()));
    }
    out.layers.push_back(quantum_conv_forward(q, out.layers.back(), weights[t], activation));
    const Matrix& prev = out.concatenations.back();
    const Matrix& next = out.layers.back();
    Matrix cat(prev.rows(), prev.cols() + next.cols());
    cat << prev, next;
    out.concatenations.push_back(std::move(cat));
  }
  return out;
}

Matrix conv1d_forward(const Matrix& input, const Eigen::Ref<const Matrix>& weights,
                      const Eigen::Ref<const Vector>& bias, int kernel) {
  const Eigen::Index channels = input.cols();
  if (kernel < 1 || input.rows() < kernel) {
    throw std::invalid_argument("conv1d: sequence length " + std::to_string(input.rows()) + " shorter than kernel " +
                                std::to_string(kernel));
  }
  require_shape(weights.cols() == kernel * channels && bias.size() == weights.rows(), "conv1d weight shape");
  const Eigen::Index positions = input.rows() - kernel + 1;
  // Row p of `windows` is the contiguous block of `kernel` input rows starting at p.
  Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> windows(input.data(), positions, kernel * channels,
                                                            Eigen::OuterStride<>(channels));
  Matrix out = windows * weights.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

Matrix conv1d_backward(const Matrix& input, const Eigen::Ref<const Matrix>& weights, const Matrix& grad_output,
                       int kernel, Eigen::Ref<Matrix> grad_weights, Eigen::Ref<Vector> grad_bias) {
  const Eigen::Index channels = input.cols();
  const Eigen::Index positions = input.rows() - kernel + 1;
  require_shape(grad_output.rows() == positions && grad_output.cols() == weights.rows(), "conv1d grad shape");
  Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> windows(input.data(), positions, kernel * channels,
                                                            Eigen::OuterStride<>(channels));
  grad_weights.noalias() += grad_output.transpose() * windows;
  grad_bias += grad_output.colwise().sum().transpose();
  const Matrix grad_windows = grad_output * weights;
  Matrix grad_input = Matrix::Zero(input.rows(), channels);
  const Eigen::Index width = kernel * channels;
  for (Eigen::Index p = 0; p < positions; ++p) {
    Eigen::Map<Eigen::RowVectorXd>(grad_input.data() + p * channels, width) += grad_windows.row(p);
  }
  return grad_input;
}

PoolResult maxpool1d(const Matrix& input, int width) {
  if (width < 1 || input.rows() < width) {
    throw std::invalid_argument("maxpool1d: sequence length " + std::to_string(input.rows()) +
                                " shorter than window " + std::to_string(width));
  }
  const Eigen::Index rows = input.rows() / width;
  PoolResult out;
  out.output.resize(rows, input.cols());
  out.argmax.resize(static_cast<std::size_t>(rows * input.cols()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < input.cols(); ++c) {
      Eigen::Index best = r * width;
      for (Eigen::Index k = 1; k < width; ++k) {
        if (input(r * width + k, c) > input(best, c)) best = r * width + k;
      }
      out.output(r, c) = input(best, c);
      out.argmax[static_cast<std::size_t>(r * input.cols() + c)] = best;
    }
  }
  return out;
}

Matrix maxpool1d_backward(const PoolResult& pooled, const Matrix& grad_output, Eigen::Index input_rows) {
  require_shape(grad_output.rows() == pooled.output.rows() && grad_output.cols() == pooled.output.cols(),
                "maxpool grad shape");
  Matrix grad_input = Matrix::Zero(input_rows, grad_output.cols());
  for (Eigen::Index r = 0; r < grad_output.rows(); ++r) {
    for (Eigen::Index c = 0; c < grad_output.cols(); ++c) {
      grad_input(pooled.argmax[static_cast<std::size_t>(r * grad_output.cols() + c)], c) += grad_output(r, c);
    }
  }
  return grad_input;
}

Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

double cross_entropy(const Vector& probabilities, int label) {
  return -std::log(std::max(probabilities(label), 1e-12));
}

Vector classifier_forward(const Vector& features, const Eigen::Ref<const Matrix>& weight,
                          const Eigen::Ref<const Vector>& bias, double dropout, Mode mode, std::mt19937_64* rng,
                          Vector* mask, Vector* logits) {
  require_shape(weight.cols() == features.size() && bias.size() == weight.rows(), "classifier shape");
  Vector keep = Vector::Ones(features.size());
  if (mode == Mode::Train && dropout > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("train-mode dropout needs a random generator");
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double scale = 1.0 / (1.0 - dropout);
    for (Eigen::Index i = 0; i < keep.size(); ++i) keep(i) = uniform(*rng) < dropout ? 0.0 : scale;
  }
  Vector z = weight * features.cwiseProduct(keep) + bias;
  Vector p = softmax(z);
  if (mask) *mask = std::move(keep);
  if (logits) *logits = std::move(z);
  return p;
}

// ---------------------------------------------------------------------------

std::vector<HeadLayer> parse_head_architecture(const std::string& spec) {
  std::vector<HeadLayer> layers;
  std::istringstream in(spec);
  std::string token;
  bool dense_seen = false;
  while (std::getline(in, token, '-')) {
    if (token.size() < 2) throw std::invalid_argument("bad head layer '" + token + "' in '" + spec + "'");
    HeadLayer layer{};
    switch (token[0]) {
      case 'C': layer.kind = HeadLayer::Kind::Conv; break;
      case 'P': layer.kind = HeadLayer::Kind::Pool; break;
      case 'F': layer.kind = HeadLayer::Kind::Dense; break;
      default: throw std::invalid_argument("bad head layer '" + token + "' in '" + spec + "'");
    }
    std::size_t used = 0;
    try {
      layer.size = std::stoi(token.substr(1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() - 1 || layer.size < 1) {
      throw std::invalid_argument("bad head layer '" + token + "' in '" + spec + "'");
    }
    if (layer.kind == HeadLayer::Kind::Dense) {
      dense_seen = true;
    } else if (dense_seen) {
      throw std::invalid_argument("convolution or pooling after a dense layer in '" + spec + "'");
    }
    layers.push_back(layer);
  }
  if (!dense_seen) throw std::invalid_argument("head '" + spec + "' must end with a dense layer");
  return layers;
}

std::size_t ParameterLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  slots_.push_back({std::move(name), rows, cols, total_});
  total_ += static_cast<std::size_t>(rows * cols);
  return slots_.size() - 1;
}

ConstMatrixMap ParameterLayout::view(std::span<const double> flat, std::size_t index) const {
  const TensorSlot& s = slots_.at(index);
  return ConstMatrixMap(flat.data() + s.offset, s.rows, s.cols);
}

MatrixMap ParameterLayout::view(std::span<double> flat, std::size_t index) const {
  const TensorSlot& s = slots_.at(index);
  return MatrixMap(flat.data() + s.offset, s.rows, s.cols);
}

Eigen::Map<const Vector> ParameterLayout::vector(std::span<const double> flat, std::size_t index) const {
  const TensorSlot& s = slots_.at(index);
  return Eigen::Map<const Vector>(flat.data() + s.offset, static_cast<Eigen::Index>(s.size()));
}

Eigen::Map<Vector> ParameterLayout::vector(std::span<double> flat, std::size_t index) const {
  const TensorSlot& s = slots_.at(index);
  return Eigen::Map<Vector>(flat.data() + s.offset, static_cast<Eigen::Index>(s.size()));
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  if (c.grid_size < 1 || c.input_channels < 1 || c.graph_layers < 0 || c.graph_channels < 1 || c.kernel < 1 ||
      c.classes < 1) {
    throw std::invalid_argument("network sizes must be positive");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  head_layers_ = parse_head_architecture(c.head);

  int length = c.grid_size;
  int channels = -1;  // branch-dependent at the first layer
  for (const auto& layer : head_layers_) {
    switch (layer.kind) {
      case HeadLayer::Kind::Conv:
        if (length < c.kernel) {
          throw std::invalid_argument("grid size " + std::to_string(c.grid_size) + " too small for head '" + c.head +
                                      "' with kernel " + std::to_string(c.kernel));
        }
        length = length - c.kernel + 1;
        channels = layer.size;
        break;
      case HeadLayer::Kind::Pool:
        if (length < layer.size) {
          throw std::invalid_argument("grid size " + std::to_string(c.grid_size) + " too small for head '" + c.head +
                                      "'");
        }
        length /= layer.size;
        break;
      case HeadLayer::Kind::Dense:
        length = 1;
        channels = layer.size;
        break;
    }
    head_lengths_.push_back(length);
    head_channels_.push_back(channels);
  }
  branch_output_ = head_layers_.back().size;

  int width = c.input_channels;
  std::vector<int> concat_width{width};
  for (int t = 0; t < c.graph_layers; ++t) {
    graph_weights_.push_back(layout_.add("graph.W" + std::to_string(t), width, c.graph_channels));
    width = c.graph_channels;
    concat_width.push_back(concat_width.back() + width);
  }

  for (int t = 0; t <= c.graph_layers; ++t) {
    HeadSlots slots;
    int len = c.grid_size;
    int ch = concat_width[static_cast<std::size_t>(t)];
    const std::string prefix = "head" + std::to_string(t) + ".";
    for (std::size_t i = 0; i < head_layers_.size(); ++i) {
      const auto& layer = head_layers_[i];
      const std::string id = prefix + std::to_string(i);
      if (layer.kind == HeadLayer::Kind::Conv) {
        slots.weight.push_back(layout_.add(id + ".conv.weight", layer.size, c.kernel * ch));
        slots.bias.push_back(layout_.add(id + ".conv.bias", layer.size, 1));
        ch = layer.size;
      } else if (layer.kind == HeadLayer::Kind::Dense) {
        slots.weight.push_back(layout_.add(id + ".dense.weight", layer.size, len * ch));
        slots.bias.push_back(layout_.add(id + ".dense.bias", layer.size, 1));
        ch = layer.size;
      } else {
        slots.weight.push_back(kNoSlot);
        slots.bias.push_back(kNoSlot);
      }
      len = head_lengths_[i];
    }
    heads_.push_back(std::move(slots));
  }
  classifier_weight_ = layout_.add("classifier.weight", c.classes, (c.graph_layers + 1) * branch_output_);
  classifier_bias_ = layout_.add("classifier.bias", c.classes, 1);
}

ParameterVector Network::initial_parameters(std::uint64_t seed) const {
  ParameterVector params(layout_.total(), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& slot : layout_.slots()) {
    if (slot.name.ends_with(".bias")) continue;
    double fan_in = static_cast<double>(slot.cols);
    double fan_out = static_cast<double>(slot.rows);
    if (slot.name.ends_with(".conv.weight")) fan_out *= config_.kernel;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    for (std::size_t i = 0; i < slot.size(); ++i) params[slot.offset + i] = uniform(rng);
  }
  return params;
}

Vector Network::run_head(std::span<const double> params, const Matrix& input, std::size_t branch,
                         std::vector<Matrix>* activations, std::vector<PoolResult>* pools) const {
  const HeadSlots& slots = heads_.at(branch);
  Matrix current = input;
  for (std::size_t i = 0; i < head_layers_.size(); ++i) {
    const auto& layer = head_layers_[i];
    if (activations) activations->push_back(current);
    switch (layer.kind) {
      case HeadLayer::Kind::Conv:
        current = conv1d_forward(current, layout_.view(params, slots.weight[i]), layout_.vector(params, slots.bias[i]),
                                 config_.kernel);
        activate(current, config_.activation);
        break;
      case HeadLayer::Kind::Pool: {
        PoolResult pooled = maxpool1d(current, layer.size);
        current = pooled.output;
        if (pools) pools->push_back(std::move(pooled));
        break;
      }
      case HeadLayer::Kind::Dense: {
        const Eigen::Map<const Eigen::RowVectorXd> flat(current.data(), current.size());
        Matrix out = flat * layout_.view(params, slots.weight[i]).transpose();
        out += layout_.vector(params, slots.bias[i]).transpose();
        activate(out, config_.activation);
        current = std::move(out);
        break;
      }
    }
  }
  if (activations) activations->push_back(current);
  return Eigen::Map<const Vector>(current.data(), current.size());
}

Matrix Network::head_backward(std::span<const double> params, std::size_t branch,
                              const std::vector<Matrix>& activations, const std::vector<PoolResult>& pools,
                              Matrix grad_output, std::span<double> grad) const {
  const HeadSlots& slots = heads_.at(branch);
  std::size_t pool_index = pools.size();
  Matrix g = std::move(grad_output);
  for (std::size_t i = head_layers_.size(); i-- > 0;) {
    const Matrix& input = activations[i];
    const Matrix& output = activations[i + 1];
    switch (head_layers_[i].kind) {
      case HeadLayer::Kind::Conv: {
        activation_backward(g, output, config_.activation);
        MatrixMap grad_weight = layout_.view(grad, slots.weight[i]);
        Eigen::Map<Vector> grad_bias = layout_.vector(grad, slots.bias[i]);
        g = conv1d_backward(input, layout_.view(params, slots.weight[i]), g, config_.kernel, grad_weight, grad_bias);
        break;
      }
      case HeadLayer::Kind::Pool:
        g = maxpool1d_backward(pools[--pool_index], g, input.rows());
        break;
      case HeadLayer::Kind::Dense: {
        activation_backward(g, output, config_.activation);
        const Eigen::Map<const Eigen::RowVectorXd> flat(input.data(), input.size());
        layout_.view(grad, slots.weight[i]).noalias() += g.transpose() * flat;
        layout_.vector(grad, slots.bias[i]) += g.transpose();
        Matrix g_in(input.rows(), input.cols());
        Eigen::Map<Eigen::RowVectorXd>(g_in.data(), g_in.size()) = g * layout_.view(params, slots.weight[i]);
        g = std::move(g_in);
        break;
      }
    }
  }
  return g;
}

Vector Network::head_forward(std::span<const double> params, const Matrix& concatenation, std::size_t branch) const {
  return run_head(params, concatenation, branch, nullptr, nullptr);
}

ForwardTrace Network::forward(std::span<const double> params, const Matrix& q, const Matrix& x, Mode mode,
                              std::mt19937_64* rng) const {
  if (params.size() != layout_.total()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                                std::to_string(layout_.total()));
  }
  require_shape(q.rows() == config_.grid_size && q.cols() == config_.grid_size,
                "Q is " + shape(q) + ", expected grid size " + std::to_string(config_.grid_size));
  require_shape(x.rows() == config_.grid_size && x.cols() == config_.input_channels,
                "grid features are " + shape(x) + ", expected " + std::to_string(config_.grid_size) + "x" +
                    std::to_string(config_.input_channels));
  if (!q.allFinite() || !x.allFinite()) throw NumericError("network input is not finite");

  ForwardTrace trace;
  trace.q = q;
  trace.layers.push_back(x);
  trace.concatenations.push_back(x);
  for (std::size_t t = 0; t < graph_weights_.size(); ++t) {
    trace.propagated.push_back(q * trace.layers.back());
    Matrix z = trace.propagated.back() * layout_.view(params, graph_weights_[t]);
    activate(z, config_.activation);
    const Matrix& prev = trace.concatenations.back();
    Matrix cat(prev.rows(), prev.cols() + z.cols());
    cat << prev, z;
    trace.layers.push_back(std::move(z));
    trace.concatenations.push_back(std::move(cat));
  }

  const auto branches = trace.concatenations.size();
  trace.features.resize(static_cast<Eigen::Index>(branches) * branch_output_);
  trace.head_activations.resize(branches);
  trace.head_pools.resize(branches);
  for (std::size_t t = 0; t < branches; ++t) {
    trace.features.segment(static_cast<Eigen::Index>(t) * branch_output_, branch_output_) =
        run_head(params, trace.concatenations[t], t, &trace.head_activations[t], &trace.head_pools[t]);
  }
  trace.probabilities = classifier_forward(trace.features, layout_.view(params, classifier_weight_),
                                           layout_.vector(params, classifier_bias_), config_.dropout, mode, rng,
                                           &trace.dropout_mask, &trace.logits);
  trace.valid = true;
  return trace;
}

double Network::backward(std::span<const double> params, const ForwardTrace& trace, int label,
                         std::span<double> grad) const {
  if (!trace.valid || trace.layers.size() != graph_weights_.size() + 1 ||
      trace.head_activations.size() != heads_.size()) {
    throw std::logic_error("backward needs a trace from a forward pass of this network");
  }
  if (grad.size() != layout_.total() || params.size() != layout_.total()) {
    throw std::invalid_argument("gradient/parameter size mismatch");
  }
  if (label < 0 || label >= config_.classes) throw std::out_of_range("class label out of range");

  Vector dlogits = trace.probabilities;
  dlogits(label) -= 1.0;
  const Vector dropped = trace.features.cwiseProduct(trace.dropout_mask);
  layout_.view(grad, classifier_weight_).noalias() += dlogits * dropped.transpose();
  layout_.vector(grad, classifier_bias_) += dlogits;
  const Vector dfeatures =
      (layout_.view(params, classifier_weight_).transpose() * dlogits).cwiseProduct(trace.dropout_mask);

  std::vector<Matrix> dlayers;
  for (const auto& z : trace.layers) dlayers.push_back(Matrix::Zero(z.rows(), z.cols()));
  for (std::size_t t = 0; t < heads_.size(); ++t) {
    Matrix g(1, branch_output_);
    g.row(0) = dfeatures.segment(static_cast<Eigen::Index>(t) * branch_output_, branch_output_).transpose();
    const Matrix dcat =
        head_backward(params, t, trace.head_activations[t], trace.head_pools[t], std::move(g), grad);
    Eigen::Index col = 0;
    for (std::size_t z = 0; z <= t; ++z) {
      const Eigen::Index width = dlayers[z].cols();
      dlayers[z] += dcat.middleCols(col, width);
      col += width;
    }
  }

  for (std::size_t t = graph_weights_.size(); t-- > 0;) {
    Matrix ds = dlayers[t + 1];
    activation_backward(ds, trace.layers[t + 1], config_.activation);
    layout_.view(grad, graph_weights_[t]).noalias() += trace.propagated[t].transpose() * ds;
    if (t > 0) dlayers[t].noalias() += trace.q.transpose() * (ds * layout_.view(params, graph_weights_[t]).transpose());
  }
  return cross_entropy(trace.probabilities, label);
}

Vector Network::predict(std::span<const double> params, const Matrix& q, const Matrix& x) const {
  return forward(params, q, x, Mode::Eval).probabilities;
}

// ---------------------------------------------------------------------------

double finite_difference_check(const NetworkConfig& config, std::uint64_t seed, double epsilon) {
  NetworkConfig cfg = config;
  cfg.dropout = 0.0;
  const Network net(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ParameterVector params = net.initial_parameters(seed);
  for (double& p : params) p += 0.2 * (uniform(rng) - 0.5);

  Matrix adjacency = Matrix::Zero(cfg.grid_size, cfg.grid_size);
  for (int i = 0; i < cfg.grid_size; ++i) {
    for (int j = i + 1; j < cfg.grid_size; ++j) {
      if (uniform(rng) < 0.4) adjacency(i, j) = adjacency(j, i) = 1.0;
    }
  }
  const Matrix q = average_mixing_matrix(adjacency);
  Matrix x(cfg.grid_size, cfg.input_channels);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng);
  const int label = static_cast<int>(seed % static_cast<std::uint64_t>(cfg.classes));

  ParameterVector grad(params.size(), 0.0);
  net.backward(params, net.forward(params, q, x, Mode::Eval), label, grad);

  auto loss = [&](const ParameterVector& p) {
    return cross_entropy(net.forward(p, q, x, Mode::Eval).probabilities, label);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss(params);
    params[i] = saved - epsilon;
    const double down = loss(params);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace qsgcnn
