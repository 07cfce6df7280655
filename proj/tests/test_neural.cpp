#include <gtest/gtest.h>

#include <cmath>

#include "qsgcnn/neural.hpp"
#include "qsgcnn/quantum_walk.hpp"
#include "support.hpp"

namespace qsgcnn {
namespace {

// Smallest network exercising every layer kind on an 8-row grid:
// 8 -> conv3 -> 6 -> pool -> 3 -> conv3 -> 1 -> dense 4.
NetworkConfig tiny_config() {
  NetworkConfig c;
  c.grid_size = 8;
  c.input_channels = 3;
  c.graph_layers = 2;
  c.graph_channels = 4;
  c.head = "C4-P2-C4-F4";
  c.kernel = 3;
  c.classes = 2;
  c.dropout = 0.0;
  return c;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix random_mixing(int n, std::mt19937_64& rng) {
  return average_mixing_matrix(testing::random_graph(n, 0.4, rng).adjacency);
}

Matrix col(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

TEST(QuantumConv, IdentityPassesThrough) {
  std::mt19937_64 rng(1);
  const Matrix z = random_matrix(5, 3, rng, 0.0, 1.0);
  EXPECT_EQ(quantum_conv_forward(Matrix::Identity(5, 5), z, Matrix::Identity(3, 3)), z);
}

TEST(QuantumConv, ReluKillsNegative) {
  std::mt19937_64 rng(2);
  const Matrix z = random_matrix(4, 2, rng, 0.1, 1.0);
  const Matrix w = -Matrix::Ones(2, 3);
  EXPECT_EQ(quantum_conv_forward(Matrix::Identity(4, 4), z, w), Matrix::Zero(4, 3));
}

TEST(QuantumConv, HandProduct) {
  const Matrix q = Matrix::Constant(2, 2, 0.5);
  EXPECT_EQ(quantum_conv_forward(q, col({2.0, 0.0}), Matrix::Ones(1, 1)), col({1.0, 1.0}));
}

TEST(QuantumConv, Errors) {
  EXPECT_THROW(quantum_conv_forward(Matrix::Identity(3, 3), Matrix::Ones(2, 1), Matrix::Ones(1, 1)),
               std::invalid_argument);
  EXPECT_THROW(quantum_conv_forward(Matrix::Identity(2, 2), Matrix::Ones(2, 2), Matrix::Ones(3, 1)),
               std::invalid_argument);
  Matrix z = Matrix::Ones(2, 1);
  z(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(quantum_conv_forward(Matrix::Identity(2, 2), z, Matrix::Ones(1, 1)), NumericError);
}

TEST(ConvStack, EmptyStack) {
  std::mt19937_64 rng(3);
  const Matrix z0 = random_matrix(6, 2, rng);
  const ConvStackOutput out = conv_stack_forward(random_mixing(6, rng), z0, {});
  ASSERT_EQ(out.layers.size(), 1u);
  ASSERT_EQ(out.concatenations.size(), 1u);
  EXPECT_EQ(out.layers[0], z0);
  EXPECT_EQ(out.concatenations[0], z0);
}

TEST(ConvStack, ConcatenationWidths) {
  std::mt19937_64 rng(4);
  const int c = 7;
  const ConvStackOutput out = conv_stack_forward(random_mixing(10, rng), random_matrix(10, c, rng),
                                                 {random_matrix(c, 32, rng), random_matrix(32, 32, rng)});
  ASSERT_EQ(out.concatenations.size(), 3u);
  EXPECT_EQ(out.concatenations[0].cols(), c);
  EXPECT_EQ(out.concatenations[1].cols(), c + 32);
  EXPECT_EQ(out.concatenations[2].cols(), c + 64);
  EXPECT_EQ(out.concatenations[2].rightCols(32), out.layers[2]);
  EXPECT_EQ(out.concatenations[2].leftCols(c), out.layers[0]);
}

TEST(ConvStack, ShapeChainBreak) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(conv_stack_forward(Matrix::Identity(4, 4), random_matrix(4, 2, rng),
                                  {random_matrix(2, 3, rng), random_matrix(4, 3, rng)}),
               std::invalid_argument);
}

TEST(ConvStack, RowwiseMatchesMatrixForm) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial;
    const Matrix q = random_mixing(n, rng);
    const Matrix z = random_matrix(n, 5, rng);
    const Matrix w = random_matrix(5, 4, rng);
    for (Activation act : {Activation::Relu, Activation::Identity}) {
      const Matrix a = quantum_conv_forward(q, z, w, act);
      const Matrix b = quantum_conv_forward_rowwise(q, z, w, act);
      EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ConvStack, VertexOrderEquivariance) {
  std::mt19937_64 rng(7);
  const int n = 12;
  const Graph g = testing::random_graph(n, 0.3, rng);
  const std::vector<int> perm = testing::random_permutation(n, rng);
  const Matrix p = testing::permutation_matrix(perm);
  const Matrix z0 = random_matrix(n, 3, rng);
  const std::vector<Matrix> w = {random_matrix(3, 6, rng), random_matrix(6, 6, rng), random_matrix(6, 2, rng)};
  const Matrix q = average_mixing_matrix(g.adjacency);
  const ConvStackOutput a = conv_stack_forward(q, z0, w);
  const ConvStackOutput b = conv_stack_forward(p * q * p.transpose(), p * z0, w);
  for (std::size_t t = 0; t < a.layers.size(); ++t) {
    EXPECT_LT((p * a.layers[t] - b.layers[t]).cwiseAbs().maxCoeff(), 1e-12) << "layer " << t;
  }
}

TEST(Conv1d, ZeroFilter) {
  std::mt19937_64 rng(8);
  const Matrix out = conv1d_forward(random_matrix(9, 2, rng), Matrix::Zero(3, 10), Vector::Zero(3), 5);
  EXPECT_EQ(out, Matrix::Zero(5, 3));
}

TEST(Conv1d, DeltaFilter) {
  std::mt19937_64 rng(9);
  const Matrix in = random_matrix(5, 2, rng);
  Matrix w = Matrix::Zero(1, 10);
  w(0, 2 * 2 + 0) = 1.0;  // centre tap, channel 0
  const Matrix out = conv1d_forward(in, w, Vector::Zero(1), 5);
  ASSERT_EQ(out.rows(), 1);
  EXPECT_EQ(out(0, 0), in(2, 0));
}

TEST(Conv1d, WindowSums) {
  const Matrix out = conv1d_forward(col({1, 2, 3, 4, 5, 6}), Matrix::Ones(1, 5), Vector::Zero(1), 5);
  EXPECT_EQ(out, col({15, 20}));
}

TEST(Conv1d, BiasAndChannels) {
  Matrix in(3, 2);
  in << 1, 10, 2, 20, 3, 30;
  Matrix w(2, 4);  // kernel 2, two input channels
  w << 1, 0, 0, 1,  // x[t,0] + x[t+1,1]
      0, 1, 0, 0;   // x[t,1]
  Vector b(2);
  b << 0.5, -1.0;
  Matrix expected(2, 2);
  expected << 21.5, 9, 32.5, 19;
  EXPECT_EQ(conv1d_forward(in, w, b, 2), expected);
}

TEST(Conv1d, TooShort) {
  EXPECT_THROW(conv1d_forward(Matrix::Ones(4, 1), Matrix::Ones(1, 5), Vector::Zero(1), 5), std::invalid_argument);
}

TEST(Conv1d, BackwardMatchesDifferences) {
  std::mt19937_64 rng(10);
  const int kernel = 3, cin = 2, cout = 3, len = 7;
  const Matrix in = random_matrix(len, cin, rng);
  Matrix w = random_matrix(cout, kernel * cin, rng);
  const Vector b = random_matrix(cout, 1, rng);
  const Matrix upstream = random_matrix(len - kernel + 1, cout, rng);
  auto objective = [&](const Matrix& x, const Matrix& weights) {
    return (conv1d_forward(x, weights, b, kernel).cwiseProduct(upstream)).sum();
  };
  Matrix gw = Matrix::Zero(cout, kernel * cin);
  Vector gb = Vector::Zero(cout);
  const Matrix gin = conv1d_backward(in, w, upstream, kernel, gw, gb);
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    Matrix up = in, down = in;
    up.data()[i] += eps;
    down.data()[i] -= eps;
    EXPECT_NEAR(gin.data()[i], (objective(up, w) - objective(down, w)) / (2 * eps), 1e-8);
  }
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Matrix up = w, down = w;
    up.data()[i] += eps;
    down.data()[i] -= eps;
    EXPECT_NEAR(gw.data()[i], (objective(in, up) - objective(in, down)) / (2 * eps), 1e-8);
  }
  for (Eigen::Index o = 0; o < cout; ++o) EXPECT_NEAR(gb(o), upstream.col(o).sum(), 1e-12);
}

TEST(MaxPool, Examples) {
  EXPECT_EQ(maxpool1d(col({1, 3, 2, 2})).output, col({3, 2}));
  EXPECT_EQ(maxpool1d(Matrix::Constant(6, 2, 4.0)).output, Matrix::Constant(3, 2, 4.0));
  EXPECT_EQ(maxpool1d(col({5, 1, 4, 4, 9})).output, col({5, 4}));
  EXPECT_THROW(maxpool1d(col({1})), std::invalid_argument);
}

TEST(MaxPool, TiesGoToEarliestRowAndBackwardRoutes) {
  const PoolResult r = maxpool1d(col({2, 2, 1, 7, 3}));
  EXPECT_EQ(r.argmax, (std::vector<Eigen::Index>{0, 3}));
  const Matrix g = maxpool1d_backward(r, col({10, 20}), 5);
  EXPECT_EQ(g, col({10, 0, 0, 20, 0}));
}

TEST(Head, ParseArchitecture) {
  const auto layers = parse_head_architecture("C64-P2-C64-P2-C64-F64");
  ASSERT_EQ(layers.size(), 6u);
  EXPECT_EQ(layers[0].kind, HeadLayer::Kind::Conv);
  EXPECT_EQ(layers[1].kind, HeadLayer::Kind::Pool);
  EXPECT_EQ(layers[5].kind, HeadLayer::Kind::Dense);
  EXPECT_EQ(layers[5].size, 64);
  for (const char* bad : {"", "C64-X2", "F64-C64", "C0", "C64-P2", "C64--F64", "C64-F"}) {
    EXPECT_THROW(parse_head_architecture(bad), std::invalid_argument) << bad;
  }
}

TEST(Head, DefaultLengthChain) {
  NetworkConfig c;
  c.input_channels = 7;
  const Network net(c);
  EXPECT_EQ(net.head_lengths(), (std::vector<int>{60, 30, 26, 13, 9, 1}));
  EXPECT_EQ(net.branch_output_size(), 64);
  // Dense layer of branch 0 reads the 9 x 64 flattened conv output.
  bool found = false;
  for (const auto& slot : net.layout().slots()) {
    if (slot.name == "head0.5.dense.weight") {
      EXPECT_EQ(slot.rows * slot.cols, 576 * 64);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Head, GridTooSmall) {
  NetworkConfig c;
  c.grid_size = 31;
  EXPECT_THROW(Network{c}, std::invalid_argument);
  c.grid_size = 32;
  EXPECT_NO_THROW(Network{c});
}

TEST(Head, ZeroInputGivesZeroOutput) {
  const Network net(tiny_config());
  const ParameterVector params = net.initial_parameters(1);
  const Vector out = net.head_forward(params, Matrix::Zero(8, 3), 0);
  EXPECT_EQ(out, Vector::Zero(4));
}

TEST(Layout, SlotsCoverParameters) {
  const Network net(tiny_config());
  std::size_t expected_offset = 0;
  for (const auto& slot : net.layout().slots()) {
    EXPECT_EQ(slot.offset, expected_offset) << slot.name;
    expected_offset += slot.size();
  }
  EXPECT_EQ(expected_offset, net.parameter_count());
  EXPECT_EQ(net.layout().slot(0).name, "graph.W0");
  EXPECT_EQ(net.layout().slots().back().name, "classifier.bias");
  EXPECT_LE(net.parameter_count(), 5000u);
}

TEST(Init, GlorotBoundsAndZeroBias) {
  NetworkConfig c;
  c.input_channels = 7;
  const Network net(c);
  const ParameterVector params = net.initial_parameters(3);
  for (std::size_t s = 0; s < net.layout().slots().size(); ++s) {
    const TensorSlot& slot = net.layout().slot(s);
    const auto view = net.layout().view(std::span<const double>(params), s);
    if (slot.name.ends_with("bias")) {
      EXPECT_EQ(view.cwiseAbs().maxCoeff(), 0.0) << slot.name;
    } else {
      EXPECT_GT(view.cwiseAbs().maxCoeff(), 0.0) << slot.name;
      EXPECT_LE(view.cwiseAbs().maxCoeff(), std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols)) + 1e-15)
          << slot.name;
    }
  }
  EXPECT_EQ(params, net.initial_parameters(3));
  EXPECT_NE(params, net.initial_parameters(4));
}

TEST(Classifier, SoftmaxExamples) {
  const Vector p = softmax(Vector::Zero(3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p(i), 1.0 / 3.0, 1e-15);
  Vector logits(2);
  logits << 2.0, 0.0;
  const Vector q = softmax(logits);
  EXPECT_NEAR(q(0), std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(q(0), 0.8808, 1e-4);
  EXPECT_NEAR(q(1), 0.1192, 1e-4);
  Vector huge(3);
  huge << 1000.0, -1000.0, 999.0;
  const Vector h = softmax(huge);
  EXPECT_TRUE(h.allFinite());
  EXPECT_NEAR(h.sum(), 1.0, 1e-12);
}

TEST(Classifier, SoftmaxSumsToOne) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector p = softmax(random_matrix(2 + trial % 6, 1, rng, -30.0, 30.0));
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_TRUE((p.array() >= 0.0).all() && (p.array() <= 1.0).all());
  }
}

TEST(Classifier, ZeroLogitsUniform) {
  const Vector p = classifier_forward(Vector::Ones(6), Matrix::Zero(4, 6), Vector::Zero(4), 0.5, Mode::Eval, nullptr);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(p(i), 0.25, 1e-15);
}

TEST(Classifier, DropoutZeroMatchesEval) {
  std::mt19937_64 rng(13);
  const Vector f = random_matrix(10, 1, rng);
  const Matrix w = random_matrix(3, 10, rng);
  const Vector b = random_matrix(3, 1, rng);
  std::mt19937_64 drop(1);
  EXPECT_EQ(classifier_forward(f, w, b, 0.0, Mode::Train, &drop), classifier_forward(f, w, b, 0.0, Mode::Eval, nullptr));
}

TEST(Classifier, InvertedDropoutMask) {
  std::mt19937_64 drop(2);
  Vector mask;
  classifier_forward(Vector::Ones(4000), Matrix::Zero(2, 4000), Vector::Zero(2), 0.5, Mode::Train, &drop, &mask);
  int kept = 0;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    EXPECT_TRUE(mask(i) == 0.0 || mask(i) == 2.0);
    kept += mask(i) != 0.0;
  }
  EXPECT_NEAR(kept / 4000.0, 0.5, 0.05);
}

TEST(Loss, CrossEntropyExamples) {
  Vector onehot(2), uniform(2), quarter(4), zero(2);
  onehot << 1.0, 0.0;
  uniform << 0.5, 0.5;
  quarter << 0.25, 0.25, 0.25, 0.25;
  zero << 0.0, 1.0;
  EXPECT_EQ(cross_entropy(onehot, 0), 0.0);
  EXPECT_NEAR(cross_entropy(uniform, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(quarter, 2), std::log(4.0), 1e-15);
  EXPECT_NEAR(cross_entropy(quarter, 2), 1.3863, 1e-4);
  EXPECT_NEAR(cross_entropy(zero, 0), -std::log(1e-12), 1e-9);
}

TEST(Network, EvalForwardIsDeterministic) {
  std::mt19937_64 rng(14);
  const Network net(tiny_config());
  const ParameterVector params = net.initial_parameters(5);
  const Matrix q = random_mixing(8, rng);
  const Matrix x = random_matrix(8, 3, rng, 0.0, 1.0);
  const Vector a = net.predict(params, q, x);
  const Vector b = net.predict(params, q, x);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a.sum(), 1.0, 1e-12);
}

TEST(Network, TrainModeNeedsGenerator) {
  NetworkConfig c = tiny_config();
  c.dropout = 0.5;
  const Network net(c);
  EXPECT_THROW(net.forward(net.initial_parameters(1), Matrix::Identity(8, 8), Matrix::Ones(8, 3), Mode::Train),
               std::invalid_argument);
}

TEST(Network, ConfidentCorrectPredictionHasZeroGradient) {
  const Network net(tiny_config());
  ParameterVector params = net.initial_parameters(6);
  const auto& slots = net.layout().slots();
  const std::size_t weight = slots.size() - 2, bias = slots.size() - 1;
  net.layout().view(std::span<double>(params), weight).setZero();
  net.layout().vector(std::span<double>(params), bias) << 1000.0, 0.0;
  std::mt19937_64 rng(15);
  const ForwardTrace trace = net.forward(params, random_mixing(8, rng), random_matrix(8, 3, rng), Mode::Eval);
  ParameterVector grad(params.size(), 0.0);
  const double loss = net.backward(params, trace, 0, grad);
  EXPECT_EQ(loss, 0.0);
  for (double g : grad) EXPECT_LE(std::abs(g), 1e-12);
}

TEST(Network, DeadReluBlocksFirstLayerGradient) {
  const Network net(tiny_config());
  ParameterVector params = net.initial_parameters(7);
  auto w0 = net.layout().view(std::span<double>(params), 0);
  w0 = -w0.cwiseAbs() - Matrix::Constant(w0.rows(), w0.cols(), 0.01);
  std::mt19937_64 rng(16);
  const ForwardTrace trace =
      net.forward(params, random_mixing(8, rng), random_matrix(8, 3, rng, 0.1, 1.0), Mode::Eval);
  ParameterVector grad(params.size(), 0.0);
  net.backward(params, trace, 1, grad);
  const TensorSlot& slot = net.layout().slot(0);
  for (std::size_t i = slot.offset; i < slot.offset + slot.size(); ++i) EXPECT_EQ(grad[i], 0.0);
  EXPECT_GT(std::accumulate(grad.begin(), grad.end(), 0.0, [](double s, double g) { return s + std::abs(g); }), 0.0);
}

TEST(Network, BackwardRejectsInvalidTrace) {
  const Network net(tiny_config());
  const ParameterVector params = net.initial_parameters(1);
  ParameterVector grad(params.size());
  EXPECT_THROW(net.backward(params, ForwardTrace{}, 0, grad), std::logic_error);
}

TEST(Network, IdenticalGridsIdenticalProbabilities) {
  std::mt19937_64 rng(17);
  const Network net(tiny_config());
  const ParameterVector params = net.initial_parameters(8);
  const Matrix q = random_mixing(8, rng);
  const Matrix x = random_matrix(8, 3, rng, 0.0, 1.0);
  const Matrix q2 = q, x2 = x;
  EXPECT_EQ(net.predict(params, q, x), net.predict(params, q2, x2));
}

TEST(GradientCheck, TinyConfig) {
  for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LT(finite_difference_check(tiny_config(), seed, 1e-4), 1e-4);
}

TEST(GradientCheck, LinearVariantIsExact) {
  NetworkConfig c = tiny_config();
  c.activation = Activation::Identity;
  EXPECT_LT(finite_difference_check(c, 1, 1e-4), 1e-7);
}

TEST(GradientCheck, LargeEpsilonFails) { EXPECT_GT(finite_difference_check(tiny_config(), 1, 1e-1), 1e-3); }

}  // namespace
}  // namespace qsgcnn
