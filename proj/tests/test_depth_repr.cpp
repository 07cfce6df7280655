#include <gtest/gtest.h>

#include <cmath>
#include <queue>

#include "qsgcnn/depth_repr.hpp"
#include "support.hpp"

namespace qsgcnn {
namespace {

const double kLn2 = std::log(2.0);
const double kLn3 = std::log(3.0);

TEST(Expansion, TriangleIsWholeGraph) {
  const Graph g = expansion_subgraph(testing::triangle(), 2, 1);
  EXPECT_EQ(g.adjacency, testing::triangle().adjacency);
}

TEST(Expansion, PathEndpointOneHop) {
  const Graph g = expansion_subgraph(testing::path(3), 0, 1);
  EXPECT_EQ(g.adjacency, testing::complete(2).adjacency);
}

TEST(Expansion, IsolatedVertex) {
  Graph g = testing::path(3);
  Graph big = testing::edgeless(4);
  big.adjacency.topLeftCorner(3, 3) = g.adjacency;
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(expansion_subgraph(big, 3, k).size(), 1u);
}

TEST(Expansion, KeepsInducedEdgesAndLabels) {
  // 4-cycle with chord (0,2); the 1-hop ball of 1 is {0,1,2} and keeps the chord.
  Graph g = testing::edgeless(4);
  for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
  g.vertex_labels = std::vector<int>{10, 11, 12, 13};
  const Graph ball = expansion_subgraph(g, 1, 1);
  EXPECT_EQ(ball.size(), 3u);
  EXPECT_EQ(ball.adjacency.sum(), 6.0);
  ASSERT_TRUE(ball.vertex_labels);
  std::vector<int> labels = *ball.vertex_labels;
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(labels, (std::vector<int>{10, 11, 12}));
}

TEST(Expansion, RejectsBadArguments) {
  EXPECT_THROW(expansion_subgraph(testing::path(3), 3, 1), std::out_of_range);
  EXPECT_THROW(expansion_subgraph(testing::path(3), 0, 0), std::invalid_argument);
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(steady_state_entropy(testing::complete(2)), kLn2, 1e-15);
  EXPECT_NEAR(steady_state_entropy(testing::triangle()), kLn3, 1e-15);
  EXPECT_EQ(steady_state_entropy(testing::edgeless(4)), 0.0);
}

TEST(Entropy, IgnoresIsolatedVertices) {
  Graph g = testing::edgeless(5);
  g.adjacency(0, 1) = g.adjacency(1, 0) = 1.0;
  EXPECT_NEAR(steady_state_entropy(g), kLn2, 1e-15);
}

TEST(DB, TriangleVertex) {
  const DBRepresentation r = db_representation(testing::triangle(), 0, 2);
  ASSERT_EQ(r.values.size(), 2u);
  EXPECT_NEAR(r.values[0], kLn3, 1e-12);
  EXPECT_NEAR(r.values[1], kLn3, 1e-12);
}

TEST(DB, PathEndpoint) {
  const DBRepresentation r = db_representation(testing::path(3), 0, 2);
  EXPECT_NEAR(r.values[0], kLn2, 1e-12);
  EXPECT_NEAR(r.values[1], 1.5 * kLn2, 1e-12);
}

TEST(DB, IsolatedVertex) {
  const DBRepresentation r = db_representation(testing::edgeless(1), 0, 3);
  EXPECT_EQ(r.values, (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(DB, GraphMatrixMatchesPerVertex) {
  std::mt19937_64 rng(31);
  const Graph g = testing::random_graph(14, 0.25, rng);
  const Matrix all = graph_db_representations(g, 6);
  for (std::size_t v = 0; v < g.size(); ++v) {
    const DBRepresentation r = db_representation(g, v, 6);
    for (int k = 0; k < 6; ++k) EXPECT_EQ(all(static_cast<Eigen::Index>(v), k), r.values[static_cast<std::size_t>(k)]);
  }
}

std::vector<int> distances(const Graph& g, std::size_t root) {
  std::vector<int> d(g.size(), -1);
  std::queue<std::size_t> q;
  d[root] = 0;
  q.push(root);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t w = 0; w < g.size(); ++w) {
      if (g.adjacency(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(w)) != 0.0 && d[w] < 0) {
        d[w] = d[u] + 1;
        q.push(w);
      }
    }
  }
  return d;
}

TEST(DB, SaturatesAndStaysBounded) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const Graph g = testing::random_graph(4 + trial % 12, 0.35, rng);
    const Matrix reps = graph_db_representations(g, 10);
    const double bound = std::log(static_cast<double>(g.size())) + 1e-12;
    EXPECT_TRUE((reps.array() >= 0.0).all());
    EXPECT_TRUE((reps.array() <= bound).all());
    for (std::size_t v = 0; v < g.size(); ++v) {
      const std::vector<int> d = distances(g, v);
      const int ecc = *std::max_element(d.begin(), d.end());
      const bool connected = std::find(d.begin(), d.end(), -1) == d.end();
      if (!connected || ecc == 0) continue;
      for (int k = ecc; k <= 10; ++k) {
        EXPECT_NEAR(reps(static_cast<Eigen::Index>(v), k - 1), steady_state_entropy(g), 1e-12);
      }
    }
  }
}

TEST(DB, IsomorphismInvariance) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 13;
    const Graph g = testing::random_graph(n, 0.3, rng);
    const std::vector<int> perm = testing::random_permutation(n, rng);
    const Matrix a = graph_db_representations(g, 8);
    const Matrix b = graph_db_representations(testing::permute(g, perm), 8);
    for (int v = 0; v < n; ++v) EXPECT_EQ(a.row(v), b.row(perm[static_cast<std::size_t>(v)]));
  }
}

TEST(DB, DatasetTriangle) {
  const Dataset ds = make_dataset("T", {testing::triangle()}, {0});
  const DatasetDBRepresentations r = dataset_db_representations(ds, 2);
  ASSERT_EQ(r.values.rows(), 3);
  EXPECT_LT((r.values.array() - kLn3).abs().maxCoeff(), 1e-12);
}

TEST(DB, DatasetIsolatedVertex) {
  const Dataset ds = make_dataset("T", {testing::edgeless(1)}, {0});
  const DatasetDBRepresentations r = dataset_db_representations(ds, 4);
  EXPECT_EQ(r.values, Matrix::Zero(1, 4));
}

TEST(DB, DatasetIndexAndOffsets) {
  const Dataset ds = make_dataset("T", {testing::path(2), testing::triangle(), testing::edgeless(1)}, {0, 1, 0});
  const DatasetDBRepresentations r = dataset_db_representations(ds, 3);
  EXPECT_EQ(r.graph_offsets, (std::vector<std::size_t>{0, 2, 5, 6}));
  ASSERT_EQ(r.index.size(), 6u);
  EXPECT_EQ(r.index[3].graph, 1u);
  EXPECT_EQ(r.index[3].vertex, 1u);
  EXPECT_EQ(r.index[5].graph, 2u);
}

TEST(DB, MutagRowCount) {
  const Dataset ds = load_tu_dataset(testing::data_dir() / "MUTAG", "MUTAG");
  const DatasetDBRepresentations r = dataset_db_representations(ds, 10);
  EXPECT_EQ(r.values.rows(), 3371);
  EXPECT_EQ(r.values.cols(), 10);
  EXPECT_TRUE(r.values.allFinite());
}

TEST(DB, RejectsBadDepth) {
  EXPECT_THROW(db_representation(testing::path(2), 0, 0), std::invalid_argument);
  EXPECT_THROW(graph_db_representations(testing::path(2), 0), std::invalid_argument);
}

}  // namespace
}  // namespace qsgcnn
