#include "qsgcnn/depth_repr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace qsgcnn {

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();

std::vector<int> bfs_distances(const Graph& graph, std::size_t root) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  std::vector<int> dist(graph.size(), kUnreached);
  std::queue<Eigen::Index> frontier;
  dist[root] = 0;
  frontier.push(static_cast<Eigen::Index>(root));
  while (!frontier.empty()) {
    const Eigen::Index u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (graph.adjacency(u, v) != 0.0 && dist[static_cast<std::size_t>(v)] == kUnreached) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

// Entropy of the subgraph induced by `members` (indices into graph).
double ball_entropy(const Graph& graph, const std::vector<Eigen::Index>& members) {
  std::vector<double> degree(members.size(), 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = 0; b < members.size(); ++b) {
      if (a != b && graph.adjacency(members[a], members[b]) != 0.0) degree[a] += 1.0;
    }
    total += degree[a];
  }
  if (total == 0.0) return 0.0;
  // Fixed summation order keeps the result identical under vertex relabelling.
  std::sort(degree.begin(), degree.end());
  double h = 0.0;
  for (double d : degree) {
    if (d > 0.0) {
      const double p = d / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

void check_root(const Graph& graph, std::size_t root) {
  if (root >= graph.size()) {
    throw std::out_of_range("root " + std::to_string(root) + " out of range for graph of size " +
                            std::to_string(graph.size()));
  }
}

}  // namespace

Graph expansion_subgraph(const Graph& graph, std::size_t root, int k) {
  check_root(graph, root);
  if (k < 1) throw std::invalid_argument("expansion depth must be >= 1");
  const auto dist = bfs_distances(graph, root);
  std::vector<Eigen::Index> members;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] <= k) members.push_back(static_cast<Eigen::Index>(v));
  }
  const auto m = static_cast<Eigen::Index>(members.size());
  Graph sub;
  sub.adjacency.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) sub.adjacency(a, b) = graph.adjacency(members[a], members[b]);
  }
  if (graph.vertex_labels) {
    std::vector<int> labels;
    for (auto v : members) labels.push_back((*graph.vertex_labels)[static_cast<std::size_t>(v)]);
    sub.vertex_labels = std::move(labels);
  }
  return sub;
}

double steady_state_entropy(const Graph& graph) {
  std::vector<Eigen::Index> all(graph.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
  return ball_entropy(graph, all);
}

DBRepresentation db_representation(const Graph& graph, std::size_t root, int depth) {
  check_root(graph, root);
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  DBRepresentation out;
  out.vertex_id = root;
  out.values.reserve(static_cast<std::size_t>(depth));
  const auto dist = bfs_distances(graph, root);
  std::vector<Eigen::Index> members;
  for (int k = 1; k <= depth; ++k) {
    members.clear();
    for (std::size_t v = 0; v < dist.size(); ++v) {
      if (dist[v] <= k) members.push_back(static_cast<Eigen::Index>(v));
    }
    out.values.push_back(ball_entropy(graph, members));
  }
  return out;
}

Matrix graph_db_representations(const Graph& graph, int depth) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  const auto n = static_cast<Eigen::Index>(graph.size());
  Matrix out(n, depth);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto rep = db_representation(graph, static_cast<std::size_t>(v), depth);
    for (int k = 0; k < depth; ++k) out(v, k) = rep.values[static_cast<std::size_t>(k)];
  }
  return out;
}

DatasetDBRepresentations dataset_db_representations(const Dataset& dataset, int depth) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  DatasetDBRepresentations out;
  out.values.resize(static_cast<Eigen::Index>(dataset.total_vertices()), depth);
  Eigen::Index row = 0;
  for (std::size_t g = 0; g < dataset.size(); ++g) {
    out.graph_offsets.push_back(static_cast<std::size_t>(row));
    const Matrix reps = graph_db_representations(dataset.graphs[g], depth);
    out.values.middleRows(row, reps.rows()) = reps;
    for (Eigen::Index v = 0; v < reps.rows(); ++v) out.index.push_back({g, static_cast<std::size_t>(v)});
    row += reps.rows();
  }
  out.graph_offsets.push_back(static_cast<std::size_t>(row));
  return out;
}

}  // namespace qsgcnn
