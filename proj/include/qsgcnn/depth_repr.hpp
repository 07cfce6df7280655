#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "qsgcnn/graph.hpp"

namespace qsgcnn {

/// Vertex-induced subgraph on every vertex within `k` hops of `root`
/// (unweighted BFS). Vertices keep their relative order from `graph`.
Graph expansion_subgraph(const Graph& graph, std::size_t root, int k);

/// Shannon entropy (natural log) of the degree-proportional stationary
/// distribution of a random walk; 0 for an edgeless graph.
double steady_state_entropy(const Graph& graph);

/// values[k-1] = steady_state_entropy(expansion_subgraph(graph, root, k)).
struct DBRepresentation {
  std::size_t vertex_id = 0;
  std::vector<double> values;
};

DBRepresentation db_representation(const Graph& graph, std::size_t root, int depth);

/// DB representations of all vertices in the graph, one row per vertex. Shares
/// one BFS per root across all depths.
Matrix graph_db_representations(const Graph& graph, int depth);

struct VertexIndex {
  std::size_t graph = 0;
  std::size_t vertex = 0;
};

struct DatasetDBRepresentations {
  Matrix values;                  // rows = all vertices, cols = depth
  std::vector<VertexIndex> index;  // row -> (graph, vertex)
  std::vector<std::size_t> graph_offsets;  // first row of each graph, plus a final sentinel
};

/// Rows ordered by graph (dataset order) then vertex (adjacency order).
DatasetDBRepresentations dataset_db_representations(const Dataset& dataset, int depth);

}  // namespace qsgcnn
