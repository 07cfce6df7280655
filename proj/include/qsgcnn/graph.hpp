#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qsgcnn/types.hpp"

namespace qsgcnn {

/// Undirected graph with a dense adjacency matrix. Raw input graphs carry 0/1
/// entries with a zero diagonal; aligned grids reuse the type with weights.
struct Graph {
  Matrix adjacency;
  std::optional<std::vector<int>> vertex_labels;

  std::size_t size() const { return static_cast<std::size_t>(adjacency.rows()); }
  std::vector<int> degrees() const;
};

/// A labelled collection of graphs loaded from a TU benchmark directory.
struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  /// Contiguous 0-based class ids.
  std::vector<int> class_labels;
  /// Raw class label for each contiguous id, ascending.
  std::vector<int> raw_class_values;
  /// Sorted distinct vertex labels over all graphs (empty when unattributed).
  std::vector<int> label_alphabet;

  std::size_t size() const { return graphs.size(); }
  int num_classes() const { return static_cast<int>(raw_class_values.size()); }
  bool has_vertex_labels() const;
  std::size_t total_vertices() const;
};

// Row i is the feature vector of vertex i, in adjacency order.
using FeatureMatrix = Matrix;

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
/// and, when present, `<name>_node_labels.txt`. Throws DataError naming the
/// offending file and line.
Dataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name);

/// Writes the dataset back in TU text format (both edge directions listed).
void write_tu_dataset(const Dataset& dataset, const std::filesystem::path& directory);

/// Assembles a Dataset from in-memory graphs, remapping class labels and
/// computing the label alphabet the same way the loader does.
Dataset make_dataset(std::string name, std::vector<Graph> graphs, const std::vector<int>& raw_class_labels);

FeatureMatrix one_hot_features(const Dataset& dataset, std::size_t graph_index);

/// Sorted distinct vertex degrees over every graph of the dataset.
std::vector<int> degree_alphabet(const Dataset& dataset);

FeatureMatrix degree_features(const Dataset& dataset, std::size_t graph_index);
FeatureMatrix degree_features(const Dataset& dataset, std::size_t graph_index, const std::vector<int>& alphabet);

/// One-hot vertex labels when the dataset has them, degree one-hot otherwise.
FeatureMatrix vertex_features(const Dataset& dataset, std::size_t graph_index);

enum class DiagnosticKind { NotSquare, Asymmetric, Negative, NonFinite, NonzeroDiagonal, LabelLength };

struct Diagnostic {
  DiagnosticKind kind;
  std::string message;
};

/// Checks the Graph invariants. `raw` additionally requires a zero diagonal.
std::vector<Diagnostic> validate_graph(const Graph& graph, bool raw = true);

}  // namespace qsgcnn
