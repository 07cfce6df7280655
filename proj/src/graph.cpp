#include "qsgcnn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qsgcnn {

namespace fs = std::filesystem;

std::vector<int> Graph::degrees() const {
  std::vector<int> out(size(), 0);
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    int d = 0;
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
      if (adjacency(i, j) != 0.0) ++d;
    }
    out[static_cast<std::size_t>(i)] = d;
  }
  return out;
}

bool Dataset::has_vertex_labels() const {
  return !graphs.empty() &&
         std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.vertex_labels.has_value(); });
}

std::size_t Dataset::total_vertices() const {
  std::size_t n = 0;
  for (const auto& g : graphs) n += g.size();
  return n;
}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    while (!text.empty() && (text.back() == '\r' || text.back() == ' ' || text.back() == '\t')) text.pop_back();
    lines.push_back({number, std::move(text)});
  }
  // Only trailing blank lines are tolerated.
  while (!lines.empty() && lines.back().text.empty()) lines.pop_back();
  return lines;
}

long parse_int(std::string_view token, const fs::path& path, std::size_t line) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
    std::ostringstream msg;
    msg << path.filename().string() << ":" << line << ": non-integer token '" << token << "'";
    throw DataError(msg.str());
  }
  return value;
}

std::vector<long> read_column(const fs::path& path) {
  std::vector<long> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_int(line.text, path, line.number));
  return out;
}

fs::path require(const fs::path& dir, const std::string& name, const std::string& suffix) {
  fs::path p = dir / (name + suffix);
  if (!fs::exists(p)) throw DataError("missing file " + p.string());
  return p;
}

std::vector<int> sorted_unique(std::vector<int> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

Matrix one_hot(const std::vector<int>& values, const std::vector<int>& alphabet, const char* what) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(alphabet.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto it = std::lower_bound(alphabet.begin(), alphabet.end(), values[i]);
    if (it == alphabet.end() || *it != values[i]) {
      throw DataError(std::string(what) + " " + std::to_string(values[i]) + " absent from alphabet");
    }
    out(static_cast<Eigen::Index>(i), it - alphabet.begin()) = 1.0;
  }
  return out;
}

}  // namespace

Dataset make_dataset(std::string name, std::vector<Graph> graphs, const std::vector<int>& raw_class_labels) {
  if (graphs.size() != raw_class_labels.size()) {
    throw DataError("graph count " + std::to_string(graphs.size()) + " does not match class label count " +
                    std::to_string(raw_class_labels.size()));
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.raw_class_values = sorted_unique(raw_class_labels);
  ds.class_labels.reserve(raw_class_labels.size());
  for (int raw : raw_class_labels) {
    auto it = std::lower_bound(ds.raw_class_values.begin(), ds.raw_class_values.end(), raw);
    ds.class_labels.push_back(static_cast<int>(it - ds.raw_class_values.begin()));
  }
  std::vector<int> all_labels;
  for (const auto& g : graphs) {
    if (g.vertex_labels) all_labels.insert(all_labels.end(), g.vertex_labels->begin(), g.vertex_labels->end());
  }
  ds.label_alphabet = sorted_unique(std::move(all_labels));
  ds.graphs = std::move(graphs);
  return ds;
}

Dataset load_tu_dataset(const fs::path& directory, const std::string& name) {
  const fs::path edges_path = require(directory, name, "_A.txt");
  const fs::path indicator_path = require(directory, name, "_graph_indicator.txt");
  const fs::path labels_path = require(directory, name, "_graph_labels.txt");
  const fs::path node_labels_path = directory / (name + "_node_labels.txt");

  const std::vector<long> indicator = read_column(indicator_path);
  const std::vector<long> graph_labels = read_column(labels_path);
  const std::size_t num_graphs = graph_labels.size();
  const std::size_t num_vertices = indicator.size();

  // Vertex k (0-based) -> (graph, local index in order of appearance).
  std::vector<std::size_t> owner(num_vertices), local(num_vertices);
  std::vector<std::size_t> sizes(num_graphs, 0);
  for (std::size_t k = 0; k < num_vertices; ++k) {
    const long g = indicator[k];
    if (g < 1 || static_cast<std::size_t>(g) > num_graphs) {
      throw DataError(indicator_path.filename().string() + ":" + std::to_string(k + 1) + ": vertex " +
                      std::to_string(k + 1) + " assigned to unknown graph " + std::to_string(g));
    }
    owner[k] = static_cast<std::size_t>(g - 1);
    local[k] = sizes[owner[k]]++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (sizes[g] == 0) {
      throw DataError(indicator_path.filename().string() + ": graph " + std::to_string(g + 1) + " has no vertices");
    }
  }

  std::vector<Graph> graphs(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    const auto n = static_cast<Eigen::Index>(sizes[g]);
    graphs[g].adjacency = Matrix::Zero(n, n);
  }

  for (const auto& line : read_lines(edges_path)) {
    const auto comma = line.text.find(',');
    if (comma == std::string::npos) {
      throw DataError(edges_path.filename().string() + ":" + std::to_string(line.number) + ": expected 'i, j'");
    }
    const std::string_view text(line.text);
    const long a = parse_int(text.substr(0, comma), edges_path, line.number);
    const long b = parse_int(text.substr(comma + 1), edges_path, line.number);
    for (long v : {a, b}) {
      if (v < 1 || static_cast<std::size_t>(v) > num_vertices) {
        throw DataError(edges_path.filename().string() + ":" + std::to_string(line.number) +
                        ": edge references unknown vertex " + std::to_string(v));
      }
    }
    if (a == b) {
      throw DataError(edges_path.filename().string() + ":" + std::to_string(line.number) + ": self-loop on vertex " +
                      std::to_string(a));
    }
    const auto ia = static_cast<std::size_t>(a - 1), ib = static_cast<std::size_t>(b - 1);
    if (owner[ia] != owner[ib]) {
      throw DataError(edges_path.filename().string() + ":" + std::to_string(line.number) + ": edge (" +
                      std::to_string(a) + ", " + std::to_string(b) + ") crosses graphs");
    }
    auto& adj = graphs[owner[ia]].adjacency;
    const auto la = static_cast<Eigen::Index>(local[ia]), lb = static_cast<Eigen::Index>(local[ib]);
    adj(la, lb) = 1.0;
    adj(lb, la) = 1.0;
  }

  if (fs::exists(node_labels_path)) {
    const std::vector<long> node_labels = read_column(node_labels_path);
    if (node_labels.size() != num_vertices) {
      throw DataError(node_labels_path.filename().string() + ": " + std::to_string(node_labels.size()) +
                      " labels for " + std::to_string(num_vertices) + " vertices");
    }
    for (std::size_t g = 0; g < num_graphs; ++g) graphs[g].vertex_labels = std::vector<int>(sizes[g]);
    for (std::size_t k = 0; k < num_vertices; ++k) {
      (*graphs[owner[k]].vertex_labels)[local[k]] = static_cast<int>(node_labels[k]);
    }
  }

  std::vector<int> raw_classes(graph_labels.begin(), graph_labels.end());
  return make_dataset(name, std::move(graphs), raw_classes);
}

void write_tu_dataset(const Dataset& dataset, const fs::path& directory) {
  fs::create_directories(directory);
  const std::string& name = dataset.name;
  std::ofstream edges(directory / (name + "_A.txt"));
  std::ofstream indicator(directory / (name + "_graph_indicator.txt"));
  std::ofstream labels(directory / (name + "_graph_labels.txt"));
  std::ofstream node_labels;
  if (dataset.has_vertex_labels()) node_labels.open(directory / (name + "_node_labels.txt"));

  std::size_t offset = 0;
  for (std::size_t g = 0; g < dataset.size(); ++g) {
    const Graph& graph = dataset.graphs[g];
    const auto n = graph.adjacency.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      indicator << (g + 1) << '\n';
      if (node_labels.is_open()) node_labels << (*graph.vertex_labels)[static_cast<std::size_t>(i)] << '\n';
      for (Eigen::Index j = 0; j < n; ++j) {
        if (graph.adjacency(i, j) != 0.0) {
          edges << (offset + static_cast<std::size_t>(i) + 1) << ", " << (offset + static_cast<std::size_t>(j) + 1)
                << '\n';
        }
      }
    }
    labels << dataset.raw_class_values[static_cast<std::size_t>(dataset.class_labels[g])] << '\n';
    offset += static_cast<std::size_t>(n);
  }
  if (!edges || !indicator || !labels) throw DataError("failed writing dataset to " + directory.string());
}

FeatureMatrix one_hot_features(const Dataset& dataset, std::size_t graph_index) {
  const Graph& g = dataset.graphs.at(graph_index);
  if (!g.vertex_labels) throw DataError("graph " + std::to_string(graph_index) + " has no vertex labels");
  return one_hot(*g.vertex_labels, dataset.label_alphabet, "vertex label");
}

std::vector<int> degree_alphabet(const Dataset& dataset) {
  std::vector<int> all;
  for (const auto& g : dataset.graphs) {
    auto d = g.degrees();
    all.insert(all.end(), d.begin(), d.end());
  }
  return sorted_unique(std::move(all));
}

FeatureMatrix degree_features(const Dataset& dataset, std::size_t graph_index, const std::vector<int>& alphabet) {
  return one_hot(dataset.graphs.at(graph_index).degrees(), alphabet, "vertex degree");
}

FeatureMatrix degree_features(const Dataset& dataset, std::size_t graph_index) {
  return degree_features(dataset, graph_index, degree_alphabet(dataset));
}

FeatureMatrix vertex_features(const Dataset& dataset, std::size_t graph_index) {
  return dataset.has_vertex_labels() ? one_hot_features(dataset, graph_index) : degree_features(dataset, graph_index);
}

std::vector<Diagnostic> validate_graph(const Graph& graph, bool raw) {
  std::vector<Diagnostic> out;
  const Matrix& a = graph.adjacency;
  if (a.rows() != a.cols()) {
    out.push_back({DiagnosticKind::NotSquare, "adjacency is " + std::to_string(a.rows()) + "x" +
                                                  std::to_string(a.cols())});
    return out;
  }
  const auto n = a.rows();
  bool asym = false, negative = false, nonfinite = false, diagonal = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = a(i, j);
      if (!std::isfinite(v)) {
        if (!nonfinite) out.push_back({DiagnosticKind::NonFinite, "non-finite entry at (" + std::to_string(i) + ", " +
                                                                      std::to_string(j) + ")"});
        nonfinite = true;
        continue;
      }
      if (v < 0.0 && !negative) {
        out.push_back({DiagnosticKind::Negative,
                       "negative entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")"});
        negative = true;
      }
      if (j > i && v != a(j, i) && !asym) {
        out.push_back({DiagnosticKind::Asymmetric,
                       "A(" + std::to_string(i) + ", " + std::to_string(j) + ") != A(" + std::to_string(j) + ", " +
                           std::to_string(i) + ")"});
        asym = true;
      }
      if (raw && i == j && v != 0.0 && !diagonal) {
        out.push_back({DiagnosticKind::NonzeroDiagonal, "nonzero diagonal at vertex " + std::to_string(i)});
        diagonal = true;
      }
    }
  }
  if (graph.vertex_labels && graph.vertex_labels->size() != static_cast<std::size_t>(n)) {
    out.push_back({DiagnosticKind::LabelLength, std::to_string(graph.vertex_labels->size()) + " labels for " +
                                                    std::to_string(n) + " vertices"});
  }
  return out;
}

}  // namespace qsgcnn
