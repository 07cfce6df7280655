#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "qsgcnn/graph.hpp"

namespace qsgcnn::testing {

inline std::filesystem::path data_dir() { return QSGCNN_DATA_DIR; }

inline Graph edgeless(int n) { return Graph{Matrix::Zero(n, n), std::nullopt}; }

inline Graph complete(int n) {
  Matrix a = Matrix::Ones(n, n);
  a.diagonal().setZero();
  return Graph{a, std::nullopt};
}

inline Graph path(int n) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return Graph{a, std::nullopt};
}

inline Graph triangle() { return complete(3); }

inline Graph random_graph(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge(rng)) a(i, j) = a(j, i) = 1.0;
    }
  }
  return Graph{a, std::nullopt};
}

inline Graph random_labelled_graph(int n, double p, int labels, std::mt19937_64& rng) {
  Graph g = random_graph(n, p, rng);
  std::uniform_int_distribution<int> pick(0, labels - 1);
  g.vertex_labels.emplace();
  for (int i = 0; i < n; ++i) g.vertex_labels->push_back(pick(rng));
  return g;
}

inline std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

// Vertex i of `g` becomes vertex perm[i] of the result.
inline Graph permute(const Graph& g, const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Graph out{Matrix::Zero(n, n), std::nullopt};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out.adjacency(perm[i], perm[j]) = g.adjacency(i, j);
  }
  if (g.vertex_labels) {
    out.vertex_labels.emplace(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) (*out.vertex_labels)[perm[i]] = (*g.vertex_labels)[i];
  }
  return out;
}

inline Matrix permutation_matrix(const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(perm[i], i) = 1.0;
  return p;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("qsgcnn_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace qsgcnn::testing
