#include "qsgcnn/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qsgcnn {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Among candidate rows tied on distance, pick one by coordinates so the choice
// depends only on the point multiset and the seed.
Eigen::Index pick_tied(const Matrix& points, std::vector<Eigen::Index> candidates, std::mt19937_64& rng) {
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      if (points(a, k) != points(b, k)) return points(a, k) < points(b, k);
    }
    return a < b;
  };
  auto same = [&](Eigen::Index a, Eigen::Index b) { return points.row(a) == points.row(b); };
  std::sort(candidates.begin(), candidates.end(), less);
  candidates.erase(std::unique(candidates.begin(), candidates.end(), same), candidates.end());
  if (candidates.size() == 1) return candidates.front();
  std::uniform_int_distribution<std::size_t> dist(0, candidates.size() - 1);
  return candidates[dist(rng)];
}

Matrix farthest_point_seeds(const Matrix& points, int count, std::mt19937_64& rng) {
  const auto n = points.rows();
  Matrix seeds(count, points.cols());
  const Eigen::RowVectorXd mean = points.colwise().mean();

  std::vector<double> mind(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) mind[static_cast<std::size_t>(i)] = (points.row(i) - mean).squaredNorm();
  auto select = [&](bool nearest) {
    const double best = nearest ? *std::min_element(mind.begin(), mind.end())
                                : *std::max_element(mind.begin(), mind.end());
    std::vector<Eigen::Index> tied;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mind[static_cast<std::size_t>(i)] == best) tied.push_back(i);
    }
    return pick_tied(points, std::move(tied), rng);
  };

  Eigen::Index chosen = select(true);
  for (int c = 0; c < count; ++c) {
    if (c > 0) chosen = select(false);
    seeds.row(c) = points.row(chosen);
    if (c == 0) std::fill(mind.begin(), mind.end(), std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) {
      mind[static_cast<std::size_t>(i)] = std::min(mind[static_cast<std::size_t>(i)], squared_distance(points, i, seeds, c));
    }
  }
  return seeds;
}

int count_duplicates(const Matrix& centroids) {
  int dup = 0;
  for (Eigen::Index j = 1; j < centroids.rows(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      if (centroids.row(j) == centroids.row(k)) {
        ++dup;
        break;
      }
    }
  }
  return dup;
}

}  // namespace

PrototypeSet kmeans_prototypes(const Matrix& points, int count, std::uint64_t seed, int max_iter, double tol) {
  if (count < 1) throw std::invalid_argument("prototype count must be >= 1");
  if (points.rows() < 1) throw std::invalid_argument("k-means needs at least one point");
  if (!points.allFinite()) throw NumericError("k-means input has non-finite values");
  const auto n = points.rows();
  const auto dims = points.cols();

  std::mt19937_64 rng(seed);
  PrototypeSet out;
  out.depth = static_cast<int>(dims);
  out.centroids = farthest_point_seeds(points, count, rng);

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  Matrix sums(count, dims);
  std::vector<Eigen::Index> members(static_cast<std::size_t>(count));
  for (int it = 0; it < max_iter; ++it) {
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int j = 0; j < count; ++j) {
        const double d = squared_distance(points, i, out.centroids, j);
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      assign[static_cast<std::size_t>(i)] = arg;
      objective += best;
    }
    out.objective_history.push_back(objective);
    out.iterations = it + 1;

    sums.setZero();
    std::fill(members.begin(), members.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int j = assign[static_cast<std::size_t>(i)];
      sums.row(j) += points.row(i);
      ++members[static_cast<std::size_t>(j)];
    }
    Matrix updated = out.centroids;
    for (int j = 0; j < count; ++j) {
      if (members[static_cast<std::size_t>(j)] > 0) {
        updated.row(j) = sums.row(j) / static_cast<double>(members[static_cast<std::size_t>(j)]);
      }
    }
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int j = 0; j < count; ++j) {
      if (members[static_cast<std::size_t>(j)] > 0) continue;
      double far = 0.0;
      Eigen::Index arg = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        const double d = squared_distance(points, i, updated, assign[static_cast<std::size_t>(i)]);
        if (d > far) {
          far = d;
          arg = i;
        }
      }
      // No point sits away from its centroid: keep the (duplicate) centre.
      if (arg < 0) continue;
      used[static_cast<std::size_t>(arg)] = true;
      updated.row(j) = points.row(arg);
    }

    const double movement = (updated - out.centroids).rowwise().norm().maxCoeff();
    out.centroids = std::move(updated);
    if (movement < tol) break;
  }
  out.duplicate_centroids = count_duplicates(out.centroids);
  return out;
}

Matrix affinity_matrix(const Matrix& vertex_reps, const PrototypeSet& prototypes) {
  if (vertex_reps.cols() != prototypes.centroids.cols()) {
    throw std::invalid_argument("representation depth " + std::to_string(vertex_reps.cols()) +
                                " does not match prototype depth " + std::to_string(prototypes.centroids.cols()));
  }
  Matrix out(vertex_reps.rows(), prototypes.centroids.rows());
  for (Eigen::Index i = 0; i < vertex_reps.rows(); ++i) {
    for (Eigen::Index j = 0; j < prototypes.centroids.rows(); ++j) {
      out(i, j) = (vertex_reps.row(i) - prototypes.centroids.row(j)).norm();
    }
  }
  return out;
}

Matrix CorrespondenceMatrix::dense() const {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(prototype_of.size()), prototypes);
  for (std::size_t i = 0; i < prototype_of.size(); ++i) c(static_cast<Eigen::Index>(i), prototype_of[i]) = 1.0;
  return c;
}

CorrespondenceMatrix correspondence_matrix(const Matrix& affinity) {
  if (affinity.cols() == 0) throw std::invalid_argument("affinity matrix has no prototype columns");
  if (affinity.hasNaN()) throw NumericError("affinity matrix contains NaN");
  CorrespondenceMatrix c;
  c.prototypes = static_cast<int>(affinity.cols());
  c.prototype_of.resize(static_cast<std::size_t>(affinity.rows()));
  for (Eigen::Index i = 0; i < affinity.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < affinity.cols(); ++j) {
      if (affinity(i, j) < affinity(i, arg)) arg = j;
    }
    c.prototype_of[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return c;
}

std::vector<int> prototype_order(const PrototypeSet& prototypes) {
  const Matrix& mu = prototypes.centroids;
  const auto m = mu.rows();
  const double depth = static_cast<double>(prototypes.depth > 0 ? prototypes.depth : mu.cols());
  std::vector<double> degree(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) {
      degree[static_cast<std::size_t>(j)] += std::exp(-(mu.row(j) - mu.row(k)).norm() / depth);
    }
  }
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    return degree[static_cast<std::size_t>(a)] > degree[static_cast<std::size_t>(b)];
  });
  return perm;
}

void apply_order(PrototypeSet& prototypes, const std::vector<int>& perm) {
  if (perm.size() != static_cast<std::size_t>(prototypes.centroids.rows())) {
    throw std::invalid_argument("permutation size does not match prototype count");
  }
  Matrix reordered(prototypes.centroids.rows(), prototypes.centroids.cols());
  for (std::size_t r = 0; r < perm.size(); ++r) {
    reordered.row(static_cast<Eigen::Index>(r)) = prototypes.centroids.row(perm[r]);
  }
  prototypes.centroids = std::move(reordered);
  prototypes.order_applied = true;
}

GridLevel aligned_grid_level(const FeatureMatrix& features, const Matrix& adjacency, const CorrespondenceMatrix& c) {
  const auto n = static_cast<Eigen::Index>(c.prototype_of.size());
  if (features.rows() != n || adjacency.rows() != n || adjacency.cols() != n) {
    throw std::invalid_argument("correspondence covers " + std::to_string(n) + " vertices but features have " +
                                std::to_string(features.rows()) + " rows and adjacency is " +
                                std::to_string(adjacency.rows()) + "x" + std::to_string(adjacency.cols()));
  }
  GridLevel out;
  out.features = Matrix::Zero(c.prototypes, features.cols());
  out.adjacency = Matrix::Zero(c.prototypes, c.prototypes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int pi = c.prototype_of[static_cast<std::size_t>(i)];
    out.features.row(pi) += features.row(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      out.adjacency(pi, c.prototype_of[static_cast<std::size_t>(j)]) += adjacency(i, j);
    }
  }
  return out;
}

AlignedGrid aligned_grid(std::size_t graph_index, const Graph& graph, const Matrix& db_reps,
                         const std::vector<PrototypeSet>& prototypes_per_level, const FeatureMatrix& features) {
  if (prototypes_per_level.empty()) throw std::invalid_argument("no prototype levels");
  const int levels = static_cast<int>(prototypes_per_level.size());
  const int count = prototypes_per_level.front().count();
  for (int k = 0; k < levels; ++k) {
    const auto& set = prototypes_per_level[static_cast<std::size_t>(k)];
    if (set.count() != count) throw std::invalid_argument("inconsistent prototype count across levels");
    if (set.centroids.cols() != k + 1) throw std::invalid_argument("prototype level depths must be 1..L");
  }
  if (db_reps.cols() < levels) throw std::invalid_argument("DB representations shallower than the level count");

  AlignedGrid grid;
  grid.graph_index = graph_index;
  grid.features = Matrix::Zero(count, features.cols());
  grid.adjacency = Matrix::Zero(count, count);
  for (int k = 1; k <= levels; ++k) {
    const Matrix reps = db_reps.leftCols(k);
    const auto c = correspondence_matrix(affinity_matrix(reps, prototypes_per_level[static_cast<std::size_t>(k - 1)]));
    const GridLevel level = aligned_grid_level(features, graph.adjacency, c);
    grid.features += level.features;
    grid.adjacency += level.adjacency;
  }
  grid.features /= static_cast<double>(levels);
  grid.adjacency /= static_cast<double>(levels);
  return grid;
}

AlignedGrid aligned_grid(std::size_t graph_index, const Dataset& dataset,
                         const std::vector<PrototypeSet>& prototypes_per_level, const FeatureMatrix& features) {
  const Graph& graph = dataset.graphs.at(graph_index);
  const int levels = static_cast<int>(prototypes_per_level.size());
  return aligned_grid(graph_index, graph, graph_db_representations(graph, levels), prototypes_per_level, features);
}

std::vector<PrototypeSet> discover_prototypes(const DatasetDBRepresentations& db_reps, int count,
                                              std::uint64_t seed, const KMeansOptions& options,
                                              const std::optional<std::vector<std::size_t>>& rows) {
  const auto levels = static_cast<int>(db_reps.values.cols());
  Matrix points;
  if (rows) {
    points.resize(static_cast<Eigen::Index>(rows->size()), levels);
    for (std::size_t r = 0; r < rows->size(); ++r) {
      points.row(static_cast<Eigen::Index>(r)) = db_reps.values.row(static_cast<Eigen::Index>((*rows)[r]));
    }
  } else {
    points = db_reps.values;
  }
  std::vector<PrototypeSet> out;
  out.reserve(static_cast<std::size_t>(levels));
  for (int k = 1; k <= levels; ++k) {
    out.push_back(kmeans_prototypes(points.leftCols(k), count, seed, options.max_iter, options.tol));
  }
  const std::vector<int> perm = prototype_order(out.back());
  for (auto& level : out) apply_order(level, perm);
  return out;
}

void write_prototypes(const std::filesystem::path& path, const std::vector<PrototypeSet>& levels,
                      std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[32];
  out << "# qsgcnn prototypes v1: per level a header 'K M L seed' then M rows\n";
  for (const auto& level : levels) {
    out << level.depth << ' ' << level.count() << ' ' << levels.size() << ' ' << seed << '\n';
    for (Eigen::Index j = 0; j < level.centroids.rows(); ++j) {
      for (Eigen::Index k = 0; k < level.centroids.cols(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", level.centroids(j, k));
        out << (k ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

PrototypeFile read_prototypes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  PrototypeFile file;
  std::string line;
  std::size_t expected_levels = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      if (!line.empty() && line.front() != '#') return true;
    }
    return false;
  };
  while (next_line()) {
    std::istringstream header(line);
    int depth = 0, count = 0;
    std::size_t levels = 0;
    std::uint64_t seed = 0;
    if (!(header >> depth >> count >> levels >> seed) || depth < 1 || count < 1) {
      throw DataError(path.filename().string() + ": malformed level header '" + line + "'");
    }
    if (expected_levels == 0) expected_levels = levels;
    if (levels != expected_levels) throw DataError(path.filename().string() + ": inconsistent level count");
    file.seed = seed;
    PrototypeSet set;
    set.depth = depth;
    set.order_applied = true;
    set.centroids.resize(count, depth);
    for (int j = 0; j < count; ++j) {
      if (!next_line()) throw DataError(path.filename().string() + ": truncated prototype block");
      std::istringstream row(line);
      for (int k = 0; k < depth; ++k) {
        std::string token;
        if (!(row >> token)) throw DataError(path.filename().string() + ": short centroid row");
        char* end = nullptr;
        set.centroids(j, k) = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) {
          throw DataError(path.filename().string() + ": bad number '" + token + "'");
        }
      }
    }
    file.levels.push_back(std::move(set));
  }
  if (file.levels.size() != expected_levels) {
    throw DataError(path.filename().string() + ": expected " + std::to_string(expected_levels) + " levels, found " +
                    std::to_string(file.levels.size()));
  }
  return file;
}

}  // namespace qsgcnn
