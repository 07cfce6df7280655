#include "qsgcnn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qsgcnn/artifacts.hpp"
#include "qsgcnn/depth_repr.hpp"
#include "qsgcnn/pipeline.hpp"
#include "qsgcnn/quantum_walk.hpp"

namespace qsgcnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kPrototypes = "prototypes.txt";
constexpr const char* kMetrics = "metrics.csv";

struct Options {
  std::string dataset;
  std::string name;
  std::string out = "runs";
  TrainConfig config;
  bool inductive = false;
  int threads = 1;
  bool verbose = false;
  int graph = -1;
  int fold = 0;
  bool check = false;
  std::vector<std::string> metrics_files;
};

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::string fold_dir(int fold) {
  std::ostringstream s;
  s << "fold_" << std::setw(2) << std::setfill('0') << fold + 1;
  return s.str();
}

std::string graph_file(std::size_t g, const char* ext) {
  std::ostringstream s;
  s << 'g' << std::setw(5) << std::setfill('0') << g << ext;
  return s.str();
}

// Dataset directories are named after the file prefix (MUTAG/MUTAG_A.txt).
// A directory holding a single *_A.txt under another prefix also works.
std::pair<Dataset, fs::path> load_dataset_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--dataset is required");
  fs::path path = fs::path(dir).lexically_normal();
  if (path.filename().empty()) path = path.parent_path();
  std::string prefix = path.filename().string();
  if (fs::is_directory(path) && !fs::exists(path / (prefix + "_A.txt"))) {
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(path)) {
      const std::string file = entry.path().filename().string();
      if (file.size() > 6 && file.ends_with("_A.txt")) found.push_back(file.substr(0, file.size() - 6));
    }
    if (found.size() == 1) prefix = found.front();
  }
  return {load_tu_dataset(path, prefix), fs::absolute(path)};
}

// Identity of a preprocessing run; a cache is reusable only if all fields match.
json preprocess_key(const Options& o, const Dataset& ds) {
  json key = {{"dataset", ds.name},
              {"graphs", ds.size()},
              {"prototypes", o.config.prototypes},
              {"depth", o.config.depth},
              {"seed", o.config.seed},
              {"inductive", o.inductive}};
  if (o.inductive) key["folds"] = o.config.folds;
  return key;
}

json train_json(const TrainConfig& c) {
  return {{"prototypes", c.prototypes}, {"layers", c.graph_layers}, {"channels", c.graph_channels},
          {"depth", c.depth},           {"lr", c.learning_rate},    {"dropout", c.dropout},
          {"epochs", c.epochs},         {"batch", c.batch_size},    {"folds", c.folds},
          {"seed", c.seed},             {"inductive", !c.transductive_prototypes},
          {"head", c.head},             {"kernel", c.kernel}};
}

fs::path run_root(const Options& o, const Dataset& ds) {
  return fs::path(o.out) / (o.name.empty() ? ds.name : o.name);
}

json read_manifest(const fs::path& root) {
  std::ifstream in(root / kManifest);
  if (!in) throw DataError("no manifest in " + root.string() + "; run preprocess first");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError((root / kManifest).string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& root, const json& manifest) {
  std::ofstream out(root / kManifest);
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + (root / kManifest).string());
}

// Unit directories: the run root for transductive runs, one per fold otherwise.
std::vector<fs::path> unit_dirs(const fs::path& root, const json& key) {
  if (!key.at("inductive").get<bool>()) return {root};
  std::vector<fs::path> dirs;
  for (int f = 0; f < key.at("folds").get<int>(); ++f) dirs.push_back(root / fold_dir(f));
  return dirs;
}

void write_unit(const fs::path& dir, const Preprocessed& pre, std::uint64_t seed) {
  fs::create_directories(dir / "grids");
  fs::create_directories(dir / "q");
  write_prototypes(dir / kPrototypes, pre.prototypes, seed);
  for (std::size_t g = 0; g < pre.grids.size(); ++g) {
    save_grid(dir / "grids" / graph_file(g, ".grid"), pre.grids[g]);
    save_matrix(dir / "q" / graph_file(g, ".q"), pre.mixing[g]);
  }
}

json preprocess_to_disk(const Options& o, const Dataset& ds, const fs::path& dataset_path, std::ostream& out) {
  const fs::path root = run_root(o, ds);
  const json key = preprocess_key(o, ds);
  PreprocessConfig pc;
  pc.prototypes = o.config.prototypes;
  pc.depth = o.config.depth;
  pc.seed = o.config.seed;

  const std::vector<fs::path> dirs = unit_dirs(root, key);
  int channels = 0;
  if (o.inductive) {
    const FoldSplit split = kfold_split(ds.class_labels, o.config.folds, o.config.seed);
    for (std::size_t f = 0; f < split.folds.size(); ++f) {
      const Preprocessed pre = preprocess(ds, pc, split.folds[f].train);
      write_unit(dirs[f], pre, pc.seed);
      channels = pre.feature_channels;
    }
  } else {
    const Preprocessed pre = preprocess(ds, pc);
    write_unit(root, pre, pc.seed);
    channels = pre.feature_channels;
  }

  json artifacts = {{"prototypes", json::array()}, {"grids", json::array()}, {"q", json::array()}};
  for (const auto& d : dirs) {
    artifacts["prototypes"].push_back((d / kPrototypes).string());
    artifacts["grids"].push_back((d / "grids").string());
    artifacts["q"].push_back((d / "q").string());
  }
  const std::string now = timestamp();
  const json manifest = {{"tool_version", kToolVersion},
                         {"dataset", {{"name", ds.name}, {"path", dataset_path.string()}}},
                         {"preprocess", key},
                         {"feature_channels", channels},
                         {"classes", ds.num_classes()},
                         {"artifacts", artifacts},
                         {"created", now},
                         {"updated", now}};
  write_manifest(root, manifest);
  out << "preprocessed " << ds.size() << " graphs into " << root.string() << " (M=" << o.config.prototypes
      << ", L=" << o.config.depth << ", " << channels << " feature channels"
      << (o.inductive ? ", per-fold prototypes" : "") << ")\n";
  return manifest;
}

// Refuses a cache produced with different preprocessing settings.
void check_cache(const json& manifest, const json& key, const fs::path& root) {
  const json& cached = manifest.at("preprocess");
  std::vector<std::string> diffs;
  for (const auto& [field, want] : key.items()) {
    if (!cached.contains(field)) {
      diffs.push_back(field + " missing from cache");
    } else if (cached.at(field) != want) {
      diffs.push_back(field + " " + cached.at(field).dump() + " cached, " + want.dump() + " requested");
    }
  }
  if (!diffs.empty()) {
    std::string msg = "stale cache in " + root.string() + ": ";
    for (std::size_t i = 0; i < diffs.size(); ++i) msg += (i ? "; " : "") + diffs[i];
    throw DataError(msg + " (re-run preprocess or choose another --name)");
  }
}

std::vector<GraphSample> load_unit(const fs::path& dir, const Dataset& ds, int prototypes, int channels) {
  std::vector<GraphSample> samples;
  samples.reserve(ds.size());
  for (std::size_t g = 0; g < ds.size(); ++g) {
    const AlignedGrid grid = load_grid(dir / "grids" / graph_file(g, ".grid"), g);
    Matrix q = load_matrix(dir / "q" / graph_file(g, ".q"));
    if (grid.features.rows() != prototypes || grid.features.cols() != channels || q.rows() != prototypes ||
        q.cols() != prototypes) {
      std::ostringstream msg;
      msg << "stale cache: graph " << g << " grid is " << grid.features.rows() << "x" << grid.features.cols()
          << " with Q " << q.rows() << "x" << q.cols() << ", expected " << prototypes << "x" << channels;
      throw DataError(msg.str());
    }
    samples.push_back({std::move(q), grid.features, ds.class_labels[g]});
  }
  return samples;
}

struct Cache {
  json manifest;
  fs::path root;
  std::vector<std::vector<GraphSample>> units;
  int channels = 0;
};

Cache open_cache(const Options& o, const Dataset& ds, const fs::path& dataset_path, std::ostream& out) {
  Cache cache;
  cache.root = run_root(o, ds);
  const json key = preprocess_key(o, ds);
  if (fs::exists(cache.root / kManifest)) {
    cache.manifest = read_manifest(cache.root);
    check_cache(cache.manifest, key, cache.root);
  } else {
    out << "no cached artifacts in " << cache.root.string() << "; preprocessing\n";
    cache.manifest = preprocess_to_disk(o, ds, dataset_path, out);
  }
  cache.channels = cache.manifest.at("feature_channels").get<int>();
  for (const auto& dir : unit_dirs(cache.root, key)) {
    cache.units.push_back(load_unit(dir, ds, o.config.prototypes, cache.channels));
  }
  return cache;
}

void print_confusion(std::ostream& out, const std::vector<std::vector<int>>& confusion, const Dataset& ds) {
  out << "  confusion (rows true, columns predicted):\n";
  for (std::size_t t = 0; t < confusion.size(); ++t) {
    out << "    " << std::setw(4) << ds.raw_class_values.at(t) << ":";
    for (int v : confusion[t]) out << ' ' << std::setw(4) << v;
    out << '\n';
  }
}

int cmd_preprocess(const Options& o, std::ostream& out) {
  o.config.validate();
  const auto [ds, path] = load_dataset_dir(o.dataset);
  preprocess_to_disk(o, ds, path, out);
  return kSuccess;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  o.config.validate();
  const auto [ds, path] = load_dataset_dir(o.dataset);
  Cache cache = open_cache(o, ds, path, out);
  const FoldSplit split = kfold_split(ds.class_labels, o.config.folds, o.config.seed);
  for (const auto& w : split.warnings) err << "qsgcnn: warning: " << w << '\n';

  CrossValidationOptions cv;
  cv.threads = o.threads;
  if (o.verbose) {
    cv.progress = [&err](int fold, int epoch, double loss) {
      if (epoch % 10 == 0) err << "fold " << fold + 1 << " epoch " << epoch << " loss " << loss << '\n';
    };
  }
  const SampleSource source = [&](int fold) -> const std::vector<GraphSample>& {
    return cache.units.size() == 1 ? cache.units.front() : cache.units.at(static_cast<std::size_t>(fold));
  };
  const CrossValidationResult result =
      cross_validate(source, split, cache.channels, ds.num_classes(), o.config, cv);

  const Network network(o.config.network(cache.channels, ds.num_classes()));
  json checkpoints = json::array();
  for (const auto& f : result.folds) {
    const fs::path file = cache.root / "checkpoints" / (fold_dir(f.fold) + ".ckpt");
    save_checkpoint(file, network, f.params, derive_seed(o.config.seed, 100 + static_cast<std::uint64_t>(f.fold)),
                    f.fold);
    checkpoints.push_back(file.string());
    out << "fold " << f.fold + 1 << ": accuracy " << std::fixed << std::setprecision(4) << f.accuracy
        << "  final loss " << f.final_loss << std::defaultfloat << '\n';
  }
  save_metrics(cache.root / kMetrics, result);

  cache.manifest["train"] = train_json(o.config);
  cache.manifest["artifacts"]["checkpoints"] = checkpoints;
  cache.manifest["artifacts"]["metrics"] = (cache.root / kMetrics).string();
  cache.manifest["updated"] = timestamp();
  write_manifest(cache.root, cache.manifest);

  out << "mean accuracy " << std::fixed << std::setprecision(4) << result.mean_accuracy << " +/- "
      << result.standard_error << " (standard error over " << result.folds.size() << " folds)\n"
      << std::defaultfloat << "metrics written to " << (cache.root / kMetrics).string() << '\n';
  return kSuccess;
}

// Rebuilds the options a previous train run used, from its manifest.
Options options_from_manifest(const json& manifest, Options o) {
  const json& t = manifest.at("train");
  o.config.prototypes = t.at("prototypes");
  o.config.graph_layers = t.at("layers");
  o.config.graph_channels = t.at("channels");
  o.config.depth = t.at("depth");
  o.config.learning_rate = t.at("lr");
  o.config.dropout = t.at("dropout");
  o.config.epochs = t.at("epochs");
  o.config.batch_size = t.at("batch");
  o.config.folds = t.at("folds");
  o.config.seed = t.at("seed");
  o.inductive = t.at("inductive");
  o.config.transductive_prototypes = !o.inductive;
  o.config.head = t.at("head").get<std::string>();
  o.config.kernel = t.at("kernel");
  return o;
}

json manifest_for(const Options& o) {
  if (o.name.empty() && o.dataset.empty()) throw UsageError("give --name (or --dataset) to locate the run");
  std::string name = o.name;
  if (name.empty()) name = fs::path(o.dataset).lexically_normal().filename().string();
  if (name.empty()) name = fs::path(o.dataset).lexically_normal().parent_path().filename().string();
  return read_manifest(fs::path(o.out) / name);
}

int cmd_evaluate(Options o, std::ostream& out) {
  const json manifest = manifest_for(o);
  if (!manifest.contains("train")) throw DataError("run has no trained checkpoints; run train first");
  if (o.dataset.empty()) o.dataset = manifest.at("dataset").at("path").get<std::string>();
  o = options_from_manifest(manifest, o);
  const auto [ds, path] = load_dataset_dir(o.dataset);
  const Cache cache = open_cache(o, ds, path, out);
  const FoldSplit split = kfold_split(ds.class_labels, o.config.folds, o.config.seed);

  const int folds = static_cast<int>(split.folds.size());
  if (o.fold < 0 || o.fold > folds) throw UsageError("--fold must be in 1.." + std::to_string(folds));
  std::vector<int> predicted, truth;
  std::vector<double> accuracies;
  for (int f = 0; f < folds; ++f) {
    if (o.fold != 0 && f != o.fold - 1) continue;
    const Checkpoint ck = load_checkpoint(cache.root / "checkpoints" / (fold_dir(f) + ".ckpt"));
    const Network network(ck.config);
    const auto& samples = cache.units.size() == 1 ? cache.units.front() : cache.units.at(static_cast<std::size_t>(f));
    std::vector<int> fold_pred, fold_truth;
    for (std::size_t i : split.folds[static_cast<std::size_t>(f)].test) {
      fold_pred.push_back(predict_class(network.predict(ck.params, samples[i].q, samples[i].x)));
      fold_truth.push_back(samples[i].label);
    }
    const Evaluation e = evaluate_predictions(fold_pred, fold_truth, ds.num_classes());
    accuracies.push_back(e.accuracy);
    predicted.insert(predicted.end(), fold_pred.begin(), fold_pred.end());
    truth.insert(truth.end(), fold_truth.begin(), fold_truth.end());
    out << "fold " << f + 1 << ": accuracy " << std::fixed << std::setprecision(4) << e.accuracy << std::defaultfloat
        << " (" << fold_truth.size() << " test graphs)\n";
  }
  const Evaluation pooled = evaluate_predictions(predicted, truth, ds.num_classes());
  const auto [mean, se] = mean_and_standard_error(accuracies);
  out << "mean fold accuracy " << std::fixed << std::setprecision(4) << mean << " +/- " << se
      << ", pooled accuracy " << pooled.accuracy << std::defaultfloat << '\n';
  print_confusion(out, pooled.confusion, ds);
  return kSuccess;
}

void print_matrix(std::ostream& out, const Matrix& m, const char* indent) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << indent;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << std::setw(9) << m(i, j);
    out << '\n';
  }
}

void print_row_sums(std::ostream& out, const Matrix& q) {
  const Vector sums = q.rowwise().sum();
  out << "  row sums: min " << sums.minCoeff() << ", max " << sums.maxCoeff() << '\n';
}

int cmd_inspect(Options o, std::ostream& out) {
  std::optional<json> manifest;
  const fs::path root = fs::path(o.out) / o.name;
  if (!o.name.empty() && fs::exists(root / kManifest)) manifest = read_manifest(root);
  if (o.dataset.empty()) {
    if (!manifest) throw UsageError("--dataset is required when no run is given via --name");
    o.dataset = manifest->at("dataset").at("path").get<std::string>();
  }
  const auto [ds, path] = load_dataset_dir(o.dataset);
  if (o.graph < 0 || static_cast<std::size_t>(o.graph) >= ds.size()) {
    throw UsageError("graph index " + std::to_string(o.graph) + " out of range 0.." + std::to_string(ds.size() - 1));
  }
  const auto gi = static_cast<std::size_t>(o.graph);
  const Graph& graph = ds.graphs[gi];
  const int depth = manifest ? manifest->at("preprocess").at("depth").get<int>() : o.config.depth;
  const std::vector<int> degree_list = graph.degrees();
  const Vector degrees = Eigen::Map<const Eigen::VectorXi>(degree_list.data(), static_cast<Eigen::Index>(degree_list.size())).cast<double>();
  const Eigen::Index n = static_cast<Eigen::Index>(graph.size());

  out << std::setprecision(6);
  out << "graph " << gi << " of " << ds.size() << " in " << ds.name << '\n';
  out << "  vertices " << n << ", edges " << graph.adjacency.sum() / 2.0 << ", class "
      << ds.raw_class_values.at(static_cast<std::size_t>(ds.class_labels[gi])) << '\n';
  if (n > 0) {
    out << "  degree min " << degrees.minCoeff() << ", max " << degrees.maxCoeff() << ", mean " << degrees.mean()
        << '\n';
  }
  if (graph.vertex_labels) {
    std::map<int, int> counts;
    for (int l : *graph.vertex_labels) ++counts[l];
    out << "  vertex labels:";
    for (const auto& [label, count] : counts) out << ' ' << label << 'x' << count;
    out << '\n';
  }

  const Matrix reps = graph_db_representations(graph, depth);
  out << "DB representations (depth " << depth << "):\n";
  for (int k = 0; k < depth; ++k) {
    out << "  K=" << std::setw(2) << k + 1 << "  min " << std::setw(9) << reps.col(k).minCoeff() << "  mean "
        << std::setw(9) << reps.col(k).mean() << "  max " << std::setw(9) << reps.col(k).maxCoeff() << '\n';
  }

  const Matrix q = average_mixing_matrix(graph.adjacency);
  out << "average mixing matrix of the graph:\n";
  if (n <= 12) {
    print_matrix(out, q, "  ");
  } else {
    out << "  diagonal:";
    for (Eigen::Index i = 0; i < n; ++i) out << ' ' << q(i, i);
    out << '\n';
  }
  print_row_sums(out, q);

  std::optional<Matrix> aligned_q;
  if (manifest) {
    const json& key = manifest->at("preprocess");
    const auto dirs = unit_dirs(root, key);
    if (o.fold < 0 || o.fold > static_cast<int>(dirs.size())) throw UsageError("--fold out of range");
    const fs::path dir = dirs.at(o.fold == 0 ? 0 : static_cast<std::size_t>(o.fold - 1));
    const PrototypeFile protos = read_prototypes(dir / kPrototypes);
    out << "prototype assignments (" << dir.string() << "):\n";
    for (std::size_t k = 0; k < protos.levels.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k + 1);
      const CorrespondenceMatrix c = correspondence_matrix(affinity_matrix(reps.leftCols(kk), protos.levels[k]));
      out << "  K=" << std::setw(2) << k + 1 << ':';
      for (int p : c.prototype_of) out << ' ' << p;
      out << '\n';
    }
    const AlignedGrid grid = load_grid(dir / "grids" / graph_file(gi, ".grid"), gi);
    aligned_q = load_matrix(dir / "q" / graph_file(gi, ".q"));
    out << "aligned grid: " << grid.features.rows() << "x" << grid.features.cols() << ", |X|_F "
        << grid.features.norm() << ", |A|_F " << grid.adjacency.norm() << ", sum(A) " << grid.adjacency.sum()
        << '\n';
    out << "aligned mixing matrix:\n";
    print_row_sums(out, *aligned_q);
  }

  if (!o.check) return kSuccess;
  const auto diagnostics = validate_graph(graph);
  for (const auto& d : diagnostics) out << "check: " << d.message << '\n';
  if (!diagnostics.empty()) throw DataError("graph " + std::to_string(gi) + " failed validation");
  std::vector<std::pair<std::string, const Matrix*>> mixing = {{"graph", &q}};
  if (aligned_q) mixing.emplace_back("aligned", &*aligned_q);
  for (const auto& [label, m] : mixing) {
    const MixingReport r = check_mixing_matrix(*m);
    if (!r.ok()) {
      std::ostringstream msg;
      msg << label << " mixing matrix not doubly stochastic: row error " << r.max_row_sum_error << ", column error "
          << r.max_col_sum_error << ", asymmetry " << r.max_asymmetry << ", entries [" << r.min_entry << ", "
          << r.max_entry << "]";
      throw NumericError(msg.str());
    }
  }
  out << "check: ok\n";
  return kSuccess;
}

int cmd_summarize(const Options& o, std::ostream& out) {
  std::vector<double> means;
  double fold_se = 0.0;
  out << std::fixed << std::setprecision(4);
  for (const auto& file : o.metrics_files) {
    const MetricsFile m = load_metrics(file);
    means.push_back(m.mean);
    fold_se += m.standard_error;
    out << file << ": mean " << m.mean << " +/- " << m.standard_error << " over " << m.folds.size() << " folds\n";
  }
  const auto [mean, se] = mean_and_standard_error(means);
  out << "repetitions " << means.size() << ": mean " << mean << ", standard error over repetitions " << se
      << ", mean fold-level standard error " << fold_se / static_cast<double>(means.size()) << '\n';
  return kSuccess;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "TU-format dataset directory (files <prefix>_A.txt, ...)");
  cmd->add_option("--name", o.name, "run id; artifacts go to <out>/<name>/ (default: dataset prefix)");
  cmd->add_option("--out", o.out, "artifact root directory")->capture_default_str();
}

void add_preprocess_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--prototypes", o.config.prototypes, "prototype count M (grid size)")->capture_default_str();
  cmd->add_option("--depth", o.config.depth, "DB representation depth L")->capture_default_str();
  cmd->add_option("--seed", o.config.seed, "seed for prototypes, folds and training")->capture_default_str();
  cmd->add_option("--folds", o.config.folds, "cross-validation folds")->capture_default_str();
  cmd->add_flag("--inductive", o.inductive, "discover prototypes from each fold's training graphs only");
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Quantum-walk spatial graph convolution: preprocess, train, evaluate, inspect."};
  app.name("qsgcnn");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CLI::App* pre = app.add_subcommand("preprocess", "align graphs to prototypes and cache grids and Q matrices");
  add_common(pre, o);
  add_preprocess_flags(pre, o);

  CLI::App* train = app.add_subcommand("train", "k-fold cross-validation on cached grids; writes metrics, checkpoints");
  add_common(train, o);
  add_preprocess_flags(train, o);
  train->add_option("--layers", o.config.graph_layers, "quantum convolution layers T")->capture_default_str();
  train->add_option("--channels", o.config.graph_channels, "channels per quantum convolution")->capture_default_str();
  train->add_option("--lr", o.config.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--dropout", o.config.dropout, "dropout before the classifier")->capture_default_str();
  train->add_option("--epochs", o.config.epochs, "epochs per fold")->capture_default_str();
  train->add_option("--batch", o.config.batch_size, "mini-batch size")->capture_default_str();
  train->add_option("--head", o.config.head, "1D head layers, e.g. C64-P2-C64-F64")->capture_default_str();
  train->add_option("--kernel", o.config.kernel, "1D convolution kernel width")->capture_default_str();
  train->add_option("--threads", o.threads, "folds trained concurrently (results do not depend on it)")
      ->capture_default_str();
  train->add_flag("--verbose", o.verbose, "print the loss every 10 epochs");

  CLI::App* eval = app.add_subcommand("evaluate", "score saved fold checkpoints on their test folds");
  add_common(eval, o);
  eval->add_option("--fold", o.fold, "only this fold (1-based)");

  CLI::App* inspect = app.add_subcommand("inspect", "report on one graph and its cached artifacts");
  add_common(inspect, o);
  inspect->add_option("--graph", o.graph, "graph index (0-based)")->required();
  inspect->add_option("--depth", o.config.depth, "DB depth when no run is given")->capture_default_str();
  inspect->add_option("--fold", o.fold, "fold whose prototypes to use for inductive runs (1-based)");
  inspect->add_flag("--check", o.check, "validate the graph and the doubly stochastic property of Q");

  CLI::App* summarize = app.add_subcommand("summarize", "mean and standard error across repeated runs");
  summarize->add_option("metrics", o.metrics_files, "metrics.csv files")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv{"qsgcnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  o.config.transductive_prototypes = !o.inductive;

  if (pre->parsed()) return cmd_preprocess(o, out);
  if (train->parsed()) return cmd_train(o, out, err);
  if (eval->parsed()) return cmd_evaluate(o, out);
  if (inspect->parsed()) return cmd_inspect(o, out);
  return cmd_summarize(o, out);
}

int fail(std::ostream& err, int code, const char* kind, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  err << "qsgcnn: error: " << kind << ": " << message << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const NumericError& e) {
    return fail(err, kNumericFailure, "numeric", e.what());
  } catch (const DataError& e) {
    return fail(err, kDataFailure, "data", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, kDataFailure, "data", e.what());
  } catch (const json::exception& e) {
    return fail(err, kDataFailure, "data", std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return fail(err, kUsage, "usage", e.what());
  } catch (const std::exception& e) {
    return fail(err, kDataFailure, "internal", e.what());
  }
}

}  // namespace qsgcnn::cli
