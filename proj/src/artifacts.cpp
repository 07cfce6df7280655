#include "qsgcnn/artifacts.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qsgcnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kCheckpointMagic{'Q', 'S', 'G', 'C', 'N', 'N', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw DataError(source + ": truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

json config_to_json(const NetworkConfig& c) {
  return {{"grid_size", c.grid_size},       {"input_channels", c.input_channels},
          {"graph_layers", c.graph_layers}, {"graph_channels", c.graph_channels},
          {"head", c.head},                 {"kernel", c.kernel},
          {"classes", c.classes},           {"dropout", c.dropout},
          {"activation", c.activation == Activation::Relu ? "relu" : "identity"}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.grid_size = j.at("grid_size").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  c.graph_layers = j.at("graph_layers").get<int>();
  c.graph_channels = j.at("graph_channels").get<int>();
  c.head = j.at("head").get<std::string>();
  c.kernel = j.at("kernel").get<int>();
  c.classes = j.at("classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.activation = j.at("activation").get<std::string>() == "relu" ? Activation::Relu : Activation::Identity;
  return c;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_le<double>(out, m.data()[i]);
}

Matrix read_matrix(std::istream& in, const std::string& source) {
  const auto rows = get_le<std::uint64_t>(in, source);
  const auto cols = get_le<std::uint64_t>(in, source);
  if (rows > (1u << 24) || cols > (1u << 24)) throw DataError(source + ": implausible matrix shape");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_le<double>(in, source);
  return m;
}

void save_matrix(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix(out, m);
  if (!out) throw DataError("failed writing " + path.string());
}

Matrix load_matrix(const fs::path& path) {
  auto in = open_in(path);
  return read_matrix(in, path.string());
}

void save_grid(const fs::path& path, const AlignedGrid& grid) {
  auto out = open_out(path);
  write_matrix(out, grid.features);
  write_matrix(out, grid.adjacency);
  if (!out) throw DataError("failed writing " + path.string());
}

AlignedGrid load_grid(const fs::path& path, std::size_t graph_index) {
  auto in = open_in(path);
  AlignedGrid grid;
  grid.graph_index = graph_index;
  grid.features = read_matrix(in, path.string());
  grid.adjacency = read_matrix(in, path.string());
  if (grid.adjacency.rows() != grid.adjacency.cols() || grid.adjacency.rows() != grid.features.rows()) {
    throw DataError(path.string() + ": inconsistent grid shapes");
  }
  return grid;
}

void save_checkpoint(const fs::path& path, const Network& network, std::span<const double> params,
                     std::uint64_t seed, int fold) {
  const ParameterLayout& layout = network.layout();
  if (params.size() != layout.total()) throw std::invalid_argument("checkpoint: parameter count mismatch");
  json header = {{"architecture", config_to_json(network.config())},
                 {"seed", seed},
                 {"fold", fold},
                 {"tool_version", kToolVersion}};
  for (const auto& slot : layout.slots()) header["tensors"].push_back(slot.name);
  const std::string text = header.dump();

  auto out = open_out(path);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_le<std::uint64_t>(out, layout.slots().size());
  for (std::size_t i = 0; i < layout.slots().size(); ++i) write_matrix(out, layout.view(params, i));
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  auto in = open_in(path);
  const std::string source = path.string();
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw DataError(source + ": not a checkpoint file");
  }
  const auto version = get_le<std::uint32_t>(in, source);
  if (version != kCheckpointVersion) throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  const auto header_size = get_le<std::uint64_t>(in, source);
  if (header_size > (1u << 24)) throw DataError(source + ": implausible header size");
  std::string text(header_size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_size))) throw DataError(source + ": truncated header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    ck.config = config_from_json(header.at("architecture"));
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.fold = header.at("fold").get<int>();
  } catch (const json::exception& e) {
    throw DataError(source + ": bad checkpoint header: " + e.what());
  }
  const Network network(ck.config);
  const ParameterLayout& layout = network.layout();
  const auto count = get_le<std::uint64_t>(in, source);
  if (count != layout.slots().size()) throw DataError(source + ": tensor count does not match architecture");
  ck.params.resize(layout.total());
  for (std::size_t i = 0; i < count; ++i) {
    const Matrix m = read_matrix(in, source);
    const TensorSlot& slot = layout.slot(i);
    if (m.rows() != slot.rows || m.cols() != slot.cols) {
      throw DataError(source + ": tensor " + slot.name + " has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
    }
    std::copy(m.data(), m.data() + m.size(), ck.params.begin() + static_cast<std::ptrdiff_t>(slot.offset));
  }
  return ck;
}

void write_metrics(std::ostream& out, const CrossValidationResult& result) {
  for (const auto& f : result.folds) {
    out << (f.fold + 1) << ',' << format_double(f.accuracy) << ',' << format_double(f.final_loss) << ',' << f.epochs
        << '\n';
  }
  out << format_double(result.mean_accuracy) << ',' << format_double(result.standard_error) << '\n';
}

void save_metrics(const fs::path& path, const CrossValidationResult& result) {
  auto out = open_out(path);
  write_metrics(out, result);
  if (!out) throw DataError("failed writing " + path.string());
}

MetricsFile load_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  MetricsFile file;
  std::string line;
  bool summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    try {
      if (fields.size() == 4 && !summary) {
        file.folds.push_back({std::stoi(fields[0]), std::stod(fields[1]), std::stod(fields[2]), std::stoi(fields[3])});
      } else if (fields.size() == 2 && !summary) {
        file.mean = std::stod(fields[0]);
        file.standard_error = std::stod(fields[1]);
        summary = true;
      } else {
        throw DataError(path.string() + ": unexpected line '" + line + "'");
      }
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": unparseable line '" + line + "'");
    }
  }
  if (!summary) throw DataError(path.string() + ": missing summary line");
  return file;
}

}  // namespace qsgcnn
