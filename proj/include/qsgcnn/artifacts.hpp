#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qsgcnn/alignment.hpp"
#include "qsgcnn/neural.hpp"
#include "qsgcnn/trainer.hpp"

namespace qsgcnn {

inline constexpr const char* kToolVersion = "1.0.0";

// Binary matrices: uint64 rows, uint64 cols, then rows*cols float64 values in
// row-major order, all little-endian.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in, const std::string& source);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

/// Grid file: the M x c feature matrix followed by the M x M adjacency.
void save_grid(const std::filesystem::path& path, const AlignedGrid& grid);
AlignedGrid load_grid(const std::filesystem::path& path, std::size_t graph_index = 0);

/// Checkpoint: magic "QSGCNNCK", uint32 version, uint64 header length, JSON
/// header (architecture, seed, fold, tensor names), uint64 tensor count, then
/// each tensor as a binary matrix.
struct Checkpoint {
  NetworkConfig config;
  std::uint64_t seed = 0;
  int fold = 0;
  ParameterVector params;
};

void save_checkpoint(const std::filesystem::path& path, const Network& network, std::span<const double> params,
                     std::uint64_t seed, int fold);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One line `fold,accuracy,loss_final,epochs` per fold (1-based fold), then
/// a summary line `mean,stderr`.
void write_metrics(std::ostream& out, const CrossValidationResult& result);
void save_metrics(const std::filesystem::path& path, const CrossValidationResult& result);

struct MetricsFile {
  struct Line {
    int fold = 0;
    double accuracy = 0.0;
    double final_loss = 0.0;
    int epochs = 0;
  };
  std::vector<Line> folds;
  double mean = 0.0;
  double standard_error = 0.0;
};

MetricsFile load_metrics(const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace qsgcnn
