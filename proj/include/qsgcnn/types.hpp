#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace qsgcnn {

// Row-major so that each vertex (or grid position) is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Flat parameter and gradient storage. A fixed base alignment keeps Eigen's
// vectorised reductions over slot views in the same order on every run.
using ParameterVector = std::vector<double, Eigen::aligned_allocator<double>>;

// Malformed or inconsistent input data (files, shapes, caches).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or solver failure.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsgcnn
