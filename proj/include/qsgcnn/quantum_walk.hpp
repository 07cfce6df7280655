#pragma once

#include <vector>

#include "qsgcnn/types.hpp"

namespace qsgcnn {

inline constexpr double kDefaultGroupTolerance = 1e-8;

/// H = sum_j eigenvalues[j] * projectors[j], one entry per distinct eigenvalue.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  std::vector<Matrix> projectors;
  std::vector<int> multiplicities;
};

/// Eigenvalues of H closer than group_tol * max(1, spectral radius) to their
/// sorted neighbour share one eigenspace. Throws std::invalid_argument for a
/// non-square or non-symmetric H, NumericError for non-finite entries or a
/// solver failure.
SpectralDecomposition spectral_decomposition(const Matrix& hamiltonian, double group_tol = kDefaultGroupTolerance);

/// Average mixing matrix of the continuous-time quantum walk with Hamiltonian
/// H: Q = sum_j P_j o P_j (entrywise square of each eigenprojector).
Matrix average_mixing_matrix(const Matrix& hamiltonian, double group_tol = kDefaultGroupTolerance);
Matrix average_mixing_matrix(const SpectralDecomposition& spectrum);

/// Time-averaged mixing matrix (1/T) * int_0^T U(t) o U(-t) dt by the
/// trapezoidal rule on `steps` uniform samples, U(t) = sum_j exp(i l_j t) P_j.
/// Independent numeric route to average_mixing_matrix; converges as O(1/T).
Matrix cesaro_mixing_estimate(const Matrix& hamiltonian, double horizon, int steps,
                              double group_tol = kDefaultGroupTolerance);

/// Worst-case deviations from the doubly stochastic / symmetric invariants.
struct MixingReport {
  double max_row_sum_error = 0.0;
  double max_col_sum_error = 0.0;
  double max_asymmetry = 0.0;
  double min_entry = 0.0;
  double max_entry = 0.0;

  bool ok(double tol = 1e-9) const {
    return max_row_sum_error <= tol && max_col_sum_error <= tol && max_asymmetry <= tol && min_entry >= -1e-12 &&
           max_entry <= 1.0 + 1e-12;
  }
};

MixingReport check_mixing_matrix(const Matrix& q);

}  // namespace qsgcnn
