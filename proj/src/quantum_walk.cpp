#include "qsgcnn/quantum_walk.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace qsgcnn {

SpectralDecomposition spectral_decomposition(const Matrix& hamiltonian, double group_tol) {
  if (hamiltonian.rows() != hamiltonian.cols()) throw std::invalid_argument("Hamiltonian must be square");
  if (!(group_tol > 0.0)) throw std::invalid_argument("group_tol must be positive");
  if (!hamiltonian.allFinite()) throw NumericError("Hamiltonian has non-finite entries");
  const auto n = hamiltonian.rows();
  SpectralDecomposition out;
  if (n == 0) return out;

  const double scale = std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
  if ((hamiltonian - hamiltonian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("Hamiltonian is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(hamiltonian), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericError("eigen-solver failed to converge");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  const double radius = std::max(std::abs(values(0)), std::abs(values(n - 1)));
  const double gap = group_tol * std::max(1.0, radius);

  Eigen::Index begin = 0;
  while (begin < n) {
    Eigen::Index end = begin + 1;
    while (end < n && values(end) - values(end - 1) <= gap) ++end;
    const Eigen::Index count = end - begin;
    const auto block = vectors.middleCols(begin, count);
    out.eigenvalues.push_back(values.segment(begin, count).mean());
    out.projectors.emplace_back(block * block.transpose());
    out.multiplicities.push_back(static_cast<int>(count));
    begin = end;
  }
  return out;
}

Matrix average_mixing_matrix(const SpectralDecomposition& spectrum) {
  if (spectrum.projectors.empty()) return Matrix(0, 0);
  const auto n = spectrum.projectors.front().rows();
  Matrix q = Matrix::Zero(n, n);
  for (const auto& p : spectrum.projectors) q += p.cwiseProduct(p);
  return q;
}

Matrix average_mixing_matrix(const Matrix& hamiltonian, double group_tol) {
  return average_mixing_matrix(spectral_decomposition(hamiltonian, group_tol));
}

Matrix cesaro_mixing_estimate(const Matrix& hamiltonian, double horizon, int steps, double group_tol) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (steps < 2) throw std::invalid_argument("steps must be at least 2");
  const SpectralDecomposition spectrum = spectral_decomposition(hamiltonian, group_tol);
  const auto n = hamiltonian.rows();
  Matrix acc = Matrix::Zero(n, n);
  if (n == 0) return acc;

  using Complex = std::complex<double>;
  using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<ComplexMatrix> projectors;
  projectors.reserve(spectrum.projectors.size());
  for (const auto& p : spectrum.projectors) projectors.emplace_back(p.cast<Complex>());

  const double h = horizon / static_cast<double>(steps - 1);
  ComplexMatrix u(n, n);
  for (int k = 0; k < steps; ++k) {
    const double t = h * k;
    u.setZero();
    for (std::size_t j = 0; j < projectors.size(); ++j) {
      u += std::polar(1.0, spectrum.eigenvalues[j] * t) * projectors[j];
    }
    // U(-t) is the entrywise conjugate of U(t) for real projectors.
    const double weight = (k == 0 || k == steps - 1) ? 0.5 : 1.0;
    acc += weight * u.cwiseAbs2();
  }
  return acc * (h / horizon);
}

MixingReport check_mixing_matrix(const Matrix& q) {
  MixingReport r;
  if (q.size() == 0) return r;
  r.max_row_sum_error = (q.rowwise().sum().array() - 1.0).abs().maxCoeff();
  r.max_col_sum_error = (q.colwise().sum().array() - 1.0).abs().maxCoeff();
  r.max_asymmetry = q.rows() == q.cols() ? (q - q.transpose()).cwiseAbs().maxCoeff()
                                         : std::numeric_limits<double>::infinity();
  r.min_entry = q.minCoeff();
  r.max_entry = q.maxCoeff();
  return r;
}

}  // namespace qsgcnn
