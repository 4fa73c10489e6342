#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "lpmkl/error.hpp"

namespace lpmkl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

// =======================================================================
// KernelMatrix
// =======================================================================

/*
 * Dense n x n Gram matrix with a label. Immutable once built: the values
 * live behind a shared pointer so copies are cheap and safe to hand to
 * other threads.
 *
 * Construction enforces finiteness and symmetry. Asymmetry within
 * 1e-12 * max(1, |K_ij|) is removed by averaging K and K^T; anything larger
 * is rejected.
 */
class KernelMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-12;

  KernelMatrix(Matrix values, std::string name = "kernel") : name_(std::move(name)) {
    if (values.rows() != values.cols()) {
      throw ValidationError("kernel '" + name_ + "': matrix is " + std::to_string(values.rows()) + "x" +
                            std::to_string(values.cols()) + ", expected square");
    }
    if (values.rows() == 0) throw ValidationError("kernel '" + name_ + "': empty matrix");
    if (!detail::all_finite(values)) throw ValidationError("kernel '" + name_ + "': non-finite entry");
    const auto n = values.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double a = values(i, j);
        const double b = values(j, i);
        const double tol = kSymmetryTolerance * std::max({1.0, std::abs(a), std::abs(b)});
        if (std::abs(a - b) > tol) {
          throw ValidationError("kernel '" + name_ + "': asymmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
        }
        const double mid = 0.5 * (a + b);
        values(i, j) = mid;
        values(j, i) = mid;
      }
    }
    values_ = std::make_shared<const Matrix>(std::move(values));
  }

  std::size_t n() const { return static_cast<std::size_t>(values_->rows()); }
  const std::string& name() const { return name_; }
  const Matrix& values() const { return *values_; }
  double operator()(std::size_t i, std::size_t j) const {
    return (*values_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const double* row(std::size_t i) const { return values_->data() + i * n(); }

  KernelMatrix renamed(std::string name) const {
    KernelMatrix out = *this;
    out.name_ = std::move(name);
    return out;
  }

 private:
  std::shared_ptr<const Matrix> values_;
  std::string name_;
};

/// Rectangular block of kernel evaluations k(x_test, x_train), one row per
/// test point. Used for prediction.
struct KernelRows {
  Matrix values;  // n_test x n_train
  std::string name = "rows";

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// =======================================================================
// KernelStack
// =======================================================================

/*
 * Ordered collection of M >= 1 kernels over the same n samples with
 * unique names.
 */
class KernelStack {
 public:
  explicit KernelStack(std::vector<KernelMatrix> kernels) : kernels_(std::move(kernels)) {
    if (kernels_.empty()) throw ValidationError("kernel stack must contain at least one kernel");
    const std::size_t n = kernels_.front().n();
    std::set<std::string> names;
    for (const auto& k : kernels_) {
      if (k.n() != n) {
        throw ValidationError("kernel '" + k.name() + "' has n=" + std::to_string(k.n()) + ", stack expects n=" +
                              std::to_string(n));
      }
      if (!names.insert(k.name()).second) throw ValidationError("duplicate kernel name '" + k.name() + "'");
    }
  }

  std::size_t size() const { return kernels_.size(); }
  std::size_t n() const { return kernels_.front().n(); }
  const KernelMatrix& operator[](std::size_t m) const { return kernels_[m]; }
  auto begin() const { return kernels_.begin(); }
  auto end() const { return kernels_.end(); }

  /// sum_m weights[m] * K_m as a dense matrix.
  Matrix combined(const Vector& weights) const {
    if (static_cast<std::size_t>(weights.size()) != size()) {
      throw ValidationError("weight vector length does not match kernel count");
    }
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(n()));
    for (std::size_t m = 0; m < size(); ++m) {
      if (weights[static_cast<Eigen::Index>(m)] != 0.0) out += weights[static_cast<Eigen::Index>(m)] * kernels_[m].values();
    }
    return out;
  }

 private:
  std::vector<KernelMatrix> kernels_;
};

// =======================================================================
// Construction
// =======================================================================

/// Gram matrix of plain dot products between the rows of X.
inline KernelMatrix linear_kernel(const Matrix& X, std::string name = "linear") {
  if (X.rows() < 1 || X.cols() < 1) throw ValidationError("linear_kernel: X must be at least 1x1");
  if (!detail::all_finite(X)) throw ValidationError("linear_kernel: non-finite input");
  Matrix K = X * X.transpose();
  return KernelMatrix(std::move(K), std::move(name));
}

/// Gaussian kernel exp(-||x_i - x_j||^2 / two_sigma_sq).
inline KernelMatrix rbf_kernel(const Matrix& X, double two_sigma_sq, std::string name = "rbf") {
  if (!(two_sigma_sq > 0.0) || !std::isfinite(two_sigma_sq)) {
    throw ValidationError("rbf_kernel: bandwidth must be positive and finite");
  }
  if (X.rows() < 1 || X.cols() < 1) throw ValidationError("rbf_kernel: X must be at least 1x1");
  if (!detail::all_finite(X)) throw ValidationError("rbf_kernel: non-finite input");
  const auto n = X.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (X.row(i) - X.row(j)).squaredNorm();
      K(i, j) = K(j, i) = std::exp(-d2 / two_sigma_sq);
    }
  }
  return KernelMatrix(std::move(K), std::move(name));
}

/// Cross evaluations k(x_test_i, x_train_j) for the linear kernel.
inline KernelRows linear_kernel_rows(const Matrix& X_test, const Matrix& X_train, std::string name = "linear") {
  if (X_test.cols() != X_train.cols()) throw ValidationError("linear_kernel_rows: feature dimension mismatch");
  return KernelRows{X_test * X_train.transpose(), std::move(name)};
}

/// Cross evaluations k(x_test_i, x_train_j) for the Gaussian kernel.
inline KernelRows rbf_kernel_rows(const Matrix& X_test, const Matrix& X_train, double two_sigma_sq,
                                  std::string name = "rbf") {
  if (X_test.cols() != X_train.cols()) throw ValidationError("rbf_kernel_rows: feature dimension mismatch");
  if (!(two_sigma_sq > 0.0)) throw ValidationError("rbf_kernel_rows: bandwidth must be positive");
  Matrix R(X_test.rows(), X_train.rows());
  for (Eigen::Index i = 0; i < X_test.rows(); ++i) {
    for (Eigen::Index j = 0; j < X_train.rows(); ++j) {
      R(i, j) = std::exp(-(X_test.row(i) - X_train.row(j)).squaredNorm() / two_sigma_sq);
    }
  }
  return KernelRows{std::move(R), std::move(name)};
}

// =======================================================================
// Normalization, centering, alignment
// =======================================================================

/// Empirical feature-space variance (1/n) tr K - (1/n^2) sum_ij K_ij.
inline double multiplicative_denominator(const KernelMatrix& K) {
  const double n = static_cast<double>(K.n());
  return K.values().trace() / n - K.values().sum() / (n * n);
}

/// Rescale K so the data has unit variance in feature space.
inline KernelMatrix normalize_multiplicative(const KernelMatrix& K) {
  const double D = multiplicative_denominator(K);
  const double tol = 1e-12 * std::max(detail::max_abs(K.values()), std::numeric_limits<double>::min());
  if (!(D > tol)) {
    throw DegenerateKernelError("kernel '" + K.name() +
                                "': zero feature-space variance (all points coincide), cannot normalize");
  }
  return KernelMatrix(K.values() / D, K.name());
}

/// Project every point onto the unit sphere: K_ij / sqrt(K_ii K_jj).
inline KernelMatrix normalize_spherical(const KernelMatrix& K) {
  const auto n = static_cast<Eigen::Index>(K.n());
  const Matrix& v = K.values();
  Vector scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(v(i, i) > 0.0)) {
      throw ValidationError("kernel '" + K.name() + "': non-positive diagonal entry at index " + std::to_string(i));
    }
    scale[i] = 1.0 / std::sqrt(v(i, i));
  }
  Matrix out = scale.asDiagonal() * v * scale.asDiagonal();
  out.diagonal().setOnes();
  return KernelMatrix(std::move(out), K.name());
}

/// H K H with H = I - (1/n) 1 1^T.
inline KernelMatrix center(const KernelMatrix& K) {
  const Matrix& v = K.values();
  const Eigen::RowVectorXd col_mean = v.colwise().mean();
  const Vector row_mean = v.rowwise().mean();
  const double total = v.mean();
  Matrix out = v;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += total;
  return KernelMatrix(std::move(out), K.name());
}

/// Frobenius cosine <Ki, Kj>_F / (|Ki|_F |Kj|_F). Inputs are used as given;
/// callers center first when they want centered alignment.
inline double alignment(const KernelMatrix& Ki, const KernelMatrix& Kj) {
  if (Ki.n() != Kj.n()) throw ValidationError("alignment: kernels differ in size");
  const double ni = Ki.values().norm();
  const double nj = Kj.values().norm();
  if (!(ni > 0.0)) throw DegenerateKernelError("alignment: kernel '" + Ki.name() + "' has zero Frobenius norm");
  if (!(nj > 0.0)) throw DegenerateKernelError("alignment: kernel '" + Kj.name() + "' has zero Frobenius norm");
  const double a = Ki.values().cwiseProduct(Kj.values()).sum() / (ni * nj);
  return std::clamp(a, -1.0, 1.0);
}

/// Pairwise alignments of the centered kernels of a stack.
inline Matrix alignment_matrix(const KernelStack& stack) {
  const std::size_t M = stack.size();
  std::vector<KernelMatrix> centered;
  centered.reserve(M);
  for (const auto& k : stack) {
    KernelMatrix c = center(k);
    // Centering a constant kernel leaves round-off, not signal.
    if (!(c.values().norm() > 1e-12 * k.values().norm())) {
      throw DegenerateKernelError("alignment_matrix: kernel '" + k.name() + "' is zero after centering");
    }
    centered.push_back(std::move(c));
  }
  Matrix A = Matrix::Identity(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j) {
      const double a = alignment(centered[i], centered[j]);
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a;
      A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = a;
    }
  }
  return A;
}

/// Smallest eigenvalue >= -rel_tol * trace. Opt-in; O(n^3).
inline bool is_psd(const KernelMatrix& K, double rel_tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(K.values()), Eigen::EigenvaluesOnly);
  const double trace = std::max(std::abs(K.values().trace()), std::numeric_limits<double>::min());
  return es.eigenvalues().minCoeff() >= -rel_tol * trace;
}

}  // namespace lpmkl
