#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lpmkl/error.hpp"
#include "lpmkl/kernel.hpp"
#include "lpmkl/rng.hpp"

namespace lpmkl::toy {

struct ToyConfig {
  std::size_t d = 50;
  std::vector<int> theta_true;  // binary, length d
  double rho = 1.75;
  std::size_t n_train = 50;
  std::size_t n_validate = 10'000;
  std::size_t n_test = 10'000;
  std::uint64_t seed = 1;
  std::size_t repetitions = 100;

  /// Fraction of uninformative features.
  double nu() const {
    std::size_t ones = 0;
    for (int t : theta_true) ones += t != 0;
    return 1.0 - static_cast<double>(ones) / static_cast<double>(theta_true.size());
  }

  void validate() const {
    if (d == 0) throw ValidationError("d must be positive");
    if (theta_true.size() != d) throw ValidationError("theta_true must have d entries");
    bool any = false;
    for (int t : theta_true) {
      if (t != 0 && t != 1) throw ValidationError("theta_true must be binary");
      any = any || t == 1;
    }
    if (!any) throw ValidationError("theta_true needs at least one informative feature");
    if (!(rho > 0.0)) throw ValidationError("rho must be positive");
    for (auto [n, what] : {std::pair{n_train, "n_train"}, {n_validate, "n_validate"}, {n_test, "n_test"}}) {
      if (n < 2 || n % 2 != 0) throw ValidationError(std::string(what) + " must be even and >= 2 for a balanced sample");
    }
    if (repetitions == 0) throw ValidationError("repetitions must be positive");
  }
};

/// theta_true with the first round(d(1 - nu)) entries set, clamped to at least one.
inline std::vector<int> leading_ones(std::size_t d, double nu) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw ValidationError("nu must lie in [0, 1]");
  auto ones = static_cast<std::size_t>(std::lround(static_cast<double>(d) * (1.0 - nu)));
  ones = std::max<std::size_t>(1, std::min(ones, d));
  std::vector<int> t(d, 0);
  for (std::size_t i = 0; i < ones; ++i) t[i] = 1;
  return t;
}

inline ToyConfig make_config(std::size_t d, double nu) {
  ToyConfig c;
  c.d = d;
  c.theta_true = leading_ones(d, nu);
  return c;
}

struct Dataset {
  Matrix X;  // n x d
  Vector y;
};

/// Class mean mu_1 = rho * theta / ||theta||_2; the other class uses -mu_1.
inline Vector class_mean(const ToyConfig& cfg) {
  Vector mu(static_cast<Eigen::Index>(cfg.d));
  double ones = 0.0;
  for (std::size_t i = 0; i < cfg.d; ++i) {
    mu[static_cast<Eigen::Index>(i)] = cfg.theta_true[i];
    ones += cfg.theta_true[i];
  }
  return mu * (cfg.rho / std::sqrt(ones));
}

/// n points: the first n/2 drawn from N(mu_1, I) with label +1, the rest from N(-mu_1, I) with label -1.
inline Dataset generate_toy(const ToyConfig& cfg, std::size_t n, Rng& rng) {
  cfg.validate();
  if (n < 2 || n % 2 != 0) throw ValidationError("sample size must be even and >= 2");
  const Vector mu = class_mean(cfg);
  Dataset out{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.d)), Vector(static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    const double label = i < n / 2 ? 1.0 : -1.0;
    out.y[static_cast<Eigen::Index>(i)] = label;
    for (std::size_t j = 0; j < cfg.d; ++j) {
      out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = label * mu[static_cast<Eigen::Index>(j)] + rng.normal();
    }
  }
  return out;
}

inline Dataset generate_toy(const ToyConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_toy(cfg, cfg.n_train, rng);
}

/// Phi(-rho): error of the optimal classifier when the class means are 2 rho apart.
inline double bayes_error(double rho) {
  if (!(rho > 0.0)) throw ValidationError("rho must be positive");
  return 0.5 * std::erfc(rho / std::numbers::sqrt2);
}

/// || theta_hat/||theta_hat|| - theta/||theta|| ||_2.
inline double model_error(const Vector& theta_hat, const Vector& theta_true) {
  if (theta_hat.size() != theta_true.size()) throw ValidationError("model_error: length mismatch");
  const double a = theta_hat.norm();
  const double b = theta_true.norm();
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("model_error: zero vector");
  return (theta_hat / a - theta_true / b).norm();
}

/*
 * Per-block linear kernels over consecutive feature groups of size block
 * (the last group may be shorter), each multiplicatively normalized.
 * Returns the stack plus each kernel's normalization denominator.
 */
struct FeatureKernels {
  KernelStack stack;
  std::vector<double> denominators;
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end) feature ranges
};

inline std::vector<std::pair<std::size_t, std::size_t>> feature_blocks(std::size_t d, std::size_t block) {
  if (block == 0) throw ValidationError("block size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < d; b += block) out.emplace_back(b, std::min(d, b + block));
  return out;
}

inline FeatureKernels feature_kernels(const Matrix& X, std::size_t block = 1) {
  auto blocks = feature_blocks(static_cast<std::size_t>(X.cols()), block);
  std::vector<double> denominators;
  std::vector<KernelMatrix> kernels;
  kernels.reserve(blocks.size());
  for (auto [b, e] : blocks) {
    const auto name = "f" + std::to_string(b) + (e - b > 1 ? "-" + std::to_string(e - 1) : "");
    Matrix Xb = X.middleCols(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
    KernelMatrix K = linear_kernel(Xb, name);
    const double D = multiplicative_denominator(K);
    denominators.push_back(D);
    kernels.push_back(normalize_multiplicative(K));
  }
  return FeatureKernels{KernelStack(std::move(kernels)), std::move(denominators), std::move(blocks)};
}

/// Block-level ground truth: number of informative features in each block.
inline Vector block_truth(const ToyConfig& cfg, const std::vector<std::pair<std::size_t, std::size_t>>& blocks) {
  Vector t = Vector::Zero(static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t m = 0; m < blocks.size(); ++m)
    for (std::size_t j = blocks[m].first; j < blocks[m].second; ++j) t[static_cast<Eigen::Index>(m)] += cfg.theta_true[j];
  return t;
}

/*
 * Decision values of a model trained on feature_kernels(X_train), evaluated
 * in feature space: w = sum_m theta_m / D_m * X_train[:, block m]^T alpha.
 */
inline Vector linear_decision_values(const Matrix& X_train, const FeatureKernels& fk, const Vector& theta,
                                     const Vector& alpha, double bias, const Matrix& X_eval) {
  const Vector u = X_train.transpose() * alpha;  // per-feature sum_i alpha_i x_ij
  Vector w(u.size());
  for (std::size_t m = 0; m < fk.blocks.size(); ++m) {
    const double scale = theta[static_cast<Eigen::Index>(m)] / fk.denominators[m];
    for (std::size_t j = fk.blocks[m].first; j < fk.blocks[m].second; ++j)
      w[static_cast<Eigen::Index>(j)] = scale * u[static_cast<Eigen::Index>(j)];
  }
  return (X_eval * w).array() + bias;
}

inline double error_rate(const Vector& f, const Vector& y) {
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) wrong += (f[i] >= 0.0 ? 1.0 : -1.0) != y[i];
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

}  // namespace lpmkl::toy
