#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lpmkl/error.hpp"

// Rademacher-complexity generalization bounds for l_p-norm MKL hypothesis
// classes. "log M" is the natural logarithm, rounded up to an integer.

namespace lpmkl::bounds {

inline constexpr double kC = 23.0 / 22.0;

struct BoundInputs {
  double M = 2;
  double n = 100;
  double R = 1.0;
  double p = 1.0;
  double gamma = 1.0;
  double delta = 0.05;
  double L = 1.0;
};

enum class Scenario { uniform, sparse };

namespace detail {

inline void check_common(double M, double R, double n) {
  if (!(M > 1.0)) throw DomainError("bounds need M > 1 kernels");
  if (!(n >= 1.0)) throw DomainError("bounds need n >= 1");
  if (!(R > 0.0)) throw DomainError("bounds need R > 0");
}

inline void check_p(double p) {
  if (!(p >= 1.0)) throw DomainError("p must be ≥ 1");
}

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

inline double confidence_term(double delta, double n) { return std::sqrt(std::log(2.0 / delta) / (2.0 * n)); }

}  // namespace detail

/// 1/p* = 1 - 1/p; exactly 0 at p = 1 and exactly 1 at p = infinity.
inline double inverse_conjugate(double p) {
  detail::check_p(p);
  if (std::isinf(p)) return 1.0;
  return 1.0 - 1.0 / p;
}

/// The l1-to-lp conversion factor sqrt(M^{1/p*}).
inline double conversion_factor(double M, double p) { return std::sqrt(std::pow(M, inverse_conjugate(p))); }

inline double l1_rademacher_bound(double M, double R, double n) {
  detail::check_common(M, R, n);
  return std::sqrt(kC * std::numbers::e * std::ceil(std::log(M)) * R * R / n);
}

inline double lp_rademacher_bound(double M, double R, double n, double p) {
  return l1_rademacher_bound(M, R, n) * conversion_factor(M, p);
}

inline double generalization_bound(const BoundInputs& in, double empirical_risk) {
  detail::check_delta(in.delta);
  if (!(in.L >= 0.0)) throw DomainError("Lipschitz constant must be >= 0");
  if (!(empirical_risk >= 0.0 && empirical_risk <= 1.0)) throw DomainError("empirical risk must lie in [0, 1]");
  return empirical_risk + 2.0 * in.L * lp_rademacher_bound(in.M, in.R, in.n, in.p) +
         detail::confidence_term(in.delta, in.n);
}

/// Margin-loss version: the middle term is (2R/gamma) sqrt(c e M^{1/p*} ceil(log M) / n).
inline double radius_margin_bound(const BoundInputs& in, double empirical_margin_risk) {
  if (!(in.gamma > 0.0)) throw DomainError("margin gamma must be > 0");
  detail::check_delta(in.delta);
  if (!(empirical_margin_risk >= 0.0 && empirical_margin_risk <= 1.0)) {
    throw DomainError("empirical margin risk must lie in [0, 1]");
  }
  const double rad = lp_rademacher_bound(in.M, 1.0, in.n, in.p);
  return empirical_margin_risk + 2.0 * in.R / in.gamma * rad + detail::confidence_term(in.delta, in.n);
}

/*
 * Bound for a class whose l_{2,q} block norm (q = 2p/(p+1)) is at most
 * scale instead of 1. The Rademacher term grows linearly in the scale.
 */
inline double scaled_generalization_bound(const BoundInputs& in, double scale, double empirical_risk) {
  detail::check_delta(in.delta);
  if (!(scale > 0.0)) throw DomainError("hypothesis scale must be > 0");
  return empirical_risk + 2.0 * in.L * scale * lp_rademacher_bound(in.M, in.R, in.n, in.p) +
         detail::confidence_term(in.delta, in.n);
}

/*
 * Smallest scale that contains the Bayes classifier w = (1,...,1) (uniform)
 * or w = (1,0,...,0) (sparse) when each kernel is one input coordinate.
 */
inline double case_study_scale(Scenario s, double M, double p) {
  detail::check_p(p);
  if (s == Scenario::sparse) return 1.0;
  const double exponent = std::isinf(p) ? 0.5 : (p + 1.0) / (2.0 * p);
  return std::pow(M, exponent);
}

inline double case_study_bounds(const BoundInputs& in, Scenario s, double empirical_risk = 0.0) {
  return scaled_generalization_bound(in, case_study_scale(s, in.M, in.p), empirical_risk);
}

/// Competitor bound sqrt(c e p* M^{1/p*} R^2 / n); infinite at p = 1.
inline double cortes_bound(double M, double R, double n, double p) {
  detail::check_common(M, R, n);
  detail::check_p(p);
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  const double p_star = std::isinf(p) ? 1.0 : p / (p - 1.0);
  return std::sqrt(kC * std::numbers::e * p_star * std::pow(M, inverse_conjugate(p)) * R * R / n);
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "uniform") return Scenario::uniform;
  if (s == "sparse") return Scenario::sparse;
  throw ValidationError("scenario must be 'uniform' or 'sparse', got '" + s + "'");
}

}  // namespace lpmkl::bounds
