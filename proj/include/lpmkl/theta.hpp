#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>

#include "lpmkl/error.hpp"
#include "lpmkl/kernel.hpp"

namespace lpmkl {

// =======================================================================
// Norm parameter
// =======================================================================

/*
 * The p of the l_p constraint on the mixing weights. p = 1 is accepted but
 * trained as p = 1 + kOneDelta, because the closed-form update only
 * converges for p > 1. p = infinity pins every weight to 1.
 */
class NormParameter {
 public:
  enum class Kind { finite, one, infinity };

  static constexpr double kOneDelta = 1e-4;

  static NormParameter finite(double p) {
    if (!(p >= 1.0)) throw ValidationError("p must be ≥ 1");
    if (p == 1.0) return one();
    if (std::isinf(p)) return infinity();
    return NormParameter(Kind::finite, p);
  }
  static NormParameter one() { return NormParameter(Kind::one, 1.0); }
  static NormParameter infinity() { return NormParameter(Kind::infinity, std::numeric_limits<double>::infinity()); }

  /// Accepts decimals, fractions such as "4/3", and "inf".
  static NormParameter parse(std::string_view text) {
    if (text == "inf" || text == "Inf" || text == "INF" || text == "infinity") return infinity();
    const auto slash = text.find('/');
    auto number = [&](std::string_view s) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("cannot parse p value '" + std::string(text) + "'");
      }
      return v;
    };
    double v = slash == std::string_view::npos ? number(text) : number(text.substr(0, slash)) / number(text.substr(slash + 1));
    if (std::isnan(v)) throw ValidationError("cannot parse p value '" + std::string(text) + "'");
    return finite(v);
  }

  Kind kind() const { return kind_; }
  bool is_one() const { return kind_ == Kind::one; }
  bool is_infinity() const { return kind_ == Kind::infinity; }

  /// Nominal value (1, the given p, or +inf).
  double value() const { return value_; }

  /// Value actually used by the closed-form update.
  double effective() const { return kind_ == Kind::one ? 1.0 + kOneDelta : value_; }

  /// Conjugate exponent p/(p-1) of effective(); 1 for p = infinity.
  double conjugate() const {
    if (kind_ == Kind::infinity) return 1.0;
    const double p = effective();
    return p / (p - 1.0);
  }

  std::string to_string() const {
    if (kind_ == Kind::infinity) return "inf";
    if (kind_ == Kind::one) return "1";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value_);
    return buf;
  }

  friend bool operator==(const NormParameter&, const NormParameter&) = default;

 private:
  NormParameter(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

// =======================================================================
// Closed-form mixing updates
// =======================================================================

/*
 * Minimizer of sum_m ||w_m||^2 / theta_m over theta >= 0, ||theta||_p <= 1:
 *
 *   theta_m = ||w_m||^{2/(p+1)} / (sum_m' ||w_m'||^{2p/(p+1)})^{1/p}
 *
 * Entries with ||w_m||^2 <= 1e-15 * max (including negative values from
 * indefinite kernels) get theta_m = 0. The formula is invariant to scaling
 * all norms, so they are divided by the largest first.
 */
inline Vector update_theta(const Vector& w_norms_sq, double p) {
  if (!(p > 1.0)) throw DomainError("update_theta: p must be > 1");
  if (w_norms_sq.size() == 0) throw ValidationError("update_theta: empty norm vector");
  if (w_norms_sq.hasNaN()) throw ValidationError("update_theta: NaN in norm vector");
  const double top = w_norms_sq.maxCoeff();
  if (!(top > 0.0)) {
    throw DegenerateModelError("update_theta: every ||w_m||^2 is <= 0; at least one must be strictly positive");
  }
  const double floor = 1e-15 * top;
  Vector theta = Vector::Zero(w_norms_sq.size());
  double denom = 0.0;
  for (Eigen::Index m = 0; m < w_norms_sq.size(); ++m) {
    if (w_norms_sq[m] <= floor) continue;
    const double u = w_norms_sq[m] / top;
    if (std::isinf(p)) {
      theta[m] = 1.0;
      continue;
    }
    theta[m] = std::pow(u, 1.0 / (p + 1.0));
    denom += std::pow(u, p / (p + 1.0));
  }
  if (std::isinf(p)) return theta;
  return theta / std::pow(denom, 1.0 / p);
}

inline Vector update_theta(const Vector& w_norms_sq, const NormParameter& p) {
  if (p.is_infinity()) return Vector::Ones(w_norms_sq.size());
  return update_theta(w_norms_sq, p.effective());
}

/// r = q / (q - 2): the weight norm paired with block-norm exponent q > 2.
inline double blocknorm_exponent(double q) {
  if (!(q > 2.0)) throw DomainError("block-norm exponent q must be > 2");
  return std::isinf(q) ? 1.0 : q / (q - 2.0);
}

/*
 * Update for l_{2,q} block-norm MKL with q > 2 (r = q/(q-2)):
 *
 *   theta_m = ||w_m||^{-2/(r-1)} / (sum_m' ||w_m'||^{-2r/(r-1)})^{1/r}
 *
 * Larger blocks receive smaller weights. Inverse powers need every norm to
 * be strictly positive.
 */
inline Vector update_theta_blocknorm(const Vector& w_norms_sq, double q) {
  const double r = blocknorm_exponent(q);
  if (w_norms_sq.size() == 0) throw ValidationError("update_theta_blocknorm: empty norm vector");
  for (Eigen::Index m = 0; m < w_norms_sq.size(); ++m) {
    if (!(w_norms_sq[m] > 0.0)) {
      throw DegenerateModelError("update_theta_blocknorm: ||w_" + std::to_string(m) +
                                 "|| is zero; drop that kernel before using the block-norm update");
    }
  }
  if (r == 1.0) {
    // q = infinity: all weight on the smallest block.
    Eigen::Index best = 0;
    w_norms_sq.minCoeff(&best);
    Vector theta = Vector::Zero(w_norms_sq.size());
    theta[best] = 1.0;
    return theta;
  }
  const double bottom = w_norms_sq.minCoeff();
  Vector theta(w_norms_sq.size());
  double denom = 0.0;
  for (Eigen::Index m = 0; m < w_norms_sq.size(); ++m) {
    const double u = w_norms_sq[m] / bottom;  // >= 1, so negative powers stay <= 1
    theta[m] = std::pow(u, -1.0 / (r - 1.0));
    denom += std::pow(u, -r / (r - 1.0));
  }
  return theta / std::pow(denom, 1.0 / r);
}

/// ||w_m||^2 = theta_m^2 alpha^T K_m alpha.
inline Vector compute_w_norms(const Vector& alpha, const Vector& theta, const KernelStack& stack) {
  if (static_cast<std::size_t>(theta.size()) != stack.size()) throw ValidationError("theta length != kernel count");
  if (static_cast<std::size_t>(alpha.size()) != stack.n()) throw ValidationError("alpha length != sample count");
  Vector out(theta.size());
  for (std::size_t m = 0; m < stack.size(); ++m) {
    const auto k = static_cast<Eigen::Index>(m);
    out[k] = theta[k] == 0.0 ? 0.0 : theta[k] * theta[k] * alpha.dot(stack[m].values() * alpha);
  }
  return out;
}

/// sum_m theta_m^p, raised to 1/p; the max for p = infinity.
inline double lp_norm(const Vector& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  const double top = v.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]) / top, p);
  return top * std::pow(s, 1.0 / p);
}

}  // namespace lpmkl
