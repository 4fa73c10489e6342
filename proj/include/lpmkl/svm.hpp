#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lpmkl/error.hpp"
#include "lpmkl/kernel.hpp"

namespace lpmkl {

// =======================================================================
// Types
// =======================================================================

struct SvmConfig {
  double C = 1.0;
  double epsilon = 1e-3;           // KKT tolerance
  std::size_t q = 10;              // working-set size, even
  std::size_t max_passes = 10'000'000;  // cap on working-set iterations
  bool shrinking = false;

  void validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("SvmConfig: C must be positive and finite");
    if (!(epsilon > 0.0)) throw ValidationError("SvmConfig: epsilon must be positive");
    if (q < 2 || q % 2 != 0) throw ValidationError("SvmConfig: q must be even and >= 2");
    if (max_passes == 0) throw ValidationError("SvmConfig: max_passes must be positive");
  }
};

/*
 * Dual solution in signed form: alpha_i carries the label sign, so the box
 * reads 0 <= y_i alpha_i <= C and the equality constraint is sum alpha = 0.
 */
struct SvmSolution {
  Vector alpha;
  double bias = 0.0;
  double objective = 0.0;
  std::vector<std::size_t> support_indices;
  std::size_t iterations = 0;
  double kkt_violation = 0.0;
};

/*
 * Working memory of the decomposition solver.
 *   g(m, i)  = sum_j alpha_j K_m[j][i]
 *   g_hat(i) = sum_m theta_m g(m, i)
 *   L        = sum_i y_i alpha_i
 *   S_m(m)   = 1/2 sum_i g(m, i) alpha_i
 *   S        = sum_m theta_m S_m(m)
 */
struct SolverState {
  Vector alpha;
  Matrix g;  // M x n
  Vector g_hat;
  double L = 0.0;
  Vector S_m;
  double S = 0.0;
};

class SvmNonConvergence : public NonConvergenceError {
 public:
  SvmNonConvergence(const std::string& what, SvmSolution best) : NonConvergenceError(what), best_(std::move(best)) {}
  const SvmSolution& best() const { return best_; }

 private:
  SvmSolution best_;
};

// =======================================================================
// Validation and conversions
// =======================================================================

inline void validate_labels(const Vector& y) {
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0) pos = true;
    else if (y[i] == -1.0) neg = true;
    else throw ValidationError("labels must be +1 or -1 (index " + std::to_string(i) + ")");
  }
  if (!pos || !neg) throw ValidationError("labels must contain both classes");
}

inline void validate_theta(const Vector& theta, std::size_t M) {
  if (static_cast<std::size_t>(theta.size()) != M) {
    throw ValidationError("theta has length " + std::to_string(theta.size()) + ", expected " + std::to_string(M));
  }
  if (!theta.allFinite() || (theta.array() < 0.0).any()) throw ValidationError("theta must be finite and nonnegative");
  if (!(theta.array() > 0.0).any()) throw ValidationError("theta must not be all zero");
}

/// Signed alpha -> box form a_i = y_i alpha_i in [0, C].
inline Vector to_box_form(const Vector& alpha, const Vector& y) { return alpha.cwiseProduct(y); }

/// Box form a_i in [0, C] -> signed alpha.
inline Vector from_box_form(const Vector& a, const Vector& y) { return a.cwiseProduct(y); }

namespace detail {

inline double lower_bound(double y, double C) { return y > 0 ? 0.0 : -C; }
inline double upper_bound(double y, double C) { return y > 0 ? C : 0.0; }

}  // namespace detail

// =======================================================================
// Free-standing quantities on a solver state
// =======================================================================

/*
 * Largest KKT residual at the best bias. With F_i = y_i - g_hat_i the
 * optimality condition is max_{i in up} F_i <= min_{j in low} F_j, where
 * "up" holds variables that can still increase and "low" those that can
 * decrease. The residual is half that pair gap: the amount by which some
 * y_i f(x_i) misses its margin condition when b sits at the midpoint.
 */
inline double max_kkt_violation(const Vector& g_hat, const Vector& alpha, const Vector& y, double C) {
  double up = -std::numeric_limits<double>::infinity();
  double low = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double F = y[i] - g_hat[i];
    if (alpha[i] < detail::upper_bound(y[i], C)) up = std::max(up, F);
    if (alpha[i] > detail::lower_bound(y[i], C)) low = std::min(low, F);
  }
  if (!std::isfinite(up) || !std::isfinite(low)) return 0.0;
  return std::max(0.0, 0.5 * (up - low));
}

inline double max_kkt_violation(const SolverState& state, const Vector& alpha, const Vector& y, double C) {
  return max_kkt_violation(state.g_hat, alpha, y, C);
}

/// S_m = 1/2 sum_i g(m, i) alpha_i for each kernel.
inline Vector per_kernel_objectives(const SolverState& state) { return 0.5 * (state.g * state.alpha); }

/*
 * Bias from the KKT conditions. Free support vectors (0 < y_i alpha_i < C)
 * satisfy y_i (g_hat_i + b) = 1, i.e. b = y_i - g_hat_i; their mean is
 * returned. Without free vectors b is the midpoint of the interval allowed
 * by the bounded ones.
 */
inline double recover_bias(const Vector& alpha, const Vector& g_hat, const Vector& y, double C) {
  double sum = 0.0;
  std::size_t free_count = 0;
  double up = -std::numeric_limits<double>::infinity();
  double low = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double F = y[i] - g_hat[i];
    const double a = y[i] * alpha[i];
    if (a > 0.0 && a < C) {
      sum += F;
      ++free_count;
    }
    if (alpha[i] < detail::upper_bound(y[i], C)) up = std::max(up, F);
    if (alpha[i] > detail::lower_bound(y[i], C)) low = std::min(low, F);
  }
  if (free_count > 0) return sum / static_cast<double>(free_count);
  if (!std::isfinite(up) && !std::isfinite(low)) return 0.0;
  if (!std::isfinite(up)) return low;
  if (!std::isfinite(low)) return up;
  return 0.5 * (up + low);
}

// =======================================================================
// Decomposition solver
// =======================================================================

/*
 * Working-set solver for
 *
 *   max_alpha  sum_i y_i alpha_i - 1/2 alpha^T (sum_m theta_m K_m) alpha
 *   s.t.       sum_i alpha_i = 0,  0 <= y_i alpha_i <= C.
 *
 * Keeps one gradient row per kernel so a caller can change theta between
 * steps at O(M n) cost, which is what the interleaved MKL trainer needs.
 *
 * Selection takes the q/2 largest F_i among variables that can increase and
 * the q/2 smallest among those that can decrease (F_i = y_i - g_hat_i, ties
 * to the lower index). q = 2 uses the analytic two-variable step; larger
 * working sets are solved by an inner two-variable loop on the q x q block.
 */
class DualSolver {
 public:
  DualSolver(KernelStack stack, Vector y, Vector theta, SvmConfig config,
             const std::optional<Vector>& warm_start = std::nullopt)
      : stack_(std::move(stack)), y_(std::move(y)), theta_(std::move(theta)), cfg_(config) {
    cfg_.validate();
    const auto n = static_cast<Eigen::Index>(stack_.n());
    if (y_.size() != n) throw ValidationError("label count does not match kernel size");
    validate_labels(y_);
    validate_theta(theta_, stack_.size());
    state_.alpha = Vector::Zero(n);
    state_.g = Matrix::Zero(static_cast<Eigen::Index>(stack_.size()), n);
    state_.g_hat = Vector::Zero(n);
    state_.S_m = Vector::Zero(static_cast<Eigen::Index>(stack_.size()));
    active_.assign(static_cast<std::size_t>(n), 1);
    if (warm_start) set_alpha(*warm_start);
  }

  std::size_t n() const { return stack_.n(); }
  std::size_t kernel_count() const { return stack_.size(); }
  const Vector& labels() const { return y_; }
  const Vector& theta() const { return theta_; }
  const Vector& alpha() const { return state_.alpha; }
  const SvmConfig& config() const { return cfg_; }
  std::size_t iterations() const { return iterations_; }
  const KernelStack& stack() const { return stack_; }

  void set_epsilon(double eps) {
    if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    cfg_.epsilon = eps;
  }

  /// Replace alpha (must be feasible up to round-off) and rebuild gradients.
  void set_alpha(const Vector& alpha) {
    const double C = cfg_.C;
    const auto n = static_cast<Eigen::Index>(this->n());
    if (alpha.size() != n) throw ValidationError("warm start has wrong length");
    Vector a = alpha;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lb = detail::lower_bound(y_[i], C), ub = detail::upper_bound(y_[i], C);
      if (!std::isfinite(a[i]) || a[i] < lb - 1e-10 || a[i] > ub + 1e-10) {
        throw ValidationError("warm start violates the box constraint at index " + std::to_string(i));
      }
      a[i] = std::clamp(a[i], lb, ub);
    }
    if (std::abs(a.sum()) > 1e-8 * C * static_cast<double>(n)) {
      throw ValidationError("warm start violates sum(alpha) = 0");
    }
    state_.alpha = a;
    state_.g = rebuild_gradients();
    recompute_g_hat();
  }

  /// New mixing weights; recomputes g_hat from the per-kernel rows.
  void set_theta(const Vector& theta) {
    validate_theta(theta, kernel_count());
    theta_ = theta;
    recompute_g_hat();
  }

  /// g(m, i) recomputed from scratch.
  Matrix rebuild_gradients() const {
    Matrix g = Matrix::Zero(static_cast<Eigen::Index>(kernel_count()), static_cast<Eigen::Index>(n()));
    for (std::size_t m = 0; m < kernel_count(); ++m) g.row(static_cast<Eigen::Index>(m)) = (stack_[m].values() * state_.alpha).transpose();
    return g;
  }

  double kkt_violation() const { return max_kkt_violation(state_.g_hat, state_.alpha, y_, cfg_.C); }

  /// Refreshes L, S_m, S and returns the state.
  const SolverState& state() {
    state_.L = y_.dot(state_.alpha);
    state_.S_m = per_kernel_objectives(state_);
    state_.S = theta_.dot(state_.S_m);
    return state_;
  }

  /// Dual objective L - S at the current alpha and theta.
  double objective() const { return y_.dot(state_.alpha) - 0.5 * state_.g_hat.dot(state_.alpha); }

  double bias() const { return recover_bias(state_.alpha, state_.g_hat, y_, cfg_.C); }

  SvmSolution solution() const {
    SvmSolution s;
    s.alpha = state_.alpha;
    s.bias = bias();
    s.objective = objective();
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i)
      if (s.alpha[i] != 0.0) s.support_indices.push_back(static_cast<std::size_t>(i));
    s.iterations = iterations_;
    s.kkt_violation = kkt_violation();
    return s;
  }

  /*
   * One working-set iteration. Returns false, without touching alpha, when
   * the KKT residual is already within epsilon.
   */
  bool step() {
    if (cfg_.shrinking && iterations_ > 0 && iterations_ % shrink_interval() == 0) shrink();
    auto [up_val, low_val] = extreme_values();
    if (!(0.5 * (up_val - low_val) > cfg_.epsilon)) {
      if (!unshrink()) return false;
      std::tie(up_val, low_val) = extreme_values();
      if (!(0.5 * (up_val - low_val) > cfg_.epsilon)) return false;
    }
    if (cfg_.q == 2) {
      const auto [i, j] = select_pair();
      pair_step(i, j);
    } else {
      block_step(select_block());
    }
    ++iterations_;
    return true;
  }

  /// Iterate until the KKT residual is within epsilon.
  SvmSolution solve() {
    while (step()) {
      if (iterations_ >= cfg_.max_passes) {
        throw SvmNonConvergence("SVM solver hit the iteration cap of " + std::to_string(cfg_.max_passes), solution());
      }
    }
    return solution();
  }

 private:
  double F(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return y_[k] - state_.g_hat[k];
  }
  bool can_increase(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return state_.alpha[k] < detail::upper_bound(y_[k], cfg_.C);
  }
  bool can_decrease(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return state_.alpha[k] > detail::lower_bound(y_[k], cfg_.C);
  }

  std::size_t shrink_interval() const { return std::min<std::size_t>(n(), 1000); }

  std::pair<double, double> extreme_values() const {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n(); ++i) {
      if (!active_[i]) continue;
      const double f = F(i);
      if (can_increase(i)) up = std::max(up, f);
      if (can_decrease(i)) low = std::min(low, f);
    }
    return {up, low};
  }

  std::pair<std::size_t, std::size_t> select_pair() const {
    std::size_t bi = n(), bj = n();
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n(); ++i) {
      if (!active_[i]) continue;
      const double f = F(i);
      if (can_increase(i) && f > up) { up = f; bi = i; }
      if (can_decrease(i) && f < low) { low = f; bj = i; }
    }
    return {bi, bj};
  }

  std::vector<std::size_t> select_block() const {
    std::vector<std::size_t> ups, lows;
    for (std::size_t i = 0; i < n(); ++i) {
      if (!active_[i]) continue;
      if (can_increase(i)) ups.push_back(i);
      if (can_decrease(i)) lows.push_back(i);
    }
    const auto take_up = std::min(ups.size(), cfg_.q);
    const auto take_low = std::min(lows.size(), cfg_.q);
    std::partial_sort(ups.begin(), ups.begin() + static_cast<std::ptrdiff_t>(take_up), ups.end(),
                      [&](std::size_t a, std::size_t b) { return F(a) > F(b) || (F(a) == F(b) && a < b); });
    std::partial_sort(lows.begin(), lows.begin() + static_cast<std::ptrdiff_t>(take_low), lows.end(),
                      [&](std::size_t a, std::size_t b) { return F(a) < F(b) || (F(a) == F(b) && a < b); });
    std::vector<std::size_t> block;
    std::vector<char> used(n(), 0);
    std::size_t iu = 0, il = 0;
    auto take_next = [&](const std::vector<std::size_t>& list, std::size_t& pos, std::size_t limit) {
      while (pos < limit) {
        const auto k = list[pos++];
        if (!used[k]) {
          used[k] = 1;
          block.push_back(k);
          return true;
        }
      }
      return false;
    };
    // Alternate between the two ends; when one side runs dry the other fills.
    while (block.size() < cfg_.q) {
      const bool a = take_next(ups, iu, take_up);
      if (block.size() >= cfg_.q) break;
      const bool b = take_next(lows, il, take_low);
      if (!a && !b) break;
    }
    return block;
  }

  /// sum_m theta_m K_m(i, j)
  double mixed(std::size_t i, std::size_t j) const {
    double s = 0.0;
    for (std::size_t m = 0; m < kernel_count(); ++m) {
      const double t = theta_[static_cast<Eigen::Index>(m)];
      if (t != 0.0) s += t * stack_[m](i, j);
    }
    return s;
  }

  /*
   * Move x_i up and x_j down by min(t, room_i, room_j). A variable that hits
   * its bound is set to the bound exactly so free/bounded tests stay exact.
   */
  static std::pair<double, double> clipped_step(double xi, double xj, double t, double room_i, double room_j,
                                                double ub_i, double lb_j) {
    const double s = std::min({t, room_i, room_j});
    return {s == room_i ? ub_i : xi + s, s == room_j ? lb_j : xj - s};
  }

  void pair_step(std::size_t i, std::size_t j) {
    const auto ki = static_cast<Eigen::Index>(i), kj = static_cast<Eigen::Index>(j);
    const double C = cfg_.C;
    double eta = mixed(i, i) + mixed(j, j) - 2.0 * mixed(i, j);
    eta = std::max(eta, kTau);
    const double gap = F(i) - F(j);
    const double room_i = detail::upper_bound(y_[ki], C) - state_.alpha[ki];
    const double room_j = state_.alpha[kj] - detail::lower_bound(y_[kj], C);
    const auto [new_i, new_j] = clipped_step(state_.alpha[ki], state_.alpha[kj], gap / eta, room_i, room_j,
                                             detail::upper_bound(y_[ki], C), detail::lower_bound(y_[kj], C));
    apply_delta(i, new_i - state_.alpha[ki]);
    apply_delta(j, new_j - state_.alpha[kj]);
    state_.alpha[ki] = new_i;
    state_.alpha[kj] = new_j;
  }

  void block_step(const std::vector<std::size_t>& block) {
    const std::size_t k = block.size();
    if (k < 2) return;
    const double C = cfg_.C;
    Eigen::MatrixXd Q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b)
        Q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            Q(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = mixed(block[a], block[b]);
    Vector x(static_cast<Eigen::Index>(k)), lb(static_cast<Eigen::Index>(k)), ub(static_cast<Eigen::Index>(k)),
        f(static_cast<Eigen::Index>(k));
    for (std::size_t a = 0; a < k; ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      const auto g = static_cast<Eigen::Index>(block[a]);
      x[ia] = state_.alpha[g];
      lb[ia] = detail::lower_bound(y_[g], C);
      ub[ia] = detail::upper_bound(y_[g], C);
      f[ia] = F(block[a]);
    }
    const Vector x0 = x;
    const double inner_tol = std::min(1e-3 * cfg_.epsilon, 1e-10);
    const std::size_t max_inner = 200 * k;
    for (std::size_t it = 0; it < max_inner; ++it) {
      Eigen::Index bi = -1, bj = -1;
      double up = -std::numeric_limits<double>::infinity(), low = std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(k); ++a) {
        if (x[a] < ub[a] && f[a] > up) { up = f[a]; bi = a; }
        if (x[a] > lb[a] && f[a] < low) { low = f[a]; bj = a; }
      }
      if (bi < 0 || bj < 0 || !(up - low > inner_tol)) break;
      const double eta = std::max(Q(bi, bi) + Q(bj, bj) - 2.0 * Q(bi, bj), kTau);
      const double room_i = ub[bi] - x[bi];
      const double room_j = x[bj] - lb[bj];
      const auto [new_i, new_j] = clipped_step(x[bi], x[bj], (up - low) / eta, room_i, room_j, ub[bi], lb[bj]);
      const double di = new_i - x[bi], dj = new_j - x[bj];
      f -= di * Q.col(bi) + dj * Q.col(bj);
      x[bi] = new_i;
      x[bj] = new_j;
    }
    for (std::size_t a = 0; a < k; ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      const double d = x[ia] - x0[ia];
      if (d != 0.0) {
        apply_delta(block[a], d);
        state_.alpha[static_cast<Eigen::Index>(block[a])] = x[ia];
      }
    }
  }

  void apply_delta(std::size_t j, double d) {
    if (d == 0.0) return;
    const auto n_ = static_cast<Eigen::Index>(n());
    for (std::size_t m = 0; m < kernel_count(); ++m) {
      Eigen::Map<const Eigen::RowVectorXd> row(stack_[m].row(j), n_);
      state_.g.row(static_cast<Eigen::Index>(m)) += d * row;
      const double t = theta_[static_cast<Eigen::Index>(m)];
      if (t != 0.0) state_.g_hat.transpose() += (t * d) * row;
    }
  }

  void recompute_g_hat() { state_.g_hat = state_.g.transpose() * theta_; }

  void shrink() {
    const auto [up, low] = extreme_values();
    for (std::size_t i = 0; i < n(); ++i) {
      if (!active_[i]) continue;
      const bool inc = can_increase(i), dec = can_decrease(i);
      if (inc && dec) continue;
      const double f = F(i);
      if ((inc && f < low) || (dec && f > up)) active_[i] = 0;
    }
  }

  /// Reactivate everything; true if anything was inactive.
  bool unshrink() {
    bool any = false;
    for (auto& a : active_) {
      if (!a) { a = 1; any = true; }
    }
    return any;
  }

  static constexpr double kTau = 1e-12;

  KernelStack stack_;
  Vector y_;
  Vector theta_;
  SvmConfig cfg_;
  SolverState state_;
  std::vector<char> active_;
  std::size_t iterations_ = 0;
};

/// Solve the fixed-theta dual to KKT tolerance config.epsilon.
inline SvmSolution solve_dual(const KernelStack& stack, const Vector& theta, const Vector& y, const SvmConfig& config,
                              const std::optional<Vector>& warm_start = std::nullopt) {
  DualSolver solver(stack, y, theta, config, warm_start);
  return solver.solve();
}

}  // namespace lpmkl
