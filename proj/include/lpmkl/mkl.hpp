#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpmkl/error.hpp"
#include "lpmkl/kernel.hpp"
#include "lpmkl/svm.hpp"
#include "lpmkl/theta.hpp"

namespace lpmkl {

// =======================================================================
// Configuration, model, report
// =======================================================================

enum class TrainingMode { wrapper, interleaved };

inline std::string to_string(TrainingMode m) { return m == TrainingMode::wrapper ? "wrapper" : "interleaved"; }

inline TrainingMode parse_training_mode(std::string_view s) {
  if (s == "wrapper") return TrainingMode::wrapper;
  if (s == "interleaved") return TrainingMode::interleaved;
  throw ValidationError("mode must be 'wrapper' or 'interleaved', got '" + std::string(s) + "'");
}

struct MklConfig {
  NormParameter p = NormParameter::finite(2.0);
  double C = 1.0;
  double epsilon_svm = 1e-3;
  double epsilon_mkl = 1e-3;
  TrainingMode mode = TrainingMode::interleaved;
  std::size_t max_outer = 200;
  /// When set (q > 2), the block-norm update replaces the l_p update and p is ignored.
  std::optional<double> q_block;

  std::size_t working_set = 10;
  bool shrinking = false;
  std::size_t max_svm_iterations = 10'000'000;
  /// Interleaved mode: SVM steps between mixing updates.
  std::size_t callback_interval = 1;
  std::size_t max_escalations = 3;
  /// Weights below theta_floor * max(theta) are raised to that level when
  /// ||w_m||^2 is formed for the mixing step, so a kernel whose weight hit
  /// zero early can come back. 0 disables.
  double theta_floor = 1e-6;
  /// Block-norm regime only: theta moves to theta^(1-s) * theta_new^s,
  /// renormalized. Plain best-response steps can cycle between two
  /// weightings there; s = 1 turns damping off. The wrapper halves s
  /// whenever the primal objective starts to oscillate.
  double block_step = 0.5;

  void validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("C must be positive and finite");
    if (!(epsilon_svm > 0.0)) throw ValidationError("epsilon_svm must be positive");
    if (!(epsilon_mkl > 0.0)) throw ValidationError("epsilon_mkl must be positive");
    if (max_outer == 0) throw ValidationError("max_outer must be positive");
    if (callback_interval == 0) throw ValidationError("callback_interval must be positive");
    if (!(theta_floor >= 0.0 && theta_floor < 1.0)) throw ValidationError("theta_floor must lie in [0, 1)");
    if (!(block_step > 0.0 && block_step <= 1.0)) throw ValidationError("block_step must lie in (0, 1]");
    if (q_block) blocknorm_exponent(*q_block);
  }

  SvmConfig svm(double eps) const {
    SvmConfig s;
    s.C = C;
    s.epsilon = eps;
    s.q = working_set;
    s.max_passes = max_svm_iterations;
    s.shrinking = shrinking;
    return s;
  }
};

struct TrainingReport {
  std::size_t outer_iterations = 0;
  std::size_t theta_updates = 0;
  std::size_t svm_iterations = 0;
  std::size_t escalations = 0;
  double final_epsilon_svm = 0.0;
  std::vector<double> primal_trace;
  std::vector<double> dual_trace;
  std::vector<double> gap_trace;
  std::vector<Vector> theta_trace;
  double final_gap = std::numeric_limits<double>::quiet_NaN();
  double wall_time_seconds = 0.0;
  bool converged = false;
};

struct MklModel {
  Vector theta;
  Vector alpha;  // signed
  double bias = 0.0;
  std::vector<std::string> kernel_names;
  MklConfig config;
  TrainingReport report;

  std::vector<std::size_t> support_indices() const {
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < alpha.size(); ++i)
      if (alpha[i] != 0.0) out.push_back(static_cast<std::size_t>(i));
    return out;
  }
};

class MklNonConvergence : public NonConvergenceError {
 public:
  MklNonConvergence(const std::string& what, MklModel best) : NonConvergenceError(what), best_(std::move(best)) {}
  const MklModel& best() const { return best_; }

 private:
  MklModel best_;
};

class MklStall : public StallError {
 public:
  MklStall(const std::string& what, MklModel best) : StallError(what), best_(std::move(best)) {}
  const MklModel& best() const { return best_; }

 private:
  MklModel best_;
};

// =======================================================================
// Objectives
// =======================================================================

/// alpha^T K_m alpha for every kernel.
inline Vector quadratic_terms(const Vector& alpha, const KernelStack& stack) {
  Vector out(static_cast<Eigen::Index>(stack.size()));
  for (std::size_t m = 0; m < stack.size(); ++m) out[static_cast<Eigen::Index>(m)] = alpha.dot(stack[m].values() * alpha);
  return out;
}

/// Training decision values f(x_i) = sum_m theta_m (K_m alpha)_i + b.
inline Vector training_decision_values(const Vector& alpha, const Vector& theta, double bias, const KernelStack& stack) {
  Vector f = Vector::Constant(static_cast<Eigen::Index>(stack.n()), bias);
  for (std::size_t m = 0; m < stack.size(); ++m) {
    const double t = theta[static_cast<Eigen::Index>(m)];
    if (t != 0.0) f += t * (stack[m].values() * alpha);
  }
  return f;
}

/*
 * 1/2 sum_m ||w_m||^2 / theta_m with t/0 = 0 for t = 0 and +inf otherwise.
 */
inline double mixing_regularizer(const Vector& w_norms_sq, const Vector& theta) {
  double r = 0.0;
  for (Eigen::Index m = 0; m < theta.size(); ++m) {
    if (theta[m] == 0.0) {
      if (w_norms_sq[m] != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    r += w_norms_sq[m] / theta[m];
  }
  return 0.5 * r;
}

inline double hinge_sum(const Vector& f, const Vector& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) s += std::max(0.0, 1.0 - y[i] * f[i]);
  return s;
}

/// C sum_i hinge(f(x_i), y_i) + 1/2 sum_m ||w_m||^2 / theta_m.
inline double primal_objective(const Vector& alpha, const Vector& theta, double bias, double C,
                               const KernelStack& stack, const Vector& y) {
  const Vector f = training_decision_values(alpha, theta, bias, stack);
  const Vector w2 = compute_w_norms(alpha, theta, stack);
  return C * hinge_sum(f, y) + mixing_regularizer(w2, theta);
}

inline double primal_objective(const MklModel& model, const KernelStack& stack, const Vector& y) {
  return primal_objective(model.alpha, model.theta, model.bias, model.config.C, stack, y);
}

/// ||v_+||_q for q in [1, inf], computed with the max factored out.
inline double positive_part_norm(const Vector& v, double q) {
  const Vector pos = v.cwiseMax(0.0);
  if (std::isinf(q)) return pos.maxCoeff();
  return lp_norm(pos, q);
}

inline void check_dual_feasible(const Vector& alpha, const Vector& y, double C) {
  const double tol = 1e-8 * std::max(1.0, C);
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double a = y[i] * alpha[i];
    if (!(a >= -tol && a <= C + tol)) {
      throw ValidationError("alpha violates the box constraint at index " + std::to_string(i));
    }
  }
  if (std::abs(alpha.sum()) > 1e-8 * C * static_cast<double>(alpha.size())) {
    throw ValidationError("alpha violates sum(alpha) = 0");
  }
}

/*
 * Hinge-loss l_p MKL dual value
 *   sum_i y_i alpha_i - 1/2 || (alpha^T K_m alpha)_m ||_{p*},  p* = p/(p-1).
 * p = infinity uses p* = 1 (the sum kernel); p = 1 uses the conjugate of the
 * p that was actually trained, so primal and dual refer to the same problem.
 */
inline double dual_objective(const Vector& alpha, const NormParameter& p, double C, const KernelStack& stack,
                             const Vector& y) {
  check_dual_feasible(alpha, y, C);
  return y.dot(alpha) - 0.5 * positive_part_norm(quadratic_terms(alpha, stack), p.conjugate());
}

inline double dual_objective(const MklModel& model, const KernelStack& stack, const Vector& y) {
  return dual_objective(model.alpha, model.config.p, model.config.C, stack, y);
}

/// (primal - dual) / max(1, |primal|).
inline double relative_gap(double primal, double dual) { return (primal - dual) / std::max(1.0, std::abs(primal)); }

inline double duality_gap(const MklModel& model, const KernelStack& stack, const Vector& y) {
  return relative_gap(primal_objective(model, stack, y), dual_objective(model, stack, y));
}

// =======================================================================
// Prediction
// =======================================================================

/// f(x) = sum_m theta_m sum_i alpha_i k_m(x_i, x) + b, one KernelRows per kernel.
inline Vector predict(const MklModel& model, const std::vector<KernelRows>& rows) {
  if (rows.size() != static_cast<std::size_t>(model.theta.size())) {
    throw ValidationError("predict: got " + std::to_string(rows.size()) + " kernel row blocks, model has " +
                          std::to_string(model.theta.size()) + " kernels");
  }
  const std::size_t n_test = rows.empty() ? 0 : rows.front().rows();
  Vector f = Vector::Constant(static_cast<Eigen::Index>(n_test), model.bias);
  for (std::size_t m = 0; m < rows.size(); ++m) {
    if (rows[m].cols() != static_cast<std::size_t>(model.alpha.size())) {
      throw ValidationError("predict: kernel '" + rows[m].name + "' has " + std::to_string(rows[m].cols()) +
                            " columns, model was trained on " + std::to_string(model.alpha.size()) + " samples");
    }
    if (rows[m].rows() != n_test) throw ValidationError("predict: kernel row blocks differ in test count");
    const double t = model.theta[static_cast<Eigen::Index>(m)];
    if (t != 0.0) f += t * (rows[m].values * model.alpha);
  }
  return f;
}

inline Vector labels_from_decision(const Vector& f) {
  return f.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

// =======================================================================
// Training
// =======================================================================

namespace detail {

inline Vector initial_theta(const MklConfig& cfg, std::size_t M) {
  if (cfg.q_block) return Vector::Constant(static_cast<Eigen::Index>(M), std::pow(1.0 / static_cast<double>(M), 1.0 / blocknorm_exponent(*cfg.q_block)));
  if (cfg.p.is_infinity()) return Vector::Ones(static_cast<Eigen::Index>(M));
  return Vector::Constant(static_cast<Eigen::Index>(M), std::pow(1.0 / static_cast<double>(M), 1.0 / cfg.p.effective()));
}

inline Vector next_theta(const MklConfig& cfg, const Vector& w_norms_sq, const Vector& theta, double s) {
  if (!cfg.q_block) return update_theta(w_norms_sq, cfg.p);
  const Vector target = update_theta_blocknorm(w_norms_sq, *cfg.q_block);
  if (s == 1.0) return target;
  const Vector mixed = (theta.array().pow(1.0 - s) * target.array().pow(s)).matrix();
  return mixed / lp_norm(mixed, blocknorm_exponent(*cfg.q_block));
}

inline bool increased(double now, double before) {
  return std::isfinite(before) && now > before + 1e-9 * std::max(1.0, std::abs(before));
}

struct Evaluation {
  double primal;
  double dual;
  double gap;
};

/*
 * Primal, dual and gap from the solver's cached gradients, so that no
 * kernel matrix has to be multiplied again: alpha^T K_m alpha = 2 S_m and
 * the training decision values are g_hat + b.
 */
inline Evaluation evaluate(DualSolver& solver, const MklConfig& cfg, const Vector& y) {
  if (cfg.q_block) {
    // No duality certificate for the block-norm regime; the SVM dual value is tracked instead.
    const double v = solver.objective();
    return {v, v, std::numeric_limits<double>::quiet_NaN()};
  }
  const SolverState& st = solver.state();
  const Vector quad = 2.0 * st.S_m;
  const Vector& theta = solver.theta();
  const Vector w2 = theta.array().square().matrix().cwiseProduct(quad);
  const Vector f = st.g_hat.array() + solver.bias();
  const double P = cfg.C * hinge_sum(f, y) + mixing_regularizer(w2, theta);
  check_dual_feasible(st.alpha, y, cfg.C);
  const double D = y.dot(st.alpha) - 0.5 * positive_part_norm(quad, cfg.p.conjugate());
  return {P, D, relative_gap(P, D)};
}

inline Vector floored(const Vector& theta, double floor) {
  return theta.cwiseMax(floor * theta.maxCoeff());
}

/// ||w_m||^2 = theta_m^2 alpha^T K_m alpha from the cached gradients, with floored theta.
inline Vector cached_w_norms(DualSolver& solver, double floor) {
  const SolverState& st = solver.state();
  return 2.0 * floored(solver.theta(), floor).array().square().matrix().cwiseProduct(st.S_m);
}

inline void record(TrainingReport& r, const Evaluation& e, const Vector& theta) {
  r.primal_trace.push_back(e.primal);
  r.dual_trace.push_back(e.dual);
  r.gap_trace.push_back(e.gap);
  r.theta_trace.push_back(theta);
  r.final_gap = e.gap;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void check_inputs(const KernelStack& stack, const Vector& y, const MklConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(y.size()) != stack.n()) throw ValidationError("label count does not match kernel size");
  validate_labels(y);
}

}  // namespace detail

/*
 * Alternate a full SVM solve at fixed theta with the closed-form theta
 * step. Stops when the relative duality gap or the relative change of the
 * primal objective drops below epsilon_mkl. If a theta step is followed by
 * a higher primal value the SVM is re-solved with a ten times tighter
 * tolerance, at most max_escalations times over the run.
 */
inline MklModel train_wrapper(const KernelStack& stack, const Vector& y, const MklConfig& cfg) {
  detail::check_inputs(stack, y, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t M = stack.size();

  MklModel model;
  model.config = cfg;
  for (const auto& K : stack) model.kernel_names.push_back(K.name());
  model.theta = detail::initial_theta(cfg, M);
  model.alpha = Vector::Zero(static_cast<Eigen::Index>(stack.n()));
  TrainingReport& rep = model.report;
  double eps = cfg.epsilon_svm;
  double prev = std::numeric_limits<double>::infinity();

  // One solver object across outer iterations: changing theta keeps alpha
  // as the warm start.
  DualSolver solver(stack, y, model.theta, cfg.svm(eps));
  auto solve = [&] {
    try {
      solver.solve();
    } catch (const SvmNonConvergence& e) {
      MklModel best = model;
      best.alpha = e.best().alpha;
      best.bias = e.best().bias;
      best.report.svm_iterations = solver.iterations();
      best.report.wall_time_seconds = detail::seconds_since(t0);
      throw MklNonConvergence(std::string("inner SVM did not converge: ") + e.what(), std::move(best));
    }
    rep.svm_iterations = solver.iterations();
  };
  const bool check_descent = !cfg.q_block;
  double step = cfg.block_step;
  double prev_primal = std::numeric_limits<double>::quiet_NaN();
  double last_change = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t outer = 1; outer <= cfg.max_outer; ++outer) {
    solve();
    auto ev = detail::evaluate(solver, cfg, y);
    while (check_descent && detail::increased(ev.primal, prev) && rep.escalations < cfg.max_escalations) {
      eps /= 10.0;
      ++rep.escalations;
      solver.set_epsilon(eps);
      solve();
      ev = detail::evaluate(solver, cfg, y);
    }
    model.alpha = solver.alpha();
    model.bias = solver.bias();
    rep.outer_iterations = outer;
    rep.final_epsilon_svm = eps;
    detail::record(rep, ev, model.theta);

    const bool primal_went_up = check_descent && detail::increased(ev.primal, prev);
    const bool small_gap = !cfg.q_block && ev.gap <= cfg.epsilon_mkl;
    const bool small_change =
        outer > 1 && std::abs(prev - ev.primal) / std::max(1.0, std::abs(ev.primal)) < cfg.epsilon_mkl;
    if (cfg.p.is_infinity() && !cfg.q_block) {
      rep.converged = true;
      break;
    }
    if (small_gap || (small_change && !primal_went_up)) {
      rep.converged = true;
      break;
    }
    if (primal_went_up) {
      rep.wall_time_seconds = detail::seconds_since(t0);
      throw MklStall("primal objective increased after " + std::to_string(rep.escalations) +
                         " precision escalations (outer iteration " + std::to_string(outer) + ")",
                     model);
    }
    prev = ev.primal;
    if (cfg.q_block && cfg.block_step < 1.0) {
      const double change = ev.primal - prev_primal;
      if (std::isfinite(last_change) && change * last_change < 0.0) step = std::max(step / 2.0, 1e-3);
      last_change = change;
      prev_primal = ev.primal;
    }
    model.theta = detail::next_theta(cfg, detail::cached_w_norms(solver, cfg.theta_floor), model.theta, step);
    solver.set_theta(model.theta);
    ++rep.theta_updates;
  }
  rep.wall_time_seconds = detail::seconds_since(t0);
  if (!rep.converged) {
    throw MklNonConvergence("wrapper MKL did not converge within " + std::to_string(cfg.max_outer) + " outer iterations",
                            model);
  }
  return model;
}

/*
 * Interleaved training: the mixing weights are updated from the SVM's
 * running per-kernel terms every callback_interval working-set steps.
 *
 *   S_m = 1/2 sum_i g(m,i) alpha_i,  q_m = 2 theta_m^2 S_m,
 *   L = sum_i y_i alpha_i,  S = sum_m theta_m S_m,
 *   update theta from q_m while |1 - (L-S)/(L_old-S_old)| >= epsilon_mkl.
 *
 * Each time the SVM reaches its KKT tolerance at the current theta counts
 * as one outer iteration: primal, dual and gap are recorded there, and the
 * run ends once the relative gap is within epsilon_mkl. Otherwise theta is
 * updated and the SVM continues from its current alpha.
 */
inline MklModel train_interleaved(const KernelStack& stack, const Vector& y, const MklConfig& cfg) {
  detail::check_inputs(stack, y, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t M = stack.size();

  MklModel model;
  model.config = cfg;
  for (const auto& K : stack) model.kernel_names.push_back(K.name());
  model.theta = detail::initial_theta(cfg, M);
  TrainingReport& rep = model.report;
  double eps = cfg.epsilon_svm;
  DualSolver solver(stack, y, model.theta, cfg.svm(eps));
  const bool fixed_theta = cfg.p.is_infinity() && !cfg.q_block;

  std::optional<double> omega_old;
  double last_ratio = std::numeric_limits<double>::infinity();
  double prev = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;

  auto snapshot = [&] {
    model.alpha = solver.alpha();
    model.bias = solver.bias();
    model.theta = solver.theta();
    rep.svm_iterations = solver.iterations();
    rep.final_epsilon_svm = eps;
    rep.wall_time_seconds = detail::seconds_since(t0);
  };

  // One mixing step; returns the relative change of L - S since the last callback.
  auto mixing_step = [&](bool force) {
    const SolverState& st = solver.state();
    const double omega = st.L - st.S;
    double ratio = std::numeric_limits<double>::infinity();
    if (omega_old) {
      const double denom = std::copysign(std::max(std::abs(*omega_old), 1e-12), *omega_old);
      ratio = std::abs(1.0 - omega / denom);
    }
    omega_old = omega;
    last_ratio = ratio;
    if (!force && ratio < cfg.epsilon_mkl) return;
    const Vector q = 2.0 * detail::floored(solver.theta(), cfg.theta_floor).array().square().matrix().cwiseProduct(st.S_m);
    if (!(q.maxCoeff() > 0.0)) return;  // alpha = 0: nothing to learn from yet
    if (cfg.q_block && (q.array() <= 0.0).any()) return;
    solver.set_theta(detail::next_theta(cfg, q, solver.theta(), cfg.block_step));
    ++rep.theta_updates;
  };

  while (true) {
    if (!solver.step()) {
      const auto ev = detail::evaluate(solver, cfg, y);
      if (!cfg.q_block && detail::increased(ev.primal, prev)) {
        if (rep.escalations < cfg.max_escalations) {
          eps /= 10.0;
          ++rep.escalations;
          solver.set_epsilon(eps);
          continue;
        }
        snapshot();
        throw MklStall("primal objective increased after " + std::to_string(rep.escalations) +
                           " precision escalations (outer iteration " + std::to_string(rep.outer_iterations) + ")",
                       model);
      }
      ++rep.outer_iterations;
      detail::record(rep, ev, solver.theta());
      const bool done = fixed_theta || (cfg.q_block ? last_ratio < cfg.epsilon_mkl : ev.gap <= cfg.epsilon_mkl);
      if (done) {
        rep.converged = true;
        snapshot();
        return model;
      }
      if (rep.outer_iterations >= cfg.max_outer) {
        snapshot();
        throw MklNonConvergence(
            "interleaved MKL did not converge within " + std::to_string(cfg.max_outer) + " outer iterations", model);
      }
      prev = ev.primal;
      mixing_step(true);
      continue;
    }
    if (solver.iterations() >= cfg.max_svm_iterations) {
      snapshot();
      throw MklNonConvergence("interleaved MKL hit the SVM iteration cap", model);
    }
    if (!fixed_theta && ++steps % cfg.callback_interval == 0) mixing_step(false);
  }
}

inline MklModel train(const KernelStack& stack, const Vector& y, const MklConfig& cfg) {
  return cfg.mode == TrainingMode::wrapper ? train_wrapper(stack, y, cfg) : train_interleaved(stack, y, cfg);
}

}  // namespace lpmkl
