#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "lpmkl/io_util.hpp"
#include "lpmkl/mkl.hpp"
#include "lpmkl/rng.hpp"
#include "lpmkl/toy.hpp"

namespace lpmkl::toy {

/// C in 10^{-4, -3.5, ..., 0}.
inline std::vector<double> default_C_grid() {
  std::vector<double> out;
  for (int k = -8; k <= 0; ++k) out.push_back(std::pow(10.0, k / 2.0));
  return out;
}

inline std::vector<NormParameter> default_p_grid() {
  return {NormParameter::one(), NormParameter::finite(4.0 / 3.0), NormParameter::finite(2.0),
          NormParameter::finite(4.0), NormParameter::infinity()};
}

struct SweepConfig {
  std::vector<ToyConfig> scenarios;
  std::vector<NormParameter> ps = default_p_grid();
  std::vector<double> Cs = default_C_grid();
  /// Template for every training run; p and C are overwritten per cell.
  MklConfig training = [] {
    MklConfig c;
    c.mode = TrainingMode::wrapper;
    return c;
  }();
  /// Features per kernel; 1 gives one linear kernel per feature.
  std::size_t block_size = 1;
  std::size_t jobs = 1;

  void validate() const {
    if (scenarios.empty()) throw ValidationError("sweep needs at least one scenario");
    if (ps.empty()) throw ValidationError("sweep needs at least one p");
    if (Cs.empty()) throw ValidationError("sweep needs at least one C");
    for (double C : Cs)
      if (!(C > 0.0)) throw ValidationError("every C in the grid must be positive");
    if (block_size == 0) throw ValidationError("block size must be positive");
    if (jobs == 0) throw ValidationError("jobs must be positive");
    for (const auto& s : scenarios) s.validate();
  }
};

/// Outcome for one (scenario, repetition, p).
struct RunResult {
  std::vector<double> validation_errors;  // per C; NaN where training failed outright
  std::size_t selected = 0;               // index into Cs
  double test_error = std::numeric_limits<double>::quiet_NaN();
  double model_error = std::numeric_limits<double>::quiet_NaN();
  Vector theta;
  std::vector<std::string> failures;
  bool ok() const { return !std::isnan(test_error); }
};

struct SummaryRow {
  double nu = 0.0;
  NormParameter p = NormParameter::one();
  double C_selected = 0.0;
  double test_error = 0.0;
  double test_error_stderr = 0.0;
  double model_error = 0.0;
  double model_error_stderr = 0.0;
  std::size_t repetitions = 0;
};

struct ExperimentReport {
  SweepConfig config;
  // runs[s][r][k]: scenario s, repetition r, p index k
  std::vector<std::vector<std::vector<RunResult>>> runs;
  std::vector<SummaryRow> rows;
  std::vector<std::string> warnings;

  const RunResult& run(std::size_t s, std::size_t r, std::size_t k) const { return runs.at(s).at(r).at(k); }
};

/// Sample mean and standard error of the mean.
inline std::pair<double, double> mean_and_stderr(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

namespace detail {

/// Data and results for one repetition of one scenario, every p and C.
inline std::vector<RunResult> run_cell(const SweepConfig& cfg, std::size_t s, std::size_t r) {
  const ToyConfig& sc = cfg.scenarios[s];
  Rng rng(derive_seed(sc.seed, {r}));
  const Dataset train = generate_toy(sc, sc.n_train, rng);
  const Dataset val = generate_toy(sc, sc.n_validate, rng);
  const Dataset test = generate_toy(sc, sc.n_test, rng);
  const FeatureKernels fk = feature_kernels(train.X, cfg.block_size);
  const Vector truth = block_truth(sc, fk.blocks);

  std::vector<RunResult> out(cfg.ps.size());
  for (std::size_t k = 0; k < cfg.ps.size(); ++k) {
    RunResult& res = out[k];
    res.validation_errors.assign(cfg.Cs.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<MklModel> models(cfg.Cs.size());
    for (std::size_t c = 0; c < cfg.Cs.size(); ++c) {
      MklConfig mc = cfg.training;
      mc.p = cfg.ps[k];
      mc.C = cfg.Cs[c];
      const auto tag = "p=" + mc.p.to_string() + " C=" + io::format_double(mc.C) + ": ";
      try {
        models[c] = lpmkl::train(fk.stack, train.y, mc);
      } catch (const MklNonConvergence& e) {
        res.failures.push_back(tag + e.what() + " (using best iterate)");
        models[c] = e.best();
      } catch (const MklStall& e) {
        res.failures.push_back(tag + e.what() + " (using best iterate)");
        models[c] = e.best();
      } catch (const Error& e) {
        res.failures.push_back(tag + e.what());
        continue;
      }
      const Vector f = linear_decision_values(train.X, fk, models[c].theta, models[c].alpha, models[c].bias, val.X);
      res.validation_errors[c] = error_rate(f, val.y);
    }
    // Smallest validation error; ties go to the smaller C.
    std::size_t best = cfg.Cs.size();
    for (std::size_t c = 0; c < cfg.Cs.size(); ++c) {
      if (std::isnan(res.validation_errors[c])) continue;
      if (best == cfg.Cs.size() || res.validation_errors[c] < res.validation_errors[best]) best = c;
    }
    if (best == cfg.Cs.size()) continue;
    res.selected = best;
    const MklModel& m = models[best];
    res.theta = m.theta;
    res.test_error = error_rate(linear_decision_values(train.X, fk, m.theta, m.alpha, m.bias, test.X), test.y);
    res.model_error = model_error(m.theta, truth);
  }
  return out;
}

}  // namespace detail

/*
 * Grid search over (p, C) on synthetic data. Every (scenario, repetition)
 * pair draws its own train/validation/test sets from a stream seeded by
 * (scenario seed, repetition), so results do not depend on jobs.
 */
inline ExperimentReport run_sparsity_sweep(const SweepConfig& cfg) {
  cfg.validate();
  ExperimentReport rep;
  rep.config = cfg;
  struct Cell {
    std::size_t s, r;
  };
  std::vector<Cell> cells;
  rep.runs.resize(cfg.scenarios.size());
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
    rep.runs[s].resize(cfg.scenarios[s].repetitions);
    for (std::size_t r = 0; r < cfg.scenarios[s].repetitions; ++r) cells.push_back({s, r});
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        rep.runs[cells[i].s][cells[i].r] = detail::run_cell(cfg, cells[i].s, cells[i].r);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        rep.runs[cells[i].s][cells[i].r].assign(cfg.ps.size(), RunResult{});
      }
    }
  };
  const std::size_t workers = std::min(cfg.jobs, cells.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty()) {
      rep.warnings.push_back("scenario " + std::to_string(cells[i].s) + " repetition " + std::to_string(cells[i].r) +
                             ": " + errors[i]);
    }
  }

  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
    const double nu = cfg.scenarios[s].nu();
    for (std::size_t k = 0; k < cfg.ps.size(); ++k) {
      std::vector<double> te, me;
      std::map<std::size_t, std::size_t> picks;
      for (std::size_t r = 0; r < cfg.scenarios[s].repetitions; ++r) {
        const RunResult& res = rep.runs[s][r][k];
        for (const auto& f : res.failures) {
          rep.warnings.push_back("scenario " + std::to_string(s) + " repetition " + std::to_string(r) + ": " + f);
        }
        if (!res.ok()) continue;
        te.push_back(res.test_error);
        me.push_back(res.model_error);
        ++picks[res.selected];
        if (cfg.Cs.size() > 2 && (res.selected == 0 || res.selected + 1 == cfg.Cs.size())) {
          rep.warnings.push_back("scenario " + std::to_string(s) + " repetition " + std::to_string(r) +
                                 " p=" + cfg.ps[k].to_string() + ": selected C=" +
                                 io::format_double(cfg.Cs[res.selected]) + " lies on the grid boundary");
        }
      }
      SummaryRow row;
      row.nu = nu;
      row.p = cfg.ps[k];
      row.repetitions = te.size();
      std::tie(row.test_error, row.test_error_stderr) = mean_and_stderr(te);
      std::tie(row.model_error, row.model_error_stderr) = mean_and_stderr(me);
      // Most frequently selected C; ties go to the smaller C.
      std::size_t mode = 0, count = 0;
      for (auto [c, n] : picks)
        if (n > count) mode = c, count = n;
      row.C_selected = picks.empty() ? std::numeric_limits<double>::quiet_NaN() : cfg.Cs[mode];
      rep.rows.push_back(row);
    }
  }
  return rep;
}

inline std::string report_csv(const ExperimentReport& rep) {
  std::string out =
      "scenario_nu,p,C_selected,test_error,test_error_stderr,model_error,model_error_stderr,repetitions\n";
  for (const auto& row : rep.rows) {
    out += io::format_double(row.nu) + "," + row.p.to_string() + "," + io::format_double(row.C_selected) + "," +
           io::format_double(row.test_error) + "," + io::format_double(row.test_error_stderr) + "," +
           io::format_double(row.model_error) + "," + io::format_double(row.model_error_stderr) + "," +
           std::to_string(row.repetitions) + "\n";
  }
  return out;
}

}  // namespace lpmkl::toy
