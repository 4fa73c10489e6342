// Command-line front end: train, predict, toygen, sweep, bounds, align, normalize.
//
// Exit codes: 0 success, 1 invalid input or I/O failure, 2 training did not
// converge (the best iterate is still written).

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lpmkl/lpmkl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lpmkl;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNotConverged = 2;

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class T>
json to_json(const std::vector<T>& v) {
  json a = json::array();
  for (const auto& x : v) {
    if constexpr (std::is_same_v<T, Vector>) {
      a.push_back(to_json(x));
    } else {
      a.push_back(x);
    }
  }
  return a;
}

void write_json(const fs::path& path, const json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

Vector read_labels(const fs::path& path) {
  const auto toks = io::split_ws(io::read_file(path));
  Vector y(static_cast<Eigen::Index>(toks.size()));
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const double v = io::parse_double(toks[i], path.string());
    if (v != 1.0 && v != -1.0) {
      throw ValidationError("'" + path.string() + "': label " + std::to_string(i) + " is '" + toks[i] +
                            "', expected +1 or -1");
    }
    y[static_cast<Eigen::Index>(i)] = v;
  }
  if (y.size() == 0) throw ValidationError("'" + path.string() + "': no labels");
  return y;
}

std::string format_labels(const Vector& y) {
  std::string out;
  for (Eigen::Index i = 0; i < y.size(); ++i) out += (y[i] > 0 ? "1\n" : "-1\n");
  return out;
}

KernelStack read_stack(const std::vector<std::string>& paths) {
  std::vector<KernelMatrix> kernels;
  for (const auto& p : paths) {
    KernelMatrix K = io::read_kernel(p);
    if (!kernels.empty() && K.n() != kernels.front().n()) {
      throw ValidationError("'" + p + "' is " + std::to_string(K.n()) + "x" + std::to_string(K.n()) + " but '" +
                            paths.front() + "' is " + std::to_string(kernels.front().n()) + "x" +
                            std::to_string(kernels.front().n()));
    }
    for (const auto& other : kernels) {
      if (other.name() == K.name()) throw ValidationError("'" + p + "': duplicate kernel name '" + K.name() + "'");
    }
    kernels.push_back(std::move(K));
  }
  return KernelStack(std::move(kernels));
}

json report_json(const MklModel& m, const std::string& status) {
  const auto& r = m.report;
  json j;
  j["status"] = status;
  j["converged"] = r.converged;
  j["outer_iterations"] = r.outer_iterations;
  j["theta_updates"] = r.theta_updates;
  j["svm_iterations"] = r.svm_iterations;
  j["escalations"] = r.escalations;
  j["final_epsilon_svm"] = r.final_epsilon_svm;
  j["final_gap"] = r.final_gap;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["theta"] = to_json(m.theta);
  j["primal_trace"] = to_json(r.primal_trace);
  j["dual_trace"] = to_json(r.dual_trace);
  j["gap_trace"] = to_json(r.gap_trace);
  j["theta_trace"] = to_json(r.theta_trace);
  return j;
}

json mkl_config_json(const MklConfig& c) {
  json j;
  j["p"] = c.p.to_string();
  j["C"] = c.C;
  j["epsilon_svm"] = c.epsilon_svm;
  j["epsilon_mkl"] = c.epsilon_mkl;
  j["mode"] = to_string(c.mode);
  j["max_outer"] = c.max_outer;
  j["q_block"] = c.q_block ? json(*c.q_block) : json(nullptr);
  j["working_set"] = c.working_set;
  j["shrinking"] = c.shrinking;
  j["max_svm_iterations"] = c.max_svm_iterations;
  j["callback_interval"] = c.callback_interval;
  j["max_escalations"] = c.max_escalations;
  j["theta_floor"] = c.theta_floor;
  if (c.q_block) j["block_step"] = c.block_step;
  return j;
}

NormParameter parse_p(const std::string& s) { return NormParameter::parse(s); }

double parse_number(const std::string& s, const std::string& flag) {
  if (s == "inf" || s == "Inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  return io::parse_double(s, flag);
}

std::string sig5(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5g", v);
  return buf;
}

// Every command fills one of these and sets run; main() maps exceptions to exit codes.
struct Command {
  CLI::App* app = nullptr;
  std::function<int()> run;
  std::string manifest;
  std::function<json()> describe;
};

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> kernels;
  std::string labels, out, report;
  std::string p = "2", mode = "interleaved";
  double C = 1.0, eps_svm = 1e-3, eps_mkl = 1e-3;
  std::size_t max_outer = 200, working_set = 10, callback_interval = 1;
  std::optional<double> q_block;
  bool shrinking = false;
};

MklConfig to_config(const TrainArgs& a) {
  MklConfig c;
  c.p = parse_p(a.p);
  c.C = a.C;
  c.epsilon_svm = a.eps_svm;
  c.epsilon_mkl = a.eps_mkl;
  c.mode = parse_training_mode(a.mode);
  c.max_outer = a.max_outer;
  c.working_set = a.working_set;
  c.callback_interval = a.callback_interval;
  c.q_block = a.q_block;
  c.shrinking = a.shrinking;
  c.validate();
  c.svm(c.epsilon_svm).validate();
  return c;
}

void add_train(CLI::App& root, Command& cmd, TrainArgs& a) {
  auto* app = root.add_subcommand("train", "Train an l_p-norm MKL model");
  cmd.app = app;
  app->add_option("--kernels", a.kernels, "Training kernel files (.km text or .kmb binary)")->required()->check(CLI::ExistingFile);
  app->add_option("--labels", a.labels, "Label file with one +1/-1 per sample")->required()->check(CLI::ExistingFile);
  app->add_option("--out", a.out, "Model output path")->required();
  app->add_option("--report", a.report, "Training report JSON path (default: <out>.report.json)");
  app->add_option("--p", a.p, "Norm parameter: a number >= 1, a fraction such as 4/3, or inf")->capture_default_str();
  app->add_option("--C", a.C, "Soft-margin parameter")->capture_default_str();
  app->add_option("--mode", a.mode, "wrapper or interleaved")->capture_default_str();
  app->add_option("--epsilon-svm", a.eps_svm, "SVM KKT tolerance")->capture_default_str();
  app->add_option("--epsilon-mkl", a.eps_mkl, "Outer tolerance on the relative duality gap")->capture_default_str();
  app->add_option("--max-outer", a.max_outer, "Outer iteration cap")->capture_default_str();
  app->add_option("--working-set", a.working_set, "SVM working-set size (even)")->capture_default_str();
  app->add_option("--callback-interval", a.callback_interval, "Interleaved mode: SVM steps per mixing update")->capture_default_str();
  app->add_option("--q-block", a.q_block, "Use the block-norm update with exponent q > 2 (p is ignored)");
  app->add_flag("--shrinking", a.shrinking, "Enable SVM shrinking");
  cmd.describe = [&a] {
    json j;
    j["command"] = "train";
    j["kernels"] = a.kernels;
    j["labels"] = a.labels;
    j["out"] = a.out;
    j["config"] = mkl_config_json(to_config(a));
    return j;
  };
  cmd.run = [&a] {
    const MklConfig cfg = to_config(a);
    const KernelStack stack = read_stack(a.kernels);
    const Vector y = read_labels(a.labels);
    if (static_cast<std::size_t>(y.size()) != stack.n()) {
      throw ValidationError("'" + a.labels + "' has " + std::to_string(y.size()) + " labels, kernels have " +
                            std::to_string(stack.n()) + " samples");
    }
    const fs::path report = a.report.empty() ? fs::path(a.out + ".report.json") : fs::path(a.report);
    try {
      const MklModel m = train(stack, y, cfg);
      io::write_model(a.out, m);
      write_json(report, report_json(m, "converged"));
      return kOk;
    } catch (const MklNonConvergence& e) {
      io::write_model(a.out, e.best());
      write_json(report, report_json(e.best(), e.what()));
      std::cerr << "lpmkl train: " << e.what() << " (best iterate written to '" << a.out << "')\n";
      return kNotConverged;
    } catch (const MklStall& e) {
      io::write_model(a.out, e.best());
      write_json(report, report_json(e.best(), e.what()));
      std::cerr << "lpmkl train: " << e.what() << " (best iterate written to '" << a.out << "')\n";
      return kNotConverged;
    }
  };
}

// --------------------------------------------------------------- predict

struct PredictArgs {
  std::string model, out;
  std::vector<std::string> kernels;
};

void add_predict(CLI::App& root, Command& cmd, PredictArgs& a) {
  auto* app = root.add_subcommand("predict", "Evaluate a trained model on test kernel rows");
  cmd.app = app;
  app->add_option("--model", a.model, "Model file")->required()->check(CLI::ExistingFile);
  app->add_option("--kernels", a.kernels,
                  "One test-row file per training kernel, in training order (n_test x n_train)")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--out", a.out, "Output CSV with decision values and labels")->required();
  cmd.describe = [&a] {
    json j;
    j["command"] = "predict";
    j["model"] = a.model;
    j["kernels"] = a.kernels;
    j["out"] = a.out;
    return j;
  };
  cmd.run = [&a] {
    const MklModel m = io::read_model(a.model);
    const auto M = static_cast<std::size_t>(m.theta.size());
    auto kernel_label = [&](std::size_t k) {
      return k < m.kernel_names.size() ? "'" + m.kernel_names[k] + "'" : "#" + std::to_string(k + 1);
    };
    if (a.kernels.size() < M) {
      throw ValidationError("model has " + std::to_string(M) + " kernels but only " + std::to_string(a.kernels.size()) +
                            " row files were given; missing kernel " + kernel_label(a.kernels.size()));
    }
    if (a.kernels.size() > M) {
      throw ValidationError("model has " + std::to_string(M) + " kernels but " + std::to_string(a.kernels.size()) +
                            " row files were given");
    }
    std::vector<KernelRows> rows;
    for (std::size_t k = 0; k < M; ++k) {
      rows.push_back(io::read_rows(a.kernels[k]));
      if (rows.back().cols() != static_cast<std::size_t>(m.alpha.size())) {
        throw ValidationError("'" + a.kernels[k] + "' (kernel " + kernel_label(k) + ") has " +
                              std::to_string(rows.back().cols()) + " columns, model was trained on " +
                              std::to_string(m.alpha.size()) + " samples");
      }
    }
    const Vector f = predict(m, rows);
    std::string out = "decision,label\n";
    for (Eigen::Index i = 0; i < f.size(); ++i) out += io::format_double(f[i]) + (f[i] >= 0.0 ? ",1\n" : ",-1\n");
    io::write_atomic(a.out, out);
    return kOk;
  };
}

// ---------------------------------------------------------------- toygen

struct ToygenArgs {
  std::size_t d = 50, n = 100, block = 1;
  double nu = 0.0, rho = 1.75;
  std::string theta_true;
  std::uint64_t seed = 1;
  std::string out = "toy.csv", kernel_dir;
};

toy::ToyConfig toy_config(const ToygenArgs& a) {
  toy::ToyConfig c;
  c.d = a.d;
  c.rho = a.rho;
  c.seed = a.seed;
  c.n_train = a.n;
  c.n_validate = c.n_test = 2;
  if (!a.theta_true.empty()) {
    if (a.theta_true.size() != a.d) throw ValidationError("--theta-true must have exactly d characters");
    for (char ch : a.theta_true) {
      if (ch != '0' && ch != '1') throw ValidationError("--theta-true must consist of 0 and 1");
      c.theta_true.push_back(ch - '0');
    }
  } else {
    c.theta_true = toy::leading_ones(a.d, a.nu);
  }
  c.validate();
  return c;
}

void add_toygen(CLI::App& root, Command& cmd, ToygenArgs& a) {
  auto* app = root.add_subcommand("toygen", "Generate a synthetic two-Gaussian dataset");
  cmd.app = app;
  app->add_option("--d", a.d, "Feature count")->capture_default_str();
  app->add_option("--n", a.n, "Sample count (even; half per class)")->capture_default_str();
  app->add_option("--nu", a.nu, "Fraction of uninformative features (leading-ones layout)")->capture_default_str();
  app->add_option("--theta-true", a.theta_true, "Explicit 0/1 pattern of length d, overrides --nu");
  app->add_option("--rho", a.rho, "Mean separation scale")->capture_default_str();
  app->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
  app->add_option("--out", a.out, "Dataset CSV (label then features)")->capture_default_str();
  app->add_option("--kernel-dir", a.kernel_dir,
                  "Also write multiplicatively normalized per-block linear kernels and labels.txt here");
  app->add_option("--block-size", a.block, "Features per kernel for --kernel-dir")->capture_default_str();
  cmd.describe = [&a] {
    const auto c = toy_config(a);
    json j;
    j["command"] = "toygen";
    j["d"] = c.d;
    j["n"] = a.n;
    j["nu"] = c.nu();
    j["theta_true"] = c.theta_true;
    j["rho"] = c.rho;
    j["seed"] = c.seed;
    j["out"] = a.out;
    j["kernel_dir"] = a.kernel_dir;
    j["block_size"] = a.block;
    return j;
  };
  cmd.run = [&a] {
    const auto cfg = toy_config(a);
    const auto data = toy::generate_toy(cfg);
    std::string csv = "y";
    for (std::size_t j = 0; j < cfg.d; ++j) csv += ",x" + std::to_string(j + 1);
    csv += "\n";
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
      csv += data.y[i] > 0 ? "1" : "-1";
      for (Eigen::Index j = 0; j < data.X.cols(); ++j) csv += "," + io::format_double(data.X(i, j));
      csv += "\n";
    }
    io::write_atomic(a.out, csv);
    if (!a.kernel_dir.empty()) {
      fs::create_directories(a.kernel_dir);
      const auto fk = toy::feature_kernels(data.X, a.block);
      for (const auto& K : fk.stack) io::write_kernel(fs::path(a.kernel_dir) / (K.name() + ".km"), K);
      io::write_atomic(fs::path(a.kernel_dir) / "labels.txt", format_labels(data.y));
    }
    return kOk;
  };
}

// ----------------------------------------------------------------- sweep

struct SweepArgs {
  std::vector<double> nus{0.0};
  std::vector<std::string> ps{"1", "4/3", "2", "4", "inf"};
  std::vector<double> Cs;
  std::size_t d = 50, n_train = 50, n_validate = 10'000, n_test = 10'000, reps = 100, jobs = 1, block = 1;
  std::size_t max_outer = 200;
  double rho = 1.75, eps_svm = 1e-3, eps_mkl = 1e-3;
  std::uint64_t seed = 1;
  std::string mode = "wrapper", out = "sweep.csv";
};

toy::SweepConfig sweep_config(const SweepArgs& a) {
  toy::SweepConfig c;
  for (std::size_t s = 0; s < a.nus.size(); ++s) {
    toy::ToyConfig t = toy::make_config(a.d, a.nus[s]);
    t.rho = a.rho;
    t.n_train = a.n_train;
    t.n_validate = a.n_validate;
    t.n_test = a.n_test;
    t.repetitions = a.reps;
    t.seed = derive_seed(a.seed, {s});
    c.scenarios.push_back(std::move(t));
  }
  c.ps.clear();
  for (const auto& p : a.ps) c.ps.push_back(parse_p(p));
  if (!a.Cs.empty()) c.Cs = a.Cs;
  c.training.mode = parse_training_mode(a.mode);
  c.training.epsilon_svm = a.eps_svm;
  c.training.epsilon_mkl = a.eps_mkl;
  c.training.max_outer = a.max_outer;
  c.block_size = a.block;
  c.jobs = a.jobs;
  c.validate();
  return c;
}

void add_sweep(CLI::App& root, Command& cmd, SweepArgs& a) {
  auto* app = root.add_subcommand("sweep", "Grid search over (p, C) on synthetic data at several sparsity levels");
  cmd.app = app;
  app->add_option("--nu", a.nus, "Sparsity levels (fraction of uninformative features)")->capture_default_str();
  app->add_option("--p", a.ps, "Norm parameters")->capture_default_str();
  app->add_option("--C", a.Cs, "C grid (default 10^-4, 10^-3.5, ..., 1)");
  app->add_option("--d", a.d, "Feature count")->capture_default_str();
  app->add_option("--n-train", a.n_train, "Training sample size")->capture_default_str();
  app->add_option("--n-validate", a.n_validate, "Validation sample size")->capture_default_str();
  app->add_option("--n-test", a.n_test, "Test sample size")->capture_default_str();
  app->add_option("--repetitions", a.reps, "Repetitions per sparsity level")->capture_default_str();
  app->add_option("--rho", a.rho, "Mean separation scale")->capture_default_str();
  app->add_option("--mode", a.mode, "wrapper or interleaved")->capture_default_str();
  app->add_option("--epsilon-svm", a.eps_svm, "SVM KKT tolerance")->capture_default_str();
  app->add_option("--epsilon-mkl", a.eps_mkl, "Outer tolerance")->capture_default_str();
  app->add_option("--max-outer", a.max_outer, "Outer iteration cap")->capture_default_str();
  app->add_option("--block-size", a.block, "Features per kernel")->capture_default_str();
  app->add_option("--jobs", a.jobs, "Worker threads")->capture_default_str();
  app->add_option("--seed", a.seed, "Base RNG seed")->capture_default_str();
  app->add_option("--out", a.out, "Summary CSV")->capture_default_str();
  cmd.describe = [&a] {
    const auto c = sweep_config(a);
    json j;
    j["command"] = "sweep";
    j["seed"] = a.seed;
    json sc = json::array();
    for (const auto& s : c.scenarios) {
      json t;
      t["nu"] = s.nu();
      t["theta_true"] = s.theta_true;
      t["d"] = s.d;
      t["rho"] = s.rho;
      t["n_train"] = s.n_train;
      t["n_validate"] = s.n_validate;
      t["n_test"] = s.n_test;
      t["repetitions"] = s.repetitions;
      t["seed"] = s.seed;
      sc.push_back(t);
    }
    j["scenarios"] = sc;
    json ps = json::array();
    for (const auto& p : c.ps) ps.push_back(p.to_string());
    j["p"] = ps;
    j["C"] = c.Cs;
    j["training"] = mkl_config_json(c.training);
    j["block_size"] = c.block_size;
    j["jobs"] = c.jobs;
    j["out"] = a.out;
    return j;
  };
  cmd.run = [&a] {
    const auto report = toy::run_sparsity_sweep(sweep_config(a));
    io::write_atomic(a.out, toy::report_csv(report));
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return kOk;
  };
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  std::vector<double> Ms{2}, ns{100};
  std::vector<std::string> ps{"1"};
  double R = 1.0, L = 1.0, delta = 0.05, gamma = 1.0, risk = 0.0;
  std::string out;
};

void add_bounds(CLI::App& root, Command& cmd, BoundsArgs& a) {
  auto* app = root.add_subcommand("bounds", "Evaluate Rademacher generalization bounds over grids of M, n and p");
  cmd.app = app;
  app->add_option("--M", a.Ms, "Kernel counts (> 1)")->capture_default_str();
  app->add_option("--n", a.ns, "Sample sizes")->capture_default_str();
  app->add_option("--p", a.ps, "Norm parameters (>= 1 or inf)")->capture_default_str();
  app->add_option("--R", a.R, "Bound on sqrt(k(x,x))")->capture_default_str();
  app->add_option("--L", a.L, "Lipschitz constant of the loss")->capture_default_str();
  app->add_option("--delta", a.delta, "Confidence parameter")->capture_default_str();
  app->add_option("--gamma", a.gamma, "Margin for the radius-margin bound")->capture_default_str();
  app->add_option("--empirical-risk", a.risk, "Empirical risk added to the risk bounds")->capture_default_str();
  app->add_option("--out", a.out, "CSV output (default: print the Rademacher bound for a single grid point)");
  cmd.describe = [&a] {
    json j;
    j["command"] = "bounds";
    j["M"] = a.Ms;
    j["n"] = a.ns;
    j["p"] = a.ps;
    j["R"] = a.R;
    j["L"] = a.L;
    j["delta"] = a.delta;
    j["gamma"] = a.gamma;
    j["empirical_risk"] = a.risk;
    j["out"] = a.out;
    return j;
  };
  cmd.run = [&a] {
    const bool single = a.Ms.size() == 1 && a.ns.size() == 1 && a.ps.size() == 1;
    if (single && a.out.empty()) {
      std::cout << sig5(bounds::lp_rademacher_bound(a.Ms[0], a.R, a.ns[0], parse_number(a.ps[0], "--p"))) << "\n";
      return kOk;
    }
    std::string csv = "M,n,p,lp_rademacher,generalization,radius_margin,uniform_case,sparse_case,cortes\n";
    for (double M : a.Ms)
      for (double n : a.ns)
        for (const auto& ps : a.ps) {
          bounds::BoundInputs in{M, n, a.R, parse_number(ps, "--p"), a.gamma, a.delta, a.L};
          csv += io::format_double(M) + "," + io::format_double(n) + "," + ps + "," +
                 io::format_double(bounds::lp_rademacher_bound(M, a.R, n, in.p)) + "," +
                 io::format_double(bounds::generalization_bound(in, a.risk)) + "," +
                 io::format_double(bounds::radius_margin_bound(in, a.risk)) + "," +
                 io::format_double(bounds::case_study_bounds(in, bounds::Scenario::uniform, a.risk)) + "," +
                 io::format_double(bounds::case_study_bounds(in, bounds::Scenario::sparse, a.risk)) + "," +
                 io::format_double(bounds::cortes_bound(M, a.R, n, in.p)) + "\n";
        }
    if (a.out.empty()) {
      std::cout << csv;
    } else {
      io::write_atomic(a.out, csv);
    }
    return kOk;
  };
}

// ----------------------------------------------------------------- align

enum class Normalization { none, multiplicative, spherical };

Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "multiplicative") return Normalization::multiplicative;
  if (s == "spherical") return Normalization::spherical;
  throw ValidationError("normalization must be none, multiplicative or spherical, got '" + s + "'");
}

KernelMatrix apply_normalization(const KernelMatrix& K, Normalization n) {
  switch (n) {
    case Normalization::multiplicative:
      return normalize_multiplicative(K);
    case Normalization::spherical:
      return normalize_spherical(K);
    default:
      return K;
  }
}

struct AlignArgs {
  std::vector<std::string> kernels;
  std::string normalize = "multiplicative", out;
};

void add_align(CLI::App& root, Command& cmd, AlignArgs& a) {
  auto* app = root.add_subcommand("align", "Pairwise alignment matrix of centered kernels");
  cmd.app = app;
  app->add_option("--kernels", a.kernels, "Kernel files")->required()->check(CLI::ExistingFile);
  app->add_option("--normalize", a.normalize, "none, multiplicative or spherical (applied before centering)")
      ->capture_default_str();
  app->add_option("--out", a.out, "CSV output (default: stdout)");
  cmd.describe = [&a] {
    json j;
    j["command"] = "align";
    j["kernels"] = a.kernels;
    j["normalize"] = a.normalize;
    j["out"] = a.out;
    return j;
  };
  cmd.run = [&a] {
    const auto how = parse_normalization(a.normalize);
    const KernelStack raw = read_stack(a.kernels);
    std::vector<KernelMatrix> ks;
    for (const auto& K : raw) ks.push_back(apply_normalization(K, how));
    const KernelStack stack(std::move(ks));
    const Matrix A = alignment_matrix(stack);
    std::string csv = "kernel";
    for (const auto& K : stack) csv += "," + K.name();
    csv += "\n";
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      csv += stack[static_cast<std::size_t>(i)].name();
      for (Eigen::Index j = 0; j < A.cols(); ++j) csv += "," + io::format_double(A(i, j));
      csv += "\n";
    }
    if (a.out.empty()) {
      std::cout << csv;
    } else {
      io::write_atomic(a.out, csv);
    }
    return kOk;
  };
}

// ------------------------------------------------------------- normalize

struct NormalizeArgs {
  std::string in, out, method = "multiplicative";
  bool center = false;
};

void add_normalize(CLI::App& root, Command& cmd, NormalizeArgs& a) {
  auto* app = root.add_subcommand("normalize", "Normalize (and optionally center) a kernel file");
  cmd.app = app;
  app->add_option("--kernel", a.in, "Input kernel file")->required()->check(CLI::ExistingFile);
  app->add_option("--out", a.out, "Output kernel file (.kmb selects binary)")->required();
  app->add_option("--method", a.method, "none, multiplicative or spherical")->capture_default_str();
  app->add_flag("--center", a.center, "Center after normalizing");
  cmd.describe = [&a] {
    json j;
    j["command"] = "normalize";
    j["kernel"] = a.in;
    j["out"] = a.out;
    j["method"] = a.method;
    j["center"] = a.center;
    return j;
  };
  cmd.run = [&a] {
    KernelMatrix K = apply_normalization(io::read_kernel(a.in), parse_normalization(a.method));
    if (a.center) K = center(K);
    io::write_kernel(a.out, K);
    return kOk;
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l_p-norm multiple kernel learning"};
  app.require_subcommand(1);

  TrainArgs train_args;
  PredictArgs predict_args;
  ToygenArgs toygen_args;
  SweepArgs sweep_args;
  BoundsArgs bounds_args;
  AlignArgs align_args;
  NormalizeArgs normalize_args;
  std::vector<Command> commands(7);
  add_train(app, commands[0], train_args);
  add_predict(app, commands[1], predict_args);
  add_toygen(app, commands[2], toygen_args);
  add_sweep(app, commands[3], sweep_args);
  add_bounds(app, commands[4], bounds_args);
  add_align(app, commands[5], align_args);
  add_normalize(app, commands[6], normalize_args);
  for (auto& c : commands) {
    c.app->add_option("--manifest", c.manifest, "Write the resolved configuration as JSON");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    const std::string name = c.app->get_name();
    try {
      if (!c.manifest.empty()) write_json(c.manifest, c.describe());
      return c.run();
    } catch (const NonConvergenceError& e) {
      std::cerr << "lpmkl " << name << ": " << e.what() << "\n";
      return kNotConverged;
    } catch (const StallError& e) {
      std::cerr << "lpmkl " << name << ": " << e.what() << "\n";
      return kNotConverged;
    } catch (const std::exception& e) {
      std::cerr << "lpmkl " << name << ": " << e.what() << "\n";
      return kInvalid;
    }
  }
  return kInvalid;
}
