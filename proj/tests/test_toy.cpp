#include <gtest/gtest.h>

#include <cmath>

#include "lpmkl/rng.hpp"
#include "lpmkl/sweep.hpp"
#include "lpmkl/toy.hpp"
#include "oracles.hpp"

using namespace lpmkl;
using namespace lpmkl::toy;

TEST(Toy, BayesErrorAtDefaultRho) {
  EXPECT_NEAR(bayes_error(1.75), 0.0401, 5e-5);
  // Phi(-1.75) from standard normal tables, 15 digits.
  EXPECT_NEAR(bayes_error(1.75), 0.040059156863817, 1e-14);
  EXPECT_LT(bayes_error(10.0), 1e-20);
  EXPECT_NEAR(bayes_error(1e-12), 0.5, 1e-12);
  EXPECT_THROW(bayes_error(0.0), ValidationError);
}

TEST(Toy, ModelErrorExamples) {
  const Vector truth = (Vector(2) << 1, 1).finished();
  EXPECT_NEAR(model_error((Vector(2) << 1, 0).finished(), truth), std::sqrt(2.0 - std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(model_error((Vector(2) << 1, 0).finished(), truth), 0.7654, 5e-5);
  EXPECT_NEAR(model_error((Vector(2) << 1, 0).finished(), (Vector(2) << 0, 1).finished()), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(model_error(truth * 3.7, truth), 0.0, 1e-15);
  EXPECT_THROW(model_error(Vector::Zero(2), truth), ValidationError);
}

TEST(Toy, LeadingOnes) {
  EXPECT_EQ(leading_ones(4, 0.5), (std::vector<int>{1, 1, 0, 0}));
  EXPECT_EQ(leading_ones(3, 0.0), (std::vector<int>{1, 1, 1}));
  EXPECT_EQ(make_config(50, 0.98).theta_true[0], 1);
  EXPECT_DOUBLE_EQ(make_config(50, 0.98).nu(), 0.98);
}

TEST(Toy, ClassMeanHasNormRho) {
  const auto c = make_config(20, 0.75);
  const Vector mu = class_mean(c);
  EXPECT_NEAR(mu.norm(), c.rho, 1e-14);
  EXPECT_EQ(mu.tail(15), Vector::Zero(15));
}

TEST(Toy, SameSeedSameData) {
  auto c = make_config(8, 0.5);
  c.n_train = 30;
  const auto a = generate_toy(c), b = generate_toy(c);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
  c.seed = 2;
  EXPECT_NE(generate_toy(c).X, a.X);
}

TEST(Toy, BalancedLabelsAndEmpiricalMeans) {
  auto c = make_config(6, 0.5);
  c.n_train = 4000;
  c.n_validate = c.n_test = 2;
  const auto data = generate_toy(c);
  EXPECT_EQ(data.y.sum(), 0.0);
  const Vector mu = class_mean(c);
  const Vector signed_mean = (data.X.array().colwise() * data.y.array()).colwise().mean().transpose();
  // Each coordinate of y*x is mu_j + N(0,1): three standard errors.
  const double se = 1.0 / std::sqrt(4000.0);
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(signed_mean[j], mu[j], 3.0 * se) << j;
  Rng rng(1);
  EXPECT_THROW(generate_toy(c, 3, rng), ValidationError);
}

TEST(Toy, FeatureKernelsAreNormalizedLinearBlocks) {
  oracle::Random rnd(31);
  const Matrix X = rnd.normal_matrix(10, 5);
  const auto fk = feature_kernels(X, 2);
  ASSERT_EQ(fk.stack.size(), 3u);
  EXPECT_EQ(fk.stack[2].name(), "f4");
  EXPECT_EQ(fk.stack[0].name(), "f0-1");
  const Matrix K0 = X.leftCols(2) * X.leftCols(2).transpose();
  EXPECT_NEAR(K0.trace() / 10.0 - K0.mean(), fk.denominators[0], 1e-12);
  EXPECT_LT((fk.stack[0].values() - K0 / fk.denominators[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rng, DeterministicStreams) {
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
  EXPECT_NE(derive_seed(1, {0}), derive_seed(1, {1}));
  EXPECT_NE(derive_seed(1, {0, 1}), derive_seed(1, {1, 0}));
  EXPECT_EQ(derive_seed(9, {3, 4}), derive_seed(9, {3, 4}));
  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(8);
  std::vector<double> v(20000);
  for (auto& x : v) x = r.normal();
  const auto [mean, se] = mean_and_stderr(v);
  EXPECT_NEAR(mean, 0.0, 4.0 * se);
  EXPECT_NEAR(se * std::sqrt(20000.0), 1.0, 0.03);
}

TEST(Sweep, MeanAndStderr) {
  const auto [m, s] = mean_and_stderr({1.0, 2.0, 3.0, 6.0});
  EXPECT_DOUBLE_EQ(m, 3.0);
  EXPECT_NEAR(s, std::sqrt(14.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(mean_and_stderr({2.0}).second, 0.0);
  EXPECT_TRUE(std::isnan(mean_and_stderr({}).first));
}

TEST(Sweep, DefaultGrids) {
  const auto Cs = default_C_grid();
  ASSERT_EQ(Cs.size(), 9u);
  EXPECT_DOUBLE_EQ(Cs.front(), 1e-4);
  EXPECT_DOUBLE_EQ(Cs.back(), 1.0);
  EXPECT_EQ(default_p_grid().size(), 5u);
}

namespace {

SweepConfig small_sweep(std::size_t jobs) {
  SweepConfig c;
  for (double nu : {0.0, 0.75}) {
    auto t = make_config(8, nu);
    t.n_train = 20;
    t.n_validate = t.n_test = 200;
    t.repetitions = 3;
    t.seed = 40 + static_cast<std::uint64_t>(nu * 4);
    c.scenarios.push_back(t);
  }
  c.ps = {NormParameter::one(), NormParameter::finite(2.0), NormParameter::infinity()};
  c.Cs = {0.01, 0.1, 1.0};
  c.jobs = jobs;
  return c;
}

}  // namespace

TEST(Sweep, ResultsIndependentOfThreadCount) {
  const auto one = run_sparsity_sweep(small_sweep(1));
  const auto three = run_sparsity_sweep(small_sweep(3));
  EXPECT_EQ(report_csv(one), report_csv(three));
  ASSERT_EQ(one.rows.size(), 6u);
  for (const auto& row : one.rows) {
    EXPECT_GE(row.test_error, 0.0);
    EXPECT_LE(row.test_error, 1.0);
    EXPECT_EQ(row.repetitions, 3u);
  }
}

TEST(Sweep, CsvHeaderAndRejectsEmptyGrids) {
  const auto rep = run_sparsity_sweep(small_sweep(1));
  EXPECT_EQ(report_csv(rep).rfind("scenario_nu,p,C_selected,test_error,", 0), 0u);
  auto bad = small_sweep(1);
  bad.Cs.clear();
  EXPECT_THROW(run_sparsity_sweep(bad), ValidationError);
  bad = small_sweep(0);
  EXPECT_THROW(run_sparsity_sweep(bad), ValidationError);
}
