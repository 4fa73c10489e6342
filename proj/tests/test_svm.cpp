#include <gtest/gtest.h>

#include <algorithm>

#include "lpmkl/svm.hpp"
#include "oracles.hpp"

using namespace lpmkl;

namespace {

struct TwoPoint {
  KernelStack stack;
  Vector y;
};

/// x = (1 + c, -1 + c), y = (+1, -1), linear kernel.
TwoPoint two_point(double c = 0.0) {
  Matrix X(2, 1);
  X << 1 + c, -1 + c;
  Vector y(2);
  y << 1, -1;
  return {KernelStack({linear_kernel(X)}), y};
}

SvmConfig config(double C, double eps = 1e-12, std::size_t q = 10) {
  SvmConfig c;
  c.C = C;
  c.epsilon = eps;
  c.q = q;
  return c;
}

struct Random {
  KernelStack stack;
  Vector y;
};

Random random_instance(oracle::Random& rnd, int n, int M) {
  std::vector<KernelMatrix> ks;
  for (int m = 0; m < M; ++m) {
    const oracle::Mat A = rnd.normal_matrix(n, rnd.integer(1, 5));
    ks.emplace_back(Matrix(A * A.transpose()), "k" + std::to_string(m));
  }
  return {KernelStack(std::move(ks)), rnd.labels(n)};
}

}  // namespace

TEST(SolveDual, TwoPointClosedForm) {
  const auto t = two_point();
  const auto s = solve_dual(t.stack, Vector::Ones(1), t.y, config(1.0));
  EXPECT_NEAR(s.alpha[0], 0.5, 1e-12);
  EXPECT_NEAR(s.alpha[1], -0.5, 1e-12);
  EXPECT_NEAR(s.bias, 0.0, 1e-12);
  EXPECT_NEAR(s.objective, 0.5, 1e-12);
  EXPECT_EQ(s.support_indices, (std::vector<std::size_t>{0, 1}));
}

TEST(SolveDual, TwoPointClippedAtSmallC) {
  const auto t = two_point();
  const auto s = solve_dual(t.stack, Vector::Ones(1), t.y, config(0.1));
  EXPECT_DOUBLE_EQ(t.y[0] * s.alpha[0], 0.1);
  EXPECT_DOUBLE_EQ(t.y[1] * s.alpha[1], 0.1);
}

TEST(SolveDual, DuplicatedKernelEqualsDoubledWeight) {
  oracle::Random rnd(11);
  const oracle::Mat A = rnd.normal_matrix(12, 3);
  const KernelMatrix K(A * A.transpose(), "a");
  const Vector y = rnd.labels(12);
  const auto two = solve_dual(KernelStack({K, K.renamed("b")}), Vector::Ones(2), y, config(0.7));
  const auto one = solve_dual(KernelStack({K}), Vector::Constant(1, 2.0), y, config(0.7));
  EXPECT_LT((two.alpha - one.alpha).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveDual, InvariantsOnRandomInstances) {
  oracle::Random rnd(12);
  for (int k = 0; k < 20; ++k) {
    const auto inst = random_instance(rnd, rnd.integer(5, 40), rnd.integer(1, 3));
    Vector theta(static_cast<Eigen::Index>(inst.stack.size()));
    for (auto& t : theta) t = rnd.uniform(0.1, 2.0);
    const double C = std::pow(10.0, rnd.uniform(-1, 1));
    const auto s = solve_dual(inst.stack, theta, inst.y, config(C, 1e-6));
    EXPECT_LE(std::abs(s.alpha.sum()), 1e-8 * C * static_cast<double>(inst.y.size()));
    for (Eigen::Index i = 0; i < inst.y.size(); ++i) {
      EXPECT_GE(inst.y[i] * s.alpha[i], -1e-10);
      EXPECT_LE(inst.y[i] * s.alpha[i], C + 1e-10);
    }
    EXPECT_LE(s.kkt_violation, 1e-6);
  }
}

TEST(SolveDual, MatchesEnumerationOracle) {
  oracle::Random rnd(13);
  for (int k = 0; k < 40; ++k) {
    const int n = rnd.integer(2, 7);
    const auto inst = random_instance(rnd, n, 1);
    const double C = rnd.uniform(0.05, 5.0);
    for (std::size_t q : {2u, 4u, 10u}) {
      const auto s = solve_dual(inst.stack, Vector::Ones(1), inst.y, config(C, 1e-10, q));
      const double ref = oracle::dual_qp_max(inst.stack[0].values(), inst.y, C);
      EXPECT_NEAR(s.objective, ref, 1e-7 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(SolveDual, SingleClassRejected) {
  const auto t = two_point();
  EXPECT_THROW(solve_dual(t.stack, Vector::Ones(1), Vector::Ones(2), config(1.0)), ValidationError);
}

TEST(SolveDual, BadThetaRejected) {
  const auto t = two_point();
  EXPECT_THROW(solve_dual(t.stack, Vector::Zero(1), t.y, config(1.0)), ValidationError);
  EXPECT_THROW(solve_dual(t.stack, Vector::Constant(1, -1.0), t.y, config(1.0)), ValidationError);
}

TEST(SolveDual, IterationCapCarriesBestIterate) {
  oracle::Random rnd(14);
  const auto inst = random_instance(rnd, 40, 1);
  SvmConfig c = config(10.0, 1e-10, 2);
  c.max_passes = 3;
  try {
    solve_dual(inst.stack, Vector::Ones(1), inst.y, c);
    FAIL();
  } catch (const SvmNonConvergence& e) {
    EXPECT_EQ(e.best().iterations, 3u);
    EXPECT_GT(e.best().objective, 0.0);
  }
}

TEST(SvmConfig, Validation) {
  SvmConfig c;
  c.q = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SvmConfig{};
  c.C = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SvmConfig{};
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(DualSolver, ObjectiveIsMonotoneAcrossSteps) {
  oracle::Random rnd(15);
  for (int k = 0; k < 10; ++k) {
    const auto inst = random_instance(rnd, 30, 2);
    DualSolver s(inst.stack, inst.y, Vector::Ones(2), config(1.0, 1e-8, k % 2 ? 2 : 10));
    double prev = s.objective();
    while (s.step()) {
      EXPECT_GE(s.objective(), prev - 1e-12);
      prev = s.objective();
    }
  }
}

TEST(DualSolver, IncrementalGradientsMatchRebuild) {
  oracle::Random rnd(16);
  const auto inst = random_instance(rnd, 50, 3);
  DualSolver s(inst.stack, inst.y, Vector::Constant(3, 0.5), config(2.0, 1e-8));
  s.solve();
  const Matrix fresh = s.rebuild_gradients();
  EXPECT_LE((s.state().g - fresh).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, fresh.cwiseAbs().maxCoeff()));
}

TEST(DualSolver, ShrinkingReachesSameOptimum) {
  oracle::Random rnd(17);
  const auto inst = random_instance(rnd, 80, 2);
  SvmConfig c = config(0.5, 1e-8);
  const auto plain = solve_dual(inst.stack, Vector::Ones(2), inst.y, c);
  c.shrinking = true;
  const auto shrunk = solve_dual(inst.stack, Vector::Ones(2), inst.y, c);
  EXPECT_NEAR(plain.objective, shrunk.objective, 1e-7);
  EXPECT_LE(shrunk.kkt_violation, 1e-8);
}

TEST(DualSolver, WarmStartNeedsNoMoreIterations) {
  oracle::Random rnd(18);
  std::vector<long> diff;
  for (int k = 0; k < 21; ++k) {
    const auto inst = random_instance(rnd, 40, 2);
    Vector theta(2);
    theta << 1.0, 0.5;
    const auto first = solve_dual(inst.stack, theta, inst.y, config(1.0, 1e-6));
    theta[1] *= 1.05;
    const auto cold = solve_dual(inst.stack, theta, inst.y, config(1.0, 1e-6));
    const auto warm = solve_dual(inst.stack, theta, inst.y, config(1.0, 1e-6), first.alpha);
    diff.push_back(static_cast<long>(warm.iterations) - static_cast<long>(cold.iterations));
  }
  std::nth_element(diff.begin(), diff.begin() + 10, diff.end());
  EXPECT_LE(diff[10], 0);
}

TEST(DualSolver, WarmStartMustBeFeasible) {
  const auto t = two_point();
  Vector a(2);
  a << 0.5, 0.2;
  EXPECT_THROW(DualSolver(t.stack, t.y, Vector::Ones(1), config(1.0), a), ValidationError);
  a << 2.0, -2.0;
  EXPECT_THROW(DualSolver(t.stack, t.y, Vector::Ones(1), config(1.0), a), ValidationError);
}

TEST(KktViolation, ZeroAtOptimumAndOneAtZero) {
  const auto t = two_point();
  DualSolver s(t.stack, t.y, Vector::Ones(1), config(1.0));
  EXPECT_DOUBLE_EQ(s.kkt_violation(), 1.0);
  s.solve();
  EXPECT_LE(s.kkt_violation(), 1e-9);
}

TEST(KktViolation, GrowsLinearlyUnderInteriorPerturbation) {
  oracle::Random rnd(19);
  const auto inst = random_instance(rnd, 20, 1);
  const auto sol = solve_dual(inst.stack, Vector::Ones(1), inst.y, config(100.0, 1e-12));
  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < inst.y.size(); ++k) {
    const double a = inst.y[k] * sol.alpha[k];
    if (a > 1e-3 && a < 100.0 - 1e-3) free.push_back(k);
  }
  ASSERT_GE(free.size(), 2u) << "need two free vectors";
  const Eigen::Index i = free[0], j = free[1];
  const Matrix& K = inst.stack[0].values();
  std::vector<double> v;
  for (double d : {1e-4, 2e-4}) {
    Vector a = sol.alpha;
    a[i] += d;
    a[j] -= d;
    v.push_back(max_kkt_violation(K * a, a, inst.y, 100.0));
  }
  EXPECT_GT(v[0], 0.0);
  EXPECT_NEAR(v[1] / v[0], 2.0, 0.05);
}

TEST(PerKernelObjectives, HandValues) {
  const auto t = two_point();
  DualSolver s(KernelStack({t.stack[0], t.stack[0].renamed("dup")}), t.y, Vector::Ones(2), config(1.0));
  EXPECT_EQ(s.state().S_m, Vector::Zero(2));
  Vector a(2);
  a << 0.5, -0.5;
  s.set_alpha(a);
  const auto& st = s.state();
  EXPECT_DOUBLE_EQ(st.S_m[0], 0.5);
  EXPECT_EQ(st.S_m[0], st.S_m[1]);
}

TEST(RecoverBias, SymmetricAndShifted) {
  for (double c : {0.0, 0.3, -1.7}) {
    const auto t = two_point(c);
    const auto s = solve_dual(t.stack, Vector::Ones(1), t.y, config(1.0));
    // Hard-margin primal: w = 1, b = -c puts both points on the margin.
    EXPECT_NEAR(s.bias, -c, 1e-9);
  }
}

TEST(RecoverBias, MidpointWithoutFreeVectors) {
  const auto t = two_point(0.3);
  const auto s = solve_dual(t.stack, Vector::Ones(1), t.y, config(0.1));
  // Both at the bound: f = 0.2 x + b, so b <= 1 - 0.26 and b >= -1 + 0.14.
  EXPECT_NEAR(s.bias, 0.5 * (0.74 - 0.86), 1e-12);
}

TEST(BoxForm, RoundTrip) {
  Vector a(3), y(3);
  a << 0.2, -0.5, 0.0;
  y << 1, -1, 1;
  EXPECT_EQ(from_box_form(to_box_form(a, y), y), a);
  EXPECT_EQ(to_box_form(a, y), Vector((Vector(3) << 0.2, 0.5, 0.0).finished()));
}
