#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpmkl/kernel_io.hpp"
#include "lpmkl/model_io.hpp"

namespace fs = std::filesystem;
using namespace lpmkl;

namespace {

struct CliResult {
  int status;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lpmkl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with stdout and stderr merged into one capture file.
  CliResult run(const std::string& args) const {
    const fs::path log = dir_ / "log.txt";
    const std::string cmd = std::string(LPMKL_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
  }

  std::string at(const std::string& f) const { return (dir_ / f).string(); }

  // Two linear kernels on 1-d inputs with a clear margin, plus matching test rows.
  void write_problem() const {
    Matrix X(6, 2);
    X << 2, 0.1, 1.5, -0.3, 1, 0.2, -1, 0.4, -1.2, -0.1, -2, 0.3;
    std::ofstream(at("y.txt")) << "1\n1\n1\n-1\n-1\n-1\n";
    io::write_kernel(at("a.km"), linear_kernel(X.col(0), "a"));
    io::write_kernel(at("b.km"), linear_kernel(X.col(1), "b"));
    Matrix T(2, 2);
    T << 3, 0, -3, 0;
    io::write_rows(at("ta.km"), linear_kernel_rows(T.col(0), X.col(0), "a"));
    io::write_rows(at("tb.km"), linear_kernel_rows(T.col(1), X.col(1), "b"));
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpExitsZero) {
  const auto r = run("--help");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

TEST_F(Cli, TrainWritesModelAndReport) {
  write_problem();
  const auto r = run("train --kernels " + at("a.km") + " " + at("b.km") + " --labels " + at("y.txt") + " --out " +
                     at("m.mkl") + " --p 2 --C 1");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto m = io::read_model(at("m.mkl"));
  EXPECT_EQ(m.theta.size(), 2);
  EXPECT_EQ(m.kernel_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_GT(m.theta[0], m.theta[1]);
  EXPECT_TRUE(fs::exists(at("m.mkl.report.json")));
}

TEST_F(Cli, PredictClassifiesAndNamesMissingKernel) {
  write_problem();
  ASSERT_EQ(run("train --kernels " + at("a.km") + " " + at("b.km") + " --labels " + at("y.txt") + " --out " + at("m.mkl"))
                .status,
            0);
  auto r = run("predict --model " + at("m.mkl") + " --kernels " + at("ta.km") + " " + at("tb.km") + " --out " + at("p.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string csv = slurp(at("p.csv"));
  EXPECT_EQ(csv.rfind("decision,label\n", 0), 0u);
  EXPECT_NE(csv.find(",1\n"), std::string::npos);
  EXPECT_NE(csv.find(",-1\n"), std::string::npos);

  r = run("predict --model " + at("m.mkl") + " --kernels " + at("ta.km") + " --out " + at("q.csv"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("missing kernel 'b'"), std::string::npos) << r.out;
}

TEST_F(Cli, InvalidPExitsOne) {
  write_problem();
  const auto r = run("train --kernels " + at("a.km") + " --labels " + at("y.txt") + " --out " + at("m.mkl") + " --p 0.5");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("p must be ≥ 1"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(at("m.mkl")));
}

TEST_F(Cli, ToygenIsReproducible) {
  ASSERT_EQ(run("toygen --d 4 --n 10 --seed 3 --out " + at("a.csv") + " --kernel-dir " + at("k")).status, 0);
  ASSERT_EQ(run("toygen --d 4 --n 10 --seed 3 --out " + at("b.csv")).status, 0);
  const std::string a = slurp(at("a.csv"));
  EXPECT_EQ(a, slurp(at("b.csv")));
  EXPECT_EQ(a.rfind("y,x1,x2,x3,x4\n", 0), 0u);
  EXPECT_TRUE(fs::exists(at("k") + "/f3.km"));
  EXPECT_TRUE(fs::exists(at("k") + "/labels.txt"));
}

TEST_F(Cli, BoundsSinglePoint) {
  const auto r = run("bounds --M 2 --n 100 --p 1");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "0.16858\n");
}

TEST_F(Cli, BoundsGridCsv) {
  const auto r = run("bounds --M 2 16 --n 100 --p 1 inf --out " + at("b.csv"));
  EXPECT_EQ(r.status, 0) << r.out;
  const std::string csv = slurp(at("b.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST_F(Cli, NormalizeAndAlign) {
  write_problem();
  auto r = run("normalize --kernel " + at("a.km") + " --out " + at("n.kmb") + " --center");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto K = io::read_kernel(at("n.kmb"));
  EXPECT_NEAR(K.values().sum(), 0.0, 1e-12);
  EXPECT_NEAR(K.values().trace() / 6.0, 1.0, 1e-12);
  r = run("align --kernels " + at("a.km") + " " + at("b.km"));
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_FALSE(r.out.empty());
}

TEST_F(Cli, MissingInputFileExitsOne) {
  EXPECT_EQ(run("train --kernels " + at("nope.km") + " --labels " + at("y.txt") + " --out " + at("m.mkl")).status, 1);
}
