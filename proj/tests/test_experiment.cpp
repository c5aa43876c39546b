#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "adasgo/errors.hpp"
#include "adasgo/experiment.hpp"

using namespace adasgo;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("adasgo_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Experiment, ToyTightEpsilonRow) {
  ExperimentSpec spec;
  spec.sweep = {1e-10};
  spec.scheme.central = true;
  const auto rows = run_experiment(spec);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LT(rows[0].u_error, 1e-8);
  EXPECT_LT(rows[0].f_error, 1e-8);
  EXPECT_EQ(rows[0].status, "converged");
}

TEST(Experiment, CsvSchema) {
  std::ostringstream os;
  write_results_csv(os, {ResultRow{"mc", 10, 10, 0.1, 0.2, 3, 0.5, "converged"}});
  EXPECT_EQ(os.str(), "method,param,avg_points,u_error,f_error,iterations,status\nmc,10,10,0.1,0.2,3,converged\n");
  std::ostringstream ts;
  write_timings_csv(ts, {ResultRow{"mc", 10, 10, 0.1, 0.2, 3, 0.5, "converged"}});
  EXPECT_EQ(first_line(ts.str()), "method,param,wall_seconds");
}

TEST(Experiment, ReproducibleOutputFiles) {
  ExperimentSpec spec;
  spec.method = "mc";
  spec.sweep = {10, 100};
  spec.repetitions = 3;
  spec.seed = 5;
  const auto a = scratch_dir("repro_a"), b = scratch_dir("repro_b");
  spec.out_dir = a;
  run_experiment(spec);
  spec.out_dir = b;
  run_experiment(spec);
  for (const char* f : {"results.csv", "metadata.json"}) {
    const std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(a / "timings.csv"));
  const auto meta = nlohmann::json::parse(slurp(a / "metadata.json"));
  EXPECT_TRUE(meta.contains("git_hash"));
  EXPECT_EQ(meta["seed"].get<int>(), 5);
  EXPECT_EQ(meta["config"]["method"], "mc");
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Experiment, EveryMethodRuns) {
  for (const auto& m : experiment_methods()) {
    ExperimentSpec spec;
    spec.method = m;
    spec.repetitions = 2;
    spec.sweep = {m == "mc" || m == "dtom_mc" ? 50.0 : m.rfind("dasg", 0) == 0 ? 1e-4 : 5.0};
    const auto rows = run_experiment(spec);
    ASSERT_EQ(rows.size(), 1u) << m;
    EXPECT_LT(rows[0].u_error, 0.5) << m;
    EXPECT_GT(rows[0].avg_points, 0.0) << m;
  }
}

TEST(Experiment, UnknownNames) {
  ExperimentSpec spec;
  spec.sweep = {1e-3};
  spec.method = "quasi_mc";
  try {
    run_experiment(spec);
    FAIL() << "expected UnknownMethod";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownMethod);
  }
  spec.method = "dasg_gp";
  spec.problem = "rosenbrock";
  try {
    run_experiment(spec);
    FAIL() << "expected UnknownProblem";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownProblem);
  }
}

TEST(Experiment, AdditiveMatchesPublishedScale) {
  ExperimentSpec spec;
  spec.problem = "additive:50";
  spec.sweep = {1e-2, 1e-6};
  const auto rows = run_experiment(spec);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_EQ(r.u_error, 0.0);
  // Level-two rule in every direction: published error 4.68e-4.
  EXPECT_GT(rows[0].f_error, 4.68e-5);
  EXPECT_LT(rows[0].f_error, 4.68e-3);
  EXPECT_LT(rows[1].f_error, 7.73e-6);
}

TEST(StoppingStudy, WritesFilesAndSummary) {
  StoppingStudySpec spec;
  spec.epsilons = {1.0};
  spec.families = {RuleFamily::GaussPatterson};
  spec.out_dir = scratch_dir("stopping");
  const auto runs = stopping_study(spec);
  ASSERT_EQ(runs.size(), 1u);
  const auto& r = runs[0];
  EXPECT_EQ(r.rows.size(), static_cast<std::size_t>(spec.max_iters) + 1);
  EXPECT_LT(r.stop_index, r.rows.size());
  EXPECT_EQ(r.rows[0].iteration, 0);
  EXPECT_NEAR(r.rows[0].u_error, 1.5, 1e-12);
  EXPECT_EQ(first_line(slurp(*spec.out_dir / "stopping_gp_eps1.csv")), "iter,u_error,surrogate,probe,fit_value");
  EXPECT_EQ(first_line(slurp(*spec.out_dir / "stopping_summary.csv")),
            "family,epsilon,stop_index,fired,error_argmin,fit_a,fit_b,fit_c,fit_residual,fit_range");
  std::filesystem::remove_all(*spec.out_dir);
}
