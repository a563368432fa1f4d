/*
 * Copyright 2026 The truncdr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace truncdr {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(TRUNCDR_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Json run_json(const std::string& args) {
  const auto r = run(args);
  EXPECT_EQ(r.code, 0) << args;
  return Json::parse(r.out);
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("truncdr_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("simulate --scenario 1 --n 1000 --seed 3 --emit-data " + path("s1.csv")).code, 0);
    ASSERT_EQ(run("simulate --scenario c2 --n 800 --seed 4 --emit-data " + path("c2.csv")).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static std::string s1() { return "--data " + path("s1.csv"); }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, IpwOnScenario1NearTruth) {
  const auto j = run_json("estimate --estimator ipw --g-learner cox --functional survival --t0 7 " + s1());
  EXPECT_EQ(j["estimator"], "ipw-cox1");
  EXPECT_EQ(j["n"], 1000);
  const double theta = j["theta"], se = j["se_model"];
  EXPECT_NEAR(theta, 0.2370, 3.0 * se);
  EXPECT_LT(j["ci_model"][0].get<double>(), theta);
}

TEST_F(Cli, DrWithZeroEventCdfMatchesIpw) {
  const auto ipw = run_json("estimate --estimator ipw --t0 7 " + s1());
  const auto dr = run_json("estimate --estimator dr --f constant0 --t0 7 " + s1());
  for (const char* key : {"theta", "beta", "se_model"}) {
    EXPECT_NEAR(dr[key].get<double>(), ipw[key].get<double>(), 1e-12) << key;
  }
  EXPECT_EQ(dr["estimator"], "dr-const-cox1");
  for (int k : {0, 1}) EXPECT_NEAR(dr["ci_model"][k].get<double>(), ipw["ci_model"][k].get<double>(), 1e-12);
}

TEST_F(Cli, CrossFitOutputIsByteIdentical) {
  const std::string args = "estimate --estimator cf --k 10 --seed 7 --t0 7 " + s1();
  const auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, CsvFormatMatchesJson) {
  const auto j = run_json("estimate --estimator reg1 --t0 7 " + s1());
  const auto c = run("estimate --estimator reg1 --t0 7 --format csv " + s1());
  ASSERT_EQ(c.code, 0);
  std::istringstream in(c.out);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header.rfind("estimator,functional,censoring,n,theta", 0), 0u);
  const auto cells = [&] {
    std::vector<std::string> v;
    std::stringstream ss(row);
    for (std::string s; std::getline(ss, s, ',');) v.push_back(s);
    return v;
  }();
  ASSERT_GT(cells.size(), 4u);
  EXPECT_NEAR(std::stod(cells[4]), j["theta"].get<double>(), 1e-11);
}

TEST_F(Cli, OnePointCurveEqualsEstimate) {
  const auto est = run_json("estimate --estimator dr --t0 6.5 " + s1());
  const auto cur = run("curve --estimators dr --grid 6.5 " + s1());
  ASSERT_EQ(cur.code, 0);
  std::istringstream in(cur.out);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "estimator,t,theta,se,lo,hi");
  EXPECT_FALSE(std::getline(in, extra) && !extra.empty());
  std::vector<std::string> cells;
  std::stringstream ss(row);
  for (std::string s; std::getline(ss, s, ',');) cells.push_back(s);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0], "dr-cox1-cox1");
  EXPECT_DOUBLE_EQ(std::stod(cells[1]), 6.5);
  EXPECT_NEAR(std::stod(cells[2]), est["theta"].get<double>(), 1e-11);
  EXPECT_NEAR(std::stod(cells[3]), est["se_model"].get<double>(), 1e-11);
  EXPECT_NEAR(std::stod(cells[4]), est["ci_model"][0].get<double>(), 1e-11);
}

TEST_F(Cli, CurveGridFromRange) {
  const auto cur = run("curve --estimators dr,pl --from 6 --to 8 --step 0.5 " + s1());
  ASSERT_EQ(cur.code, 0);
  EXPECT_EQ(std::count(cur.out.begin(), cur.out.end(), '\n'), 1 + 2 * 5);
}

TEST_F(Cli, CurveRejectsPointsOutsideSupport) {
  EXPECT_EQ(run("curve --estimators dr --grid 1000 " + s1()).code, 2);
}

TEST_F(Cli, CensoredPipelineMatchesLibrary) {
  const auto j = run_json("estimate --estimator dr --censoring c2 --t0 3 --data " + path("c2.csv"));
  std::ifstream in(path("c2.csv"));
  const Dataset ds = load_dataset(in, CsvSchema{}, Censoring::kC2);
  EstimatorConfig cfg;
  cfg.overlap = true;
  const auto rep = run_estimator(ds, cfg, Functional::survival(3.0));
  EXPECT_EQ(j["censoring"], "c2");
  EXPECT_NEAR(j["theta"].get<double>(), rep.theta, 1e-13);
  EXPECT_NEAR(j["se_model"].get<double>(), *rep.se_model, 1e-13);
  EXPECT_NEAR(rep.theta, 0.576, 4.0 * *rep.se_model);
}

TEST_F(Cli, DiagnoseRespectsClamp) {
  const auto j = run_json("diagnose --clamp 0.05 " + s1());
  for (const char* key : {"min_eta1", "min_eta2", "min_eta3"}) EXPECT_GE(j[key].get<double>(), 0.05) << key;
  for (const char* key : {"kendall_tau", "p_value", "z", "comparable_pairs"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST_F(Cli, DiagnoseOnIndependentTruncation) {
  std::ofstream f(path("indep.csv"));
  write_dataset(f, testing::random_truncated(77, 600, 1));
  f.close();
  const auto j = run_json("diagnose --data " + path("indep.csv"));
  EXPECT_GT(j["p_value"].get<double>(), 0.01);
}

TEST_F(Cli, ConfigFileFlagsWin) {
  std::ofstream f(path("cfg.txt"));
  f << "# defaults\nestimator = ipw\nt0 = 7\n";
  f.close();
  const auto a = run_json("estimate --config " + path("cfg.txt") + " " + s1());
  EXPECT_EQ(a["estimator"], "ipw-cox1");
  const auto b = run_json("estimate --config " + path("cfg.txt") + " --estimator naive " + s1());
  EXPECT_EQ(b["estimator"], "naive");
}

TEST_F(Cli, SimulateWritesStudyTable) {
  const auto r = run("simulate --scenario 1 --n 200 --reps 3 --estimators ipw,naive,full --seed 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("estimator,theta0,bias", 0), 0u);
  EXPECT_NE(r.out.find("\nnaive,"), std::string::npos);
  EXPECT_EQ(r.out, run("simulate --scenario 1 --n 200 --reps 3 --estimators ipw,naive,full --seed 2").out);
}

TEST_F(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(run("estimate --data " + path("missing.csv")).code, 2);
  EXPECT_EQ(run("estimate --bogus-flag " + s1()).code, 2);
  EXPECT_EQ(run("estimate --estimator magic " + s1()).code, 2);
  EXPECT_EQ(run("estimate --f spline " + s1()).code, 2);
  EXPECT_EQ(run("simulate --scenario 9 --reps 1").code, 2);
}

TEST_F(Cli, EstimationErrorExitsThree) {
  std::ofstream f(path("noz.csv"));
  f << "q,x,delta\n0.1,1,1\n0.2,2,1\n0.3,3,1\n";
  f.close();
  EXPECT_EQ(run("estimate --estimator dr --t0 1.5 --data " + path("noz.csv")).code, 3);
}

TEST_F(Cli, OverlapViolationExitsFour) {
  std::ofstream f(path("late_g.csv"));
  f << "time,value\n100,1\n";
  f.close();
  EXPECT_EQ(run("estimate --estimator ipw --t0 7 --g table:" + path("late_g.csv") + " " + s1()).code, 4);
}

}  // namespace
}  // namespace truncdr
