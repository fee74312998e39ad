// Copyright 2026 The incseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "incseg/cli.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "incseg/segmap_io.h"
#include "test_util.h"

namespace incseg {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "incseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) /
           (std::string("incseg_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }
  std::string SmallConfig(const std::string& extra = "") {
    return Write("lab.cfg",
                 "stages = 3\npackage_instances = 60\neval_scenes = 10\n"
                 "shadow.iterations = 6\n" +
                     extra);
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
  const CliRun help = Cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("simulate"), std::string::npos);
  EXPECT_EQ(Cli({}).code, kExitConfig);
  const CliRun bad = Cli({"simulate", "--bogus"});
  EXPECT_EQ(bad.code, kExitConfig);
  EXPECT_EQ(bad.err.rfind("error: ", 0), 0u);
}

TEST_F(CliTest, EvalPqIdentical) {
  const std::string a = Write("a.imap", "IMAP 3 2\n1 1 0\n0 2 2\n");
  const CliRun r = Cli({"eval-pq", a, a});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out,
            "pq=1.000000 sq=1.000000 rq=1.000000 tp=2 fp=0 fn=0\n");
}

TEST_F(CliTest, EvalPqFourByFour) {
  const std::string pred = (dir_ / "pred.imap").string();
  const std::string gt = (dir_ / "gt.imap").string();
  SaveInstanceMap(pred, testing::FourByFourPred());
  SaveInstanceMap(gt, testing::FourByFourGt());
  const CliRun r = Cli({"eval-pq", pred, gt});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "pq=0.333333 sq=0.666667 rq=0.500000 tp=1 fp=1 fn=1\n");
}

TEST_F(CliTest, EvalPqDataErrors) {
  const std::string a = Write("a.imap", "IMAP 2 2\n1 1\n0 2\n");
  const std::string b = Write("b.imap", "IMAP 2 1\n1 1\n");
  const std::string junk = Write("junk.imap", "IMAP 2 2\n1 x\n0 2\n");
  EXPECT_EQ(Cli({"eval-pq", a, b}).code, kExitData);
  EXPECT_EQ(Cli({"eval-pq", a, junk}).code, kExitData);
  EXPECT_EQ(Cli({"eval-pq", a, (dir_ / "missing").string()}).code, kExitData);
}

TEST_F(CliTest, SimulateIsByteIdentical) {
  const std::string cfg = SmallConfig("strategy = pq_based_star\n");
  const fs::path out1 = dir_ / "run1";
  const fs::path out2 = dir_ / "run2";
  ASSERT_EQ(Cli({"simulate", "--config", cfg, "--seed", "5", "--out",
                 out1.string()})
                .code,
            kExitOk);
  ASSERT_EQ(Cli({"simulate", "--config", cfg, "--seed", "5", "--out",
                 out2.string()})
                .code,
            kExitOk);
  for (const char* f : {"stages.csv", "summary.csv", "assessor.model"}) {
    EXPECT_EQ(Slurp(out1 / f), Slurp(out2 / f)) << f;
  }
  const std::string stages = Slurp(out1 / "stages.csv");
  std::istringstream in(stages);
  std::string line;
  int rows = 0;
  long last_cumulative = -1;
  std::getline(in, line);
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 12u);
    const long cumulative = std::stol(cells[10]);
    EXPECT_GE(cumulative, last_cumulative);
    last_cumulative = cumulative;
  }
  EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, SimulateSingleStage) {
  const std::string cfg = SmallConfig("stages = 1\n");
  const fs::path out = dir_ / "one";
  ASSERT_EQ(Cli({"simulate", "--config", cfg, "--strategy", "pq_based",
                 "--out", out.string()})
                .code,
            kExitOk);
  std::istringstream in(Slurp(out / "stages.csv"));
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_FALSE(std::getline(in, extra));
  std::vector<std::string> cells;
  std::stringstream ls(row);
  for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
  EXPECT_EQ(cells[3], cells[4]);
}

TEST_F(CliTest, SimulateConfigErrors) {
  const std::string cfg = SmallConfig();
  EXPECT_EQ(Cli({"simulate", "--config", cfg, "--out", dir_.string()}).code,
            kExitConfig);
  EXPECT_EQ(Cli({"simulate", "--config", cfg, "--strategy", "bogus", "--out",
                 dir_.string()})
                .code,
            kExitConfig);
  const std::string broken = Write("broken.cfg", "stages = many\n");
  const CliRun r = Cli({"simulate", "--config", broken, "--strategy", "random",
                        "--out", dir_.string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("broken.cfg:1:"), std::string::npos) << r.err;
}

TEST_F(CliTest, CompareWritesMedianColumns) {
  const std::string cfg = SmallConfig();
  const fs::path out = dir_ / "cmp";
  const CliRun r = Cli({"compare", "--config", cfg, "--strategies",
                        "random,pq_based", "--seeds", "1,2,3", "--out",
                        out.string(), "--jobs", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string table = Slurp(out / "compare.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "stage,random,pq_based");
  EXPECT_TRUE(fs::exists(out / "compare_raw.csv"));

  // The stage-3 median of the raw rows, recomputed here.
  std::istringstream raw(Slurp(out / "compare_raw.csv"));
  std::string line;
  std::getline(raw, line);
  std::vector<double> random_final;
  while (std::getline(raw, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells[0] == "random" && cells[2] == "3") {
      random_final.push_back(std::stod(cells[3]));
    }
  }
  ASSERT_EQ(random_final.size(), 3u);
  std::sort(random_final.begin(), random_final.end());
  char expected[32];
  std::snprintf(expected, sizeof(expected), "3,%.6f,", random_final[1]);
  EXPECT_NE(table.find(expected), std::string::npos) << table;
}

TEST_F(CliTest, SweepThresholdSingleValue) {
  const std::string cfg = SmallConfig();
  const fs::path out = dir_ / "sweep";
  const CliRun r = Cli({"sweep-threshold", "--config", cfg, "--values", "0.6",
                        "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string table = Slurp(out / "threshold.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);
  EXPECT_EQ(table.find("0.600000,"), table.find('\n') + 1);
}

TEST_F(CliTest, ShadowGenZeroIterationsWritesHeaderOnly) {
  const std::string cfg = Write("z.cfg", "shadow.iterations = 0\n");
  const fs::path out = dir_ / "shadow.csv";
  ASSERT_EQ(Cli({"shadow-gen", "--config", cfg, "--out", out.string()}).code,
            kExitOk);
  const std::string csv = Slurp(out);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  EXPECT_EQ(csv.rfind("pq,entropy_mean,", 0), 0u);
}

TEST_F(CliTest, ShadowGenHistogramIsFlat) {
  const std::string cfg =
      Write("s.cfg", "package_instances = 120\nshadow.iterations = 20\n");
  const fs::path out = dir_ / "pairs.csv";
  const CliRun r = Cli({"shadow-gen", "--config", cfg, "--out", out.string(),
                        "--seed", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream hist(Slurp(dir_ / "pairs_histogram.csv"));
  std::string line;
  std::getline(hist, line);
  EXPECT_EQ(line, "bin,lower,upper,raw_count,rebalanced_count");
  int lo = 0, hi = 0, kept = 0;
  while (std::getline(hist, line)) {
    const int c = std::stoi(line.substr(line.rfind(',') + 1));
    kept += c;
    if (c == 0) continue;
    lo = lo == 0 ? c : std::min(lo, c);
    hi = std::max(hi, c);
  }
  ASSERT_GT(lo, 0);
  EXPECT_LE(static_cast<double>(hi) / lo, 1.5);
  const std::string csv = Slurp(out);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), kept + 1);
}

}  // namespace
}  // namespace incseg
