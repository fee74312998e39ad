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

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "incseg/config.h"
#include "incseg/engine.h"
#include "incseg/errors.h"
#include "incseg/report.h"
#include "incseg/segmap_io.h"
#include "incseg/shadow.h"

namespace incseg {

namespace {

namespace fs = std::filesystem;

std::string Fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::ofstream OpenOutput(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

fs::path PrepareDir(const std::string& flag, const CampaignConfig& config) {
  const std::string dir = !flag.empty() ? flag : config.output_dir;
  if (dir.empty()) throw ConfigError("no output directory: pass --out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir + ": " + ec.message());
  return dir;
}

CampaignConfig LoadConfig(const std::string& path) {
  return path.empty() ? CampaignConfig{} : ParseConfig(path);
}

std::vector<std::uint64_t> SeedsOr(const std::string& flag,
                                   const CampaignConfig& config) {
  return flag.empty() ? config.seeds : ParseSeedList(flag);
}

struct Options {
  std::string config;
  std::string out;
  std::string strategy;
  std::string strategies;
  std::string seeds;
  std::string values;
  std::optional<std::uint64_t> seed;
  std::string pred;
  std::string gt;
  int jobs = 1;
};

int Simulate(const Options& o, std::ostream& out) {
  CampaignConfig config = LoadConfig(o.config);
  if (!o.strategy.empty()) config.strategy = o.strategy;
  if (config.strategy.empty()) {
    throw ConfigError("no strategy: pass --strategy or set it in the config");
  }
  config.Validate();
  const std::uint64_t seed = o.seed ? *o.seed : config.seeds.front();
  const fs::path dir = PrepareDir(o.out, config);

  const CampaignResult result = RunCampaign(config, seed);
  const std::vector<CampaignResult> runs = {result};
  {
    auto f = OpenOutput(dir / "stages.csv");
    WriteStagesCsv(f, runs);
  }
  {
    auto f = OpenOutput(dir / "summary.csv");
    WriteSummaryCsv(f, runs);
  }
  SaveAssessorModel(dir / "assessor.model", result.assessor);
  const StageReport& last = result.reports.back();
  out << config.strategy << " seed " << seed << ": " << result.reports.size()
      << " stages, production_pq=" << Fixed(last.production_pq)
      << " annotation_pq=" << Fixed(last.annotation_pq)
      << " cumulative_instances=" << last.cumulative_instances << '\n';
  out << "wrote " << (dir / "stages.csv").string() << ", "
      << (dir / "summary.csv").string() << ", "
      << (dir / "assessor.model").string() << '\n';
  return kExitOk;
}

int Compare(const Options& o, std::ostream& out) {
  const CampaignConfig config = LoadConfig(o.config);
  const auto strategies = ParseNameList(o.strategies);
  for (const auto& s : strategies) ParseStrategy(s);
  const auto seeds = SeedsOr(o.seeds, config);
  const fs::path dir = PrepareDir(o.out, config);

  const auto runs = RunCampaigns(config, strategies, seeds, o.jobs);
  std::ostringstream table;
  WriteCompareCsv(table, runs, strategies);
  {
    auto f = OpenOutput(dir / "compare.csv");
    f << table.str();
  }
  {
    auto f = OpenOutput(dir / "compare_raw.csv");
    WriteStagesCsv(f, runs);
  }
  {
    auto f = OpenOutput(dir / "summary.csv");
    WriteSummaryCsv(f, runs);
  }
  out << "median production PQ over " << seeds.size() << " seed(s):\n"
      << table.str();
  return kExitOk;
}

int SweepThreshold(const Options& o, std::ostream& out) {
  const CampaignConfig config = LoadConfig(o.config);
  const auto values = ParseValueList(o.values);
  const auto seeds = SeedsOr(o.seeds, config);
  const fs::path dir = PrepareDir(o.out, config);

  const auto runs = RunThresholdSweep(config, values, seeds, o.jobs);
  std::ostringstream table;
  WriteThresholdCsv(table, runs);
  {
    auto f = OpenOutput(dir / "threshold.csv");
    f << table.str();
  }
  {
    auto f = OpenOutput(dir / "threshold_raw.csv");
    f << "threshold,seed,final_production_pq,final_annotation_pq\n";
    for (const auto& run : runs) {
      const StageReport& last = run.result.reports.back();
      f << Fixed(run.threshold) << ',' << run.result.seed << ','
        << Fixed(last.production_pq) << ',' << Fixed(last.annotation_pq)
        << '\n';
    }
  }
  out << table.str();
  return kExitOk;
}

int EvalPq(const Options& o, std::ostream& out) {
  const InstanceMap pred = LoadInstanceMap(o.pred);
  const InstanceMap gt = LoadInstanceMap(o.gt);
  const PQResult r = PanopticQuality(pred, gt);
  out << "pq=" << Fixed(r.pq) << " sq=" << Fixed(r.sq) << " rq=" << Fixed(r.rq)
      << " tp=" << r.tp_count << " fp=" << r.fp_count << " fn=" << r.fn_count
      << '\n';
  return kExitOk;
}

int ShadowGen(const Options& o, std::ostream& out) {
  const CampaignConfig config = LoadConfig(o.config);
  if (o.out.empty()) throw ConfigError("no output file: pass --out");
  const std::uint64_t seed = o.seed ? *o.seed : config.seeds.front();
  const fs::path path = o.out;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }

  const auto package = StagePackage(config, seed, 1);
  std::vector<Sample> labelled;
  for (const auto& s : package) labelled.push_back(*s);
  const ShadowDataset data = BuildShadowDataset(
      config, labelled, DeriveSeed(seed, StreamTag::kShadow, {1}),
      DeriveSeed(seed, StreamTag::kRebalance, {1}));
  {
    auto f = OpenOutput(path);
    WriteShadowCsv(f, data.rebalanced, FeatureNames(config.sim.layer_count));
  }
  const int bins = config.shadow.bins;
  const auto raw_hist = PqHistogram(data.raw, bins);
  const auto kept_hist = PqHistogram(data.rebalanced, bins);
  const fs::path hist_path =
      path.parent_path() / (path.stem().string() + "_histogram.csv");
  {
    auto f = OpenOutput(hist_path);
    f << "bin,lower,upper,raw_count,rebalanced_count\n";
    for (int b = 0; b < bins; ++b) {
      f << b << ',' << Fixed(static_cast<double>(b) / bins) << ','
        << Fixed(static_cast<double>(b + 1) / bins) << ',' << raw_hist[b]
        << ',' << kept_hist[b] << '\n';
    }
  }
  out << "samples=" << labelled.size() << " raw_pairs=" << data.raw.size()
      << " rebalanced_pairs=" << data.rebalanced.size()
      << " flatness=" << Fixed(HistogramFlatness(kept_hist)) << '\n';
  out << "histogram (raw -> rebalanced):\n";
  for (int b = 0; b < bins; ++b) {
    out << "  [" << Fixed(static_cast<double>(b) / bins).substr(0, 4) << ", "
        << Fixed(static_cast<double>(b + 1) / bins).substr(0, 4) << ") "
        << raw_hist[b] << " -> " << kept_hist[b] << '\n';
  }
  out << "wrote " << path.string() << ", " << hist_path.string() << '\n';
  return kExitOk;
}

bool UseColor(const std::ostream& err) {
  const char* no_color = std::getenv("NO_COLOR");
  if (no_color != nullptr && no_color[0] != '\0') return false;
  return &err == &std::cerr && isatty(STDERR_FILENO);
}

void Diagnose(std::ostream& err, const std::string& message) {
  if (UseColor(err)) {
    err << "\033[1;31merror:\033[0m " << message << '\n';
  } else {
    err << "error: " << message << '\n';
  }
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Incremental instance-segmentation learning lab", "incseg"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Run one campaign");
  simulate->add_option("--config", o.config, "Config file");
  simulate->add_option("--seed", o.seed, "Master seed");
  simulate->add_option("--out", o.out, "Output directory");
  simulate->add_option("--strategy", o.strategy, "Strategy name");

  auto* compare =
      app.add_subcommand("compare", "Compare strategies across seeds");
  compare->add_option("--config", o.config, "Config file");
  compare->add_option("--strategies", o.strategies, "Comma-separated list")
      ->required();
  compare->add_option("--seeds", o.seeds, "Seeds, e.g. 1-20 or 1,2,3");
  compare->add_option("--out", o.out, "Output directory");
  compare->add_option("--jobs", o.jobs, "Concurrent campaigns (0 = all cores)");

  auto* sweep = app.add_subcommand("sweep-threshold",
                                   "Sweep the easy-sample threshold");
  sweep->add_option("--config", o.config, "Config file");
  sweep->add_option("--values", o.values, "Comma-separated thresholds")
      ->required();
  sweep->add_option("--seeds", o.seeds, "Seeds, e.g. 1-20 or 1,2,3");
  sweep->add_option("--out", o.out, "Output directory");
  sweep->add_option("--jobs", o.jobs, "Concurrent campaigns (0 = all cores)");

  auto* eval = app.add_subcommand("eval-pq", "PQ of two IMAPv1 files");
  eval->add_option("PRED", o.pred, "Predicted instance map")->required();
  eval->add_option("GT", o.gt, "Ground-truth instance map")->required();

  auto* shadow =
      app.add_subcommand("shadow-gen", "Write rebalanced shadow pairs");
  shadow->add_option("--config", o.config, "Config file");
  shadow->add_option("--out", o.out, "Output CSV")->required();
  shadow->add_option("--seed", o.seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    Diagnose(err, e.what());
    err << "run 'incseg --help' for usage\n";
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return Simulate(o, out);
    if (compare->parsed()) return Compare(o, out);
    if (sweep->parsed()) return SweepThreshold(o, out);
    if (eval->parsed()) return EvalPq(o, out);
    if (shadow->parsed()) return ShadowGen(o, out);
  } catch (const DataError& e) {
    Diagnose(err, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    Diagnose(err, e.what());
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace incseg
