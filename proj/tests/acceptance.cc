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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "incseg/assessor.h"
#include "incseg/cli.h"
#include "incseg/engine.h"
#include "incseg/errors.h"
#include "incseg/features.h"
#include "incseg/report.h"
#include "incseg/segmap.h"
#include "incseg/shadow.h"
#include "incseg/simworld.h"
#include "test_util.h"

namespace incseg {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int failures = 0;

void Report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

void PqOracleEquivalence() {
  const auto start = Clock::now();
  Rng rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const InstanceMap pred = testing::RandomRectMap(8, 8, 4, rng);
    const InstanceMap gt = testing::RandomRectMap(8, 8, 4, rng);
    const PQResult r = PanopticQuality(pred, gt);
    const auto o = testing::BruteForcePq(pred, gt);
    if (r.pq != o.pq || r.sq != o.sq || r.rq != o.rq || r.tp_count != o.tp ||
        r.fp_count != o.fp || r.fn_count != o.fn) {
      ++mismatches;
    }
  }
  const double secs = Seconds(start);
  Report(1, mismatches == 0 && secs < 5.0,
         Format("200 random 8x8 pairs, %d mismatches vs brute force, %.3f s",
                mismatches, secs));
}

void PqWorkedExample() {
  const PQResult r =
      PanopticQuality(testing::FourByFourPred(), testing::FourByFourGt());
  const auto gt = testing::FourByFourGt();
  const double identity = PanopticQuality(gt, gt).pq;
  const bool pass = r.pq == 1.0 / 3.0 && r.sq == 2.0 / 3.0 && r.rq == 0.5 &&
                    identity == 1.0;
  Report(2, pass,
         Format("4x4: pq=%.17g sq=%.17g rq=%.17g; identity pq=%.17g", r.pq,
                r.sq, r.rq, identity));
}

void AssessorQuality() {
  CampaignConfig config;
  config.package_instances = 1575;
  config.sim.noise = 0.05;
  const auto package = StagePackage(config, 1, 1);
  std::vector<Sample> labelled;
  for (const auto& s : package) labelled.push_back(*s);
  const ShadowDataset data = BuildShadowDataset(
      config, labelled, DeriveSeed(1, StreamTag::kShadow, {1}),
      DeriveSeed(1, StreamTag::kRebalance, {1}));

  std::vector<ShadowPair> pairs = data.rebalanced;
  Rng rng(77);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const std::size_t train_n = pairs.size() * 4 / 5;
  const std::span<const ShadowPair> train(pairs.data(), train_n);
  const std::span<const ShadowPair> test(pairs.data() + train_n,
                                         pairs.size() - train_n);
  const AssessorModel model = FitAssessor(train, config.ridge_lambda);
  double mae = 0.0;
  for (const auto& p : test) {
    mae += std::abs(PredictFromFeatures(model, p.features) - p.pq_score);
  }
  mae /= static_cast<double>(test.size());
  const bool pass = pairs.size() >= 2000 && mae <= 0.10;
  Report(3, pass,
         Format("%zu samples, %zu raw pairs, %zu rebalanced; held-out MAE "
                "%.4f on %zu pairs",
                labelled.size(), data.raw.size(), pairs.size(), mae,
                test.size()));
}

struct SeedRuns {
  std::map<std::string, double> final_pq;
  std::map<double, double> threshold_pq;
};

double MedianOf(const std::vector<SeedRuns>& runs, const std::string& name) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.final_pq.at(name));
  return Median(v);
}

void StrategyAndThreshold(LedgerAuditor& auditor) {
  const std::vector<std::string> strategies = {
      "hard", "pq_based", "random", "easy", "pq_based_star", "random_star"};
  const std::vector<double> thresholds = {0.0, 0.2, 0.4, 0.6, 0.8};
  CampaignConfig config;
  config.stages = 6;
  config.budget.annotation_fraction = 0.10;

  std::vector<SeedRuns> runs;
  double ordering_secs = 0.0;
  const auto sweep_start = Clock::now();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SeedRuns r;
    auto start = Clock::now();
    const Bootstrap boot = RunBootstrap(config, seed);
    for (const auto& name : strategies) {
      config.strategy = name;
      config.budget.easy_threshold = 0.6;
      r.final_pq[name] =
          RunCampaign(config, seed, &boot, auditor.Callback())
              .reports.back()
              .production_pq;
    }
    ordering_secs += Seconds(start);
    config.strategy = "pq_based_star";
    for (double t : thresholds) {
      if (t == 0.6) {
        r.threshold_pq[t] = r.final_pq["pq_based_star"];
        continue;
      }
      config.budget.easy_threshold = t;
      r.threshold_pq[t] = RunCampaign(config, seed, &boot, auditor.Callback())
                              .reports.back()
                              .production_pq;
    }
    runs.push_back(r);
  }

  int hard_beats_random = 0;
  int random_beats_easy = 0;
  int star_beats_random_star = 0;
  for (const auto& r : runs) {
    const double hard = std::min(r.final_pq.at("hard"), r.final_pq.at("pq_based"));
    hard_beats_random += hard > r.final_pq.at("random");
    random_beats_easy += r.final_pq.at("random") > r.final_pq.at("easy");
    star_beats_random_star +=
        r.final_pq.at("pq_based_star") > r.final_pq.at("random_star");
  }
  const double m_hard = MedianOf(runs, "hard");
  const double m_pq = MedianOf(runs, "pq_based");
  const double m_random = MedianOf(runs, "random");
  const double m_easy = MedianOf(runs, "easy");
  const double m_star = MedianOf(runs, "pq_based_star");
  const double m_rstar = MedianOf(runs, "random_star");
  const bool medians = std::min(m_hard, m_pq) > m_random && m_random > m_easy &&
                       m_star > m_rstar;
  const bool pass4 = medians && hard_beats_random >= 15 &&
                     random_beats_easy >= 15 && star_beats_random_star >= 15 &&
                     ordering_secs <= 600.0;
  Report(4, pass4,
         Format("medians hard %.4f pq_based %.4f random %.4f easy %.4f | "
                "pq_based_star %.4f random_star %.4f; seeds hard>random %d/20, "
                "random>easy %d/20, pq_based_star>random_star %d/20; %.0f s",
                m_hard, m_pq, m_random, m_easy, m_star, m_rstar,
                hard_beats_random, random_beats_easy, star_beats_random_star,
                ordering_secs));

  std::map<double, double> mean;
  for (const auto& r : runs) {
    for (const auto& [t, v] : r.threshold_pq) mean[t] += v / runs.size();
  }
  double best_t = 0.0;
  double best = -1.0;
  std::string table;
  for (const auto& [t, v] : mean) {
    table += Format(" %.1f:%.4f", t, v);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  const bool interior = best_t > thresholds.front() && best_t < thresholds.back();
  Report(5, interior,
         Format("mean final PQ by threshold%s; argmax %.1f (%.0f s total)",
                table.c_str(), best_t, Seconds(sweep_start)));
}

void ShadowRebalancing() {
  Rng rng(31);
  std::vector<ShadowPair> pairs;
  for (int i = 0; i < 10000; ++i) {
    const double u = Uniform01(rng);
    pairs.push_back({{u}, 1.0 - u * u * u});  // piles up near PQ 1
  }
  const auto before = PqHistogram(pairs, 10);
  Rng pick(32);
  const auto out = RebalanceUniform(pairs, 10, 910, pick);
  const auto after = PqHistogram(out, 10);
  const double flat = HistogramFlatness(after);
  Report(6, flat <= 1.5 && !out.empty(),
         Format("10000 skewed pairs (flatness %.1f) -> %zu pairs, flatness %.3f",
                HistogramFlatness(before), out.size(), flat));
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void Determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "incseg_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "lab.cfg";
  std::ofstream(cfg) << "strategy = pq_based_star\n";
  std::ostringstream out;
  std::ostringstream err;
  bool ok = true;
  for (const char* dir : {"a", "b"}) {
    const std::string out_dir = (root / dir).string();
    const std::string cfg_path = cfg.string();
    const char* argv[] = {"incseg", "simulate", "--config", cfg_path.c_str(),
                          "--seed", "42", "--out", out_dir.c_str()};
    ok = ok && RunCli(8, argv, out, err) == kExitOk;
  }
  const bool same_stages =
      ok && Slurp(root / "a" / "stages.csv") == Slurp(root / "b" / "stages.csv");
  const bool same_summary = ok && Slurp(root / "a" / "summary.csv") ==
                                      Slurp(root / "b" / "summary.csv");
  const bool nonempty = ok && !Slurp(root / "a" / "stages.csv").empty();
  Report(7, ok && same_stages && same_summary && nonempty,
         Format("simulate x2 (seed 42): stages.csv %s, summary.csv %s%s",
                same_stages ? "identical" : "differs",
                same_summary ? "identical" : "differs",
                ok ? "" : (" [cli error: " + err.str() + "]").c_str()));
  fs::remove_all(root);
}

void LedgerInvariants(const LedgerAuditor& auditor) {
  std::string first = auditor.ok() ? "" : "; first: " + auditor.violations()[0];
  Report(8, auditor.ok() && auditor.transitions() > 0,
         Format("%d stage transitions audited, %zu violations%s",
                auditor.transitions(), auditor.violations().size(),
                first.c_str()));
}

void SimulatorCalibration() {
  Rng rng(90);
  const auto package = GeneratePackage(SceneParams{}, 3000, 1, rng);
  SimModel model;
  int within = 0;
  int draws = 0;
  for (int i = 0; i < 1000; ++i) {
    const Sample& s = package[i % package.size()];
    model.skill = Uniform01(rng);
    Rng stream(Mix64(1000 + i));
    ++draws;
    try {
      const InferenceResult r = SimulateInferenceDetailed(model, s, stream);
      const double pq =
          PanopticQuality(DecodeClustering(r.cmap, model.min_area), s.gt).pq;
      within += std::abs(pq - r.target_pq) <= kCalibrationTolerance;
    } catch (const CalibrationError&) {
    }
  }
  std::vector<double> pq;
  std::vector<double> entropy;
  for (int i = 0; i < 500; ++i) {
    const Sample& s = package[(i * 7) % package.size()];
    model.skill = Uniform01(rng);
    Rng stream(Mix64(5000 + i));
    const InferenceResult r = SimulateInferenceDetailed(model, s, stream);
    pq.push_back(r.achieved_pq);
    entropy.push_back(ExtractFeatures(r.cmap)[0]);
  }
  const double n = static_cast<double>(pq.size());
  const double mp = std::accumulate(pq.begin(), pq.end(), 0.0) / n;
  const double me = std::accumulate(entropy.begin(), entropy.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, ve = 0.0;
  for (std::size_t i = 0; i < pq.size(); ++i) {
    cov += (pq[i] - mp) * (entropy[i] - me);
    vp += (pq[i] - mp) * (pq[i] - mp);
    ve += (entropy[i] - me) * (entropy[i] - me);
  }
  const double corr = cov / std::sqrt(vp * ve);
  const double rate = static_cast<double>(within) / draws;
  Report(9, rate >= 0.99 && corr <= -0.5,
         Format("%d/%d draws within +-%.2f (%.1f%%); entropy-PQ correlation "
                "%.3f over 500",
                within, draws, kCalibrationTolerance, 100.0 * rate, corr));
}

}  // namespace
}  // namespace incseg

int main() {
  using namespace incseg;
  LedgerAuditor auditor;
  PqOracleEquivalence();
  PqWorkedExample();
  AssessorQuality();
  StrategyAndThreshold(auditor);
  ShadowRebalancing();
  Determinism();
  LedgerInvariants(auditor);
  SimulatorCalibration();
  std::printf("%s: %d criteria failed\n", failures == 0 ? "OK" : "FAILED",
              failures);
  return failures == 0 ? 0 : 1;
}
