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

#include "incseg/engine.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "incseg/errors.h"

namespace incseg {
namespace {

class ConstantAssessor : public DifficultyAssessor {
 public:
  explicit ConstantAssessor(double v) : v_(v) {}
  double Predict(const ClusteringMap&) const override { return v_; }

 private:
  double v_;
};

std::vector<ScoredCandidate> Candidates(const std::vector<double>& scores,
                                        int instances) {
  std::vector<ScoredCandidate> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({static_cast<SampleId>(i + 1), scores[i], instances});
  }
  return out;
}

TEST(BudgetTest, InstanceBudgets) {
  EXPECT_EQ(BudgetedInstances(0.10, 1575), 157);
  EXPECT_EQ(BudgetedInstances(0.10, 300), 30);
  EXPECT_EQ(BudgetedInstances(0.10, 30), 3);
  EXPECT_EQ(BudgetedInstances(0.0, 300), 0);
  EXPECT_EQ(BudgetedInstances(1.0, 300), 300);
  EXPECT_EQ(BudgetedInstances(0.3, 10), 3);
}

TEST(BudgetTest, Validation) {
  Budget b;
  EXPECT_NO_THROW(b.Validate());
  b.annotation_fraction = 1.5;
  EXPECT_THROW(b.Validate(), ConfigError);
  b = Budget{};
  b.easy_threshold = -0.1;
  EXPECT_THROW(b.Validate(), ConfigError);
}

TEST(RouteTest, EmptyCandidates) {
  const RoutingDecision r = Route({}, 10, 0.6);
  EXPECT_TRUE(r.hard.empty());
  EXPECT_TRUE(r.easy.empty());
  EXPECT_TRUE(r.neutral.empty());
}

TEST(RouteTest, NoBudgetAllEasy) {
  const auto c = Candidates({0.7, 0.9, 0.65}, 3);
  const RoutingDecision r = Route(c, 0, 0.6);
  EXPECT_TRUE(r.hard.empty());
  EXPECT_EQ(r.easy.size(), 3u);
}

TEST(RouteTest, TenSamplesOfThreeInstances) {
  const auto c = Candidates(
      {0.5, 0.42, 0.9, 0.31, 0.77, 0.6, 0.58, 0.33, 0.95, 0.2}, 3);
  const RoutingDecision r = Route(c, BudgetedInstances(0.10, 30), 0.6);
  EXPECT_EQ(r.hard, (std::vector<SampleId>{10}));
  EXPECT_EQ(r.easy.size() + r.neutral.size(), 9u);
}

TEST(RouteTest, TiesBrokenById) {
  const auto c = Candidates({0.4, 0.4, 0.4}, 2);
  const RoutingDecision r = Route(c, 4, 0.6);
  EXPECT_EQ(r.hard, (std::vector<SampleId>{1, 2}));
  EXPECT_EQ(r.neutral, (std::vector<SampleId>{3}));
}

TEST(RouteTest, GreedyStopsAtFirstOverflow) {
  std::vector<ScoredCandidate> c = {{1, 0.1, 3}, {2, 0.2, 5}, {3, 0.3, 1}};
  const RoutingDecision r = Route(c, 6, 0.6);
  EXPECT_EQ(r.hard, (std::vector<SampleId>{1}));
}

TEST(RouteTest, PartitionAndThresholdProperties) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredCandidate> c;
    const int n = trial % 25;
    int max_count = 1;
    for (int i = 0; i < n; ++i) {
      const int k = 1 + static_cast<int>(Uniform01(rng) * 8);
      max_count = std::max(max_count, k);
      c.push_back({static_cast<SampleId>(100 + i * 3), Uniform01(rng), k});
    }
    const int budget = static_cast<int>(Uniform01(rng) * 40);
    const double threshold = Uniform01(rng);
    const RoutingDecision r = Route(c, budget, threshold);

    std::map<SampleId, ScoredCandidate> by_id;
    for (const auto& s : c) by_id[s.id] = s;
    std::set<SampleId> seen;
    int hard_instances = 0;
    double hardest_left = 2.0;
    for (SampleId id : r.hard) {
      ASSERT_TRUE(seen.insert(id).second);
      hard_instances += by_id[id].instance_count;
    }
    for (SampleId id : r.easy) {
      ASSERT_TRUE(seen.insert(id).second);
      EXPECT_GE(by_id[id].score, threshold);
      hardest_left = std::min(hardest_left, by_id[id].score);
    }
    for (SampleId id : r.neutral) {
      ASSERT_TRUE(seen.insert(id).second);
      EXPECT_LT(by_id[id].score, threshold);
      hardest_left = std::min(hardest_left, by_id[id].score);
    }
    EXPECT_EQ(seen.size(), c.size());
    EXPECT_LE(hard_instances, budget);
    for (SampleId id : r.hard) EXPECT_LE(by_id[id].score, hardest_left);
    if (r.hard.size() < c.size()) {
      EXPECT_GT(budget - hard_instances, -1);
      EXPECT_LT(budget - hard_instances, max_count);
    }
  }
}

TEST(StrategyTest, Names) {
  for (const auto& name : StrategyNames()) {
    EXPECT_EQ(ParseStrategy(name).name, name);
  }
  EXPECT_THROW(ParseStrategy("bogus"), ConfigError);
  EXPECT_FALSE(ParseStrategy("random").admit_pseudo);
  EXPECT_TRUE(ParseStrategy("random_star").admit_pseudo);
  EXPECT_TRUE(ParseStrategy("pq_based_star").admit_pseudo);
  EXPECT_FALSE(ParseStrategy("pq_based").admit_pseudo);
  EXPECT_EQ(ParseStrategy("hard").rule, ScoreRule::kAssessor);
}

TEST(SourceWeightTest, TwoFourOne) {
  EXPECT_EQ(SourceWeight(LabelSource::kFirstPackage), 2.0);
  EXPECT_EQ(SourceWeight(LabelSource::kHardManual), 4.0);
  EXPECT_EQ(SourceWeight(LabelSource::kEasyPseudo), 1.0);
}

std::vector<SamplePtr> SmallPackage(int instances, std::uint64_t seed,
                                    SampleId first = 1,
                                    SceneParams params = {}) {
  Rng rng(seed);
  std::vector<SamplePtr> out;
  for (auto& s : GeneratePackage(params, instances, first, rng)) {
    out.push_back(std::make_shared<const Sample>(std::move(s)));
  }
  return out;
}

TEST(ScoreCandidatesTest, EmptyAndConstant) {
  const ConstantAssessor half(0.5);
  EXPECT_TRUE(ScoreCandidates({}, SimModel{}, half, 1, 2).empty());
  const auto one = SmallPackage(5, 3);
  const auto r = ScoreCandidates(std::span(one).first(1), SimModel{}, half, 1, 2);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].sample->id, one[0]->id);
  EXPECT_EQ(r[0].score, 0.5);
}

TEST(ScoreCandidatesTest, DeterministicAndStreamKeyed) {
  const auto package = SmallPackage(50, 4);
  ASSERT_GE(package.size(), 6u);
  const ConstantAssessor half(0.5);
  const auto a = ScoreCandidates(package, SimModel{}, half, 9, 3);
  const auto b = ScoreCandidates(package, SimModel{}, half, 9, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].achieved_pq, b[i].achieved_pq);
    EXPECT_EQ(a[i].cmap, b[i].cmap);
  }
  // A candidate's inference doesn't depend on who else is scored.
  std::vector<SamplePtr> reversed(package.rbegin(), package.rend());
  const auto c = ScoreCandidates(reversed, SimModel{}, half, 9, 3);
  EXPECT_EQ(c.back().achieved_pq, a.front().achieved_pq);
}

StageState FirstPackageState(const std::vector<SamplePtr>& package) {
  StageState s;
  s.stage_index = 1;
  for (const auto& p : package) {
    s.supervised.push_back({p, std::make_shared<InstanceMap>(p->gt),
                            LabelSource::kFirstPackage, 2.0, 1.0, {}});
  }
  return s;
}

TEST(BuildTrainingSetsTest, TwoFourOneMultiset) {
  SceneParams three;
  three.min_instances = three.max_instances = 3;
  const auto first = SmallPackage(15, 5, 1, three);
  ASSERT_EQ(first.size(), 5u);
  const auto next = SmallPackage(15, 6, 100, three);
  const StageState state = FirstPackageState(first);
  RoutingDecision routing;
  routing.hard = {next[0]->id, next[1]->id};
  routing.easy = {next[2]->id, next[3]->id, next[4]->id};
  std::vector<LabelledSample> manual;
  for (int i = 0; i < 2; ++i) manual.push_back({next[i], next[i]->gt, 1.0, {}});
  std::vector<LabelledSample> pseudo;
  for (int i = 2; i < 5; ++i) pseudo.push_back({next[i], next[i]->gt, 0.8, {}});

  const auto [supervised, pseudo_items] =
      BuildTrainingSets(state, routing, manual, pseudo, true);
  std::multiset<double> weights;
  for (const auto& it : supervised) weights.insert(it.weight);
  for (const auto& it : pseudo_items) weights.insert(it.weight);
  EXPECT_EQ(weights, (std::multiset<double>{2, 2, 2, 2, 2, 4, 4, 1, 1, 1}));
  for (const auto& it : pseudo_items) {
    EXPECT_EQ(it.source, LabelSource::kEasyPseudo);
    EXPECT_EQ(it.pseudo_quality, 0.8);
  }

  const auto [sup2, pseudo2] =
      BuildTrainingSets(state, routing, manual, pseudo, false);
  EXPECT_EQ(sup2.size(), 7u);
  EXPECT_TRUE(pseudo2.empty());
}

TEST(BuildTrainingSetsTest, NoHardLeavesSupervisedUnchanged) {
  const auto first = SmallPackage(15, 5);
  const StageState state = FirstPackageState(first);
  const auto [supervised, pseudo] =
      BuildTrainingSets(state, RoutingDecision{}, {}, {}, true);
  ASSERT_EQ(supervised.size(), state.supervised.size());
  for (std::size_t i = 0; i < supervised.size(); ++i) {
    EXPECT_EQ(supervised[i].id(), state.supervised[i].id());
    EXPECT_EQ(supervised[i].weight, 2.0);
  }
}

TEST(BuildTrainingSetsTest, MissingLabelsThrow) {
  const auto first = SmallPackage(15, 5);
  const StageState state = FirstPackageState(first);
  RoutingDecision routing;
  routing.hard = {first[0]->id};
  EXPECT_THROW(BuildTrainingSets(state, routing, {}, {}, false), DataError);
}

CampaignConfig SmallConfig(const std::string& strategy) {
  CampaignConfig c;
  c.strategy = strategy;
  c.stages = 4;
  c.package_instances = 80;
  c.eval_scenes = 20;
  c.shadow.iterations = 12;
  return c;
}

TEST(RunStageTest, EmptyPackageAndPool) {
  const CampaignConfig config = SmallConfig("pq_based");
  const Bootstrap boot = RunBootstrap(config, 3);
  StageState state = boot.state;
  const RidgeAssessor assessor(boot.assessor);
  StageContext ctx;
  ctx.assessor = &assessor;
  ctx.strategy = ParseStrategy("pq_based");
  ctx.eval_set = boot.eval_set;
  const StageOutcome out = RunStage(state, {}, ctx);
  EXPECT_EQ(out.state.stage_index, state.stage_index + 1);
  EXPECT_EQ(out.state.supervised.size(), state.supervised.size());
  EXPECT_TRUE(out.state.pool.empty());
  EXPECT_EQ(out.state.cumulative_instances, state.cumulative_instances);
  EXPECT_EQ(out.report.hard, 0);
  EXPECT_EQ(out.report.annotated_instances, 0);
}

TEST(RunStageTest, DeterministicAndPoolBookkeeping) {
  const CampaignConfig config = SmallConfig("pq_based_star");
  const Bootstrap boot = RunBootstrap(config, 4);
  const RidgeAssessor assessor(boot.assessor);
  StageContext ctx;
  ctx.assessor = &assessor;
  ctx.strategy = ParseStrategy("pq_based_star");
  ctx.budget.easy_threshold = 0.3;
  ctx.eval_set = boot.eval_set;
  const auto package = StagePackage(config, 4, 2);
  const StageOutcome a = RunStage(boot.state, package, ctx);
  const StageOutcome b = RunStage(boot.state, package, ctx);
  EXPECT_EQ(a.report.production_pq, b.report.production_pq);
  EXPECT_EQ(a.state.annotation_model.skill, b.state.annotation_model.skill);
  EXPECT_EQ(a.state.pool.size(), b.state.pool.size());
  EXPECT_EQ(static_cast<int>(a.state.pool.size()),
            a.report.easy + a.report.neutral);
  EXPECT_EQ(static_cast<int>(a.state.pseudo.size()), a.report.easy);
  EXPECT_TRUE(std::is_sorted(a.state.pool.begin(), a.state.pool.end(),
                             [](const SamplePtr& x, const SamplePtr& y) {
                               return x->id < y->id;
                             }));
  EXPECT_LE(a.report.annotated_instances, BudgetedInstances(0.10, 80));
}

TEST(RunCampaignTest, LedgerInvariantsForEveryStrategy) {
  CampaignConfig config = SmallConfig("");
  const Bootstrap boot = RunBootstrap(config, 7);
  for (const auto& name : StrategyNames()) {
    config.strategy = name;
    LedgerAuditor auditor;
    const CampaignResult r = RunCampaign(config, 7, &boot, auditor.Callback());
    EXPECT_TRUE(auditor.ok()) << name << ": "
                              << (auditor.ok() ? "" : auditor.violations()[0]);
    EXPECT_EQ(auditor.transitions(), config.stages - 1);
    ASSERT_EQ(static_cast<int>(r.reports.size()), config.stages);
    for (std::size_t i = 1; i < r.reports.size(); ++i) {
      EXPECT_GE(r.reports[i].cumulative_instances,
                r.reports[i - 1].cumulative_instances);
    }
  }
}

TEST(RunCampaignTest, CumulativeBudgetArithmetic) {
  CampaignConfig config = SmallConfig("pq_based");
  config.stages = 6;
  const CampaignResult r = RunCampaign(config, 8);
  const int per_stage = BudgetedInstances(0.10, 80);
  const long first = r.reports[0].cumulative_instances;
  EXPECT_EQ(first, 80);
  const long last = r.reports.back().cumulative_instances;
  EXPECT_LE(last, first + 5 * per_stage);
  EXPECT_GE(last, first + 5 * (per_stage - (config.scene.max_instances - 1)));
  EXPECT_EQ(r.collected_instances, 6 * 80);
}

TEST(RunCampaignTest, FullAnnotationAnnotatesEverything) {
  const CampaignResult r = RunCampaign(SmallConfig("full_annotation"), 9);
  for (std::size_t i = 1; i < r.reports.size(); ++i) {
    EXPECT_EQ(r.reports[i].annotated_instances, 80);
    EXPECT_EQ(r.reports[i].pool, 0);
  }
}

TEST(RunCampaignTest, RandomStarSharesRandomHardSets) {
  CampaignConfig config = SmallConfig("random");
  const Bootstrap boot = RunBootstrap(config, 10);
  std::vector<std::vector<SampleId>> hard_random;
  std::vector<std::vector<SampleId>> hard_star;
  std::vector<std::size_t> pseudo_star;
  RunCampaign(config, 10, &boot, [&](const StageTransition& t) {
    hard_random.push_back(t.routing.hard);
    EXPECT_TRUE(t.after.pseudo.empty());
  });
  config.strategy = "random_star";
  RunCampaign(config, 10, &boot, [&](const StageTransition& t) {
    hard_star.push_back(t.routing.hard);
    pseudo_star.push_back(t.after.pseudo.size());
    EXPECT_EQ(t.after.pseudo.size(),
              t.candidates.size() - t.routing.hard.size());
  });
  EXPECT_EQ(hard_random, hard_star);
  for (std::size_t n : pseudo_star) EXPECT_GT(n, 0u);
}

TEST(RunCampaignTest, PseudoSetIsTheEasySet) {
  CampaignConfig config = SmallConfig("pq_based_star");
  config.budget.easy_threshold = 0.6;
  RunCampaign(config, 11, nullptr, [&](const StageTransition& t) {
    std::set<SampleId> easy(t.routing.easy.begin(), t.routing.easy.end());
    std::set<SampleId> pseudo;
    for (const auto& item : t.after.pseudo) pseudo.insert(item.id());
    EXPECT_EQ(pseudo, easy);
  });
}

TEST(RunCampaignTest, SingleStageIsBootstrapOnly) {
  CampaignConfig config = SmallConfig("pq_based_star");
  config.stages = 1;
  const CampaignResult r = RunCampaign(config, 12);
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_EQ(r.reports[0].production_pq, r.reports[0].annotation_pq);
}

TEST(RunCampaignTest, RefitAssessorRuns) {
  CampaignConfig config = SmallConfig("pq_based");
  config.refit_assessor = true;
  LedgerAuditor auditor;
  const CampaignResult r = RunCampaign(config, 13, nullptr, auditor.Callback());
  EXPECT_TRUE(auditor.ok());
  EXPECT_EQ(static_cast<int>(r.reports.size()), config.stages);
}

TEST(RunCampaignTest, BootstrapSeedMustMatch) {
  const CampaignConfig config = SmallConfig("pq_based");
  const Bootstrap boot = RunBootstrap(config, 1);
  EXPECT_THROW(RunCampaign(config, 2, &boot), ConfigError);
}

TEST(LedgerAuditorTest, FlagsPseudoInSupervised) {
  const auto package = SmallPackage(15, 14);
  StageState before = FirstPackageState(package);
  before.cumulative_instances = 15;
  StageState after = before;
  after.stage_index = 2;
  after.supervised.back().source = LabelSource::kEasyPseudo;
  after.annotation_model =
      UpdateSkill(before.annotation_model, TrainingSignals(after.supervised));
  const RoutingDecision routing;
  StageReport report;
  report.cumulative_instances = 15;
  LedgerAuditor auditor;
  auditor.Observe(StageTransition{before, after, {}, routing, 0, report});
  EXPECT_FALSE(auditor.ok());
}

TEST(LedgerAuditorTest, FlagsOverspend) {
  StageState before;
  before.cumulative_instances = 10;
  StageState after = before;
  after.cumulative_instances = 20;
  StageReport report;
  report.annotated_instances = 10;
  report.cumulative_instances = 20;
  const RoutingDecision routing;
  LedgerAuditor auditor;
  auditor.Observe(StageTransition{before, after, {}, routing, 5, report});
  ASSERT_FALSE(auditor.ok());
  EXPECT_NE(auditor.violations()[0].find("budget"), std::string::npos);
}

}  // namespace
}  // namespace incseg
