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

// The incremental learning engine: per-stage scoring, routing of hard, easy
// and neutral samples, weighted training-set assembly, model updates and
// pool bookkeeping, plus the multi-stage campaign driver.

#ifndef INCSEG_ENGINE_H_
#define INCSEG_ENGINE_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "incseg/assessor.h"
#include "incseg/shadow.h"
#include "incseg/simworld.h"

namespace incseg {

using SamplePtr = std::shared_ptr<const Sample>;

struct Budget {
  double annotation_fraction = 0.10;
  double easy_threshold = 0.60;

  void Validate() const;
};

// floor(annotation_fraction * package_instances)
int BudgetedInstances(double annotation_fraction, long package_instances);

enum class LabelSource { kFirstPackage, kHardManual, kEasyPseudo };

// 2:4:1
double SourceWeight(LabelSource source);
std::string_view SourceName(LabelSource source);

struct WeightedItem {
  SamplePtr sample;  // the simulator reads its hidden difficulty
  std::shared_ptr<const InstanceMap> label;
  LabelSource source = LabelSource::kFirstPackage;
  double weight = 2.0;
  double pseudo_quality = 1.0;
  // Features of the annotation model's clustering map when the item was
  // labelled; the membership baseline compares against these.
  FeatureVector features;

  SampleId id() const { return sample->id; }
};

struct ScoredCandidate {
  SampleId id = 0;
  double score = 0.0;
  int instance_count = 0;
};

struct RoutingDecision {
  std::vector<SampleId> hard;
  std::vector<SampleId> easy;
  std::vector<SampleId> neutral;
};

// Ascending score, ties by id. Hard takes samples while the running
// instance total stays within the budget and stops at the first sample that
// would overflow it. Of the rest, score >= easy_threshold is easy.
RoutingDecision Route(std::span<const ScoredCandidate> scores,
                      int budget_instances, double easy_threshold);

enum class ScoreRule { kRandom, kEasy, kAssessor, kMembership, kFull };

struct Strategy {
  std::string name;
  ScoreRule rule = ScoreRule::kAssessor;
  bool admit_pseudo = false;
  // Routing threshold override; random_star admits every non-hard sample.
  bool admit_all = false;
};

// random, easy, hard, membership, pq_based, pq_based_star, random_star,
// full_annotation. Throws ConfigError for anything else.
Strategy ParseStrategy(std::string_view name);
const std::vector<std::string>& StrategyNames();

struct StageState {
  int stage_index = 0;
  std::vector<SamplePtr> pool;  // sorted by id
  std::vector<WeightedItem> supervised;
  std::vector<WeightedItem> pseudo;
  SimModel annotation_model;
  SimModel production_model;
  std::uint64_t master_seed = 0;
  long cumulative_instances = 0;
};

struct StageReport {
  int stage_index = 0;
  int hard = 0;
  int easy = 0;
  int neutral = 0;
  int pool = 0;
  long annotated_instances = 0;
  long cumulative_instances = 0;
  double production_pq = 0.0;
  double annotation_pq = 0.0;
  double assessor_mae = 0.0;
};

// Everything the engine learns about one candidate at scoring time.
struct CandidateResult {
  SamplePtr sample;
  double predicted_pq = 0.0;  // assessor output, low = hard
  double score = 0.0;         // strategy routing score
  double achieved_pq = 0.0;   // simulator ground truth for the report
  ClusteringMap cmap;
  FeatureVector features;
};

std::vector<TrainingSignal> TrainingSignals(
    std::span<const WeightedItem> items);
std::vector<TrainingSignal> TrainingSignals(
    std::span<const WeightedItem> supervised,
    std::span<const WeightedItem> pseudo);

// Annotation-model inference plus assessor prediction per candidate, in
// candidate order. Inference for sample `id` at stage `stage` always uses the
// same random stream, whatever the strategy.
std::vector<CandidateResult> ScoreCandidates(
    std::span<const SamplePtr> candidates, const SimModel& annotation_model,
    const DifficultyAssessor& assessor, std::uint64_t master_seed, int stage,
    const FeatureOptions& options = {});

struct LabelledSample {
  SamplePtr sample;
  InstanceMap label;
  double quality = 1.0;
  FeatureVector features;
};

// supervised' = supervised plus weight-4 items for the hard samples;
// pseudo' = weight-1 items for `pseudo_labels`, rebuilt from scratch. When
// `admit_pseudo` is set every easy sample needs a pseudo label. Throws
// DataError for a missing label or a label for a sample routed elsewhere.
std::pair<std::vector<WeightedItem>, std::vector<WeightedItem>>
BuildTrainingSets(const StageState& state, const RoutingDecision& routing,
                  std::span<const LabelledSample> manual_labels,
                  std::span<const LabelledSample> pseudo_labels,
                  bool admit_pseudo);

// Mean achieved PQ over the evaluation set.
double EvaluateModel(const SimModel& model, std::span<const Sample> eval_set,
                     std::uint64_t master_seed, int stage);

struct StageTransition {
  const StageState& before;
  const StageState& after;
  std::span<const SamplePtr> candidates;
  const RoutingDecision& routing;
  int budget_instances = 0;
  const StageReport& report;
};
using StageObserver = std::function<void(const StageTransition&)>;

struct StageContext {
  const DifficultyAssessor* assessor = nullptr;
  Strategy strategy;
  Budget budget;
  std::span<const Sample> eval_set;
  FeatureOptions features;
  StageObserver observer;
};

struct StageOutcome {
  StageState state;
  StageReport report;
};

StageOutcome RunStage(const StageState& state,
                      std::span<const SamplePtr> package,
                      const StageContext& context);

struct CampaignConfig {
  std::string strategy;
  int stages = 6;
  int package_instances = 300;
  Budget budget;
  SceneParams scene;
  SimModel sim{.skill = 0.3};  // skill is the untrained starting skill
  ShadowConfig shadow;
  double ridge_lambda = kDefaultRidgeLambda;
  bool refit_assessor = false;
  int eval_scenes = 200;
  int instance_cap = kDefaultInstanceCap;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir;

  void Validate() const;
  FeatureOptions feature_options() const { return {instance_cap, sim.min_area}; }
};

struct ShadowDataset {
  std::vector<ShadowPair> raw;
  std::vector<ShadowPair> rebalanced;
};

// Shadow pairs from `labelled` with shadow models trained from the
// configured starting skill, then rebalanced.
ShadowDataset BuildShadowDataset(const CampaignConfig& config,
                                 std::span<const Sample> labelled,
                                 std::uint64_t shadow_seed,
                                 std::uint64_t rebalance_seed);

// Stage 1, shared by every strategy: the first package fully annotated,
// both models trained on it, and the assessor fitted on rebalanced shadow
// pairs.
struct Bootstrap {
  std::uint64_t seed = 0;
  StageState state;
  StageReport report;
  AssessorModel assessor;
  std::vector<Sample> eval_set;
  ShadowDataset shadow;
};

std::vector<Sample> GenerateEvalSet(const SceneParams& params, int count,
                                    std::uint64_t master_seed);
std::vector<SamplePtr> StagePackage(const CampaignConfig& config,
                                    std::uint64_t master_seed, int stage);
ShadowTrainer MakeShadowTrainer(const SimModel& initial);

Bootstrap RunBootstrap(const CampaignConfig& config, std::uint64_t seed);

struct CampaignResult {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<StageReport> reports;
  long collected_instances = 0;  // all packages, stage 1 included
  AssessorModel assessor;
  StageState final_state;
};

// Runs stage 1 (or reuses `bootstrap`, which must come from the same
// config and seed) and then stages 2..S under `config.strategy`.
CampaignResult RunCampaign(const CampaignConfig& config, std::uint64_t seed,
                           const Bootstrap* bootstrap = nullptr,
                           const StageObserver& observer = {});

// Checks the ledger invariants on every observed transition: routing
// partitions the candidates, the annotated-instance ledger never decreases
// and grows by at most the stage budget, no pseudo label reaches the
// annotation model, and no annotated sample is routed or pooled again.
class LedgerAuditor {
 public:
  void Observe(const StageTransition& t);
  StageObserver Callback() {
    return [this](const StageTransition& t) { Observe(t); };
  }

  bool ok() const { return violations_.empty(); }
  int transitions() const { return transitions_; }
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  void Fail(const StageTransition& t, const std::string& what);

  int transitions_ = 0;
  std::vector<std::string> violations_;
};

}  // namespace incseg

#endif  // INCSEG_ENGINE_H_
