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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "incseg/errors.h"

namespace incseg {

namespace {

constexpr SampleId kEvalIdBase = SampleId{1} << 62;

SampleId StageIdBase(int stage) {
  return (static_cast<SampleId>(stage) << 32) + 1;
}

long InstanceTotal(std::span<const SamplePtr> samples) {
  long total = 0;
  for (const auto& s : samples) total += s->instance_count;
  return total;
}

}  // namespace

void Budget::Validate() const {
  if (!(annotation_fraction >= 0.0 && annotation_fraction <= 1.0)) {
    throw ConfigError("annotation_fraction must lie in [0, 1]");
  }
  if (!(easy_threshold >= 0.0 && easy_threshold <= 1.0)) {
    throw ConfigError("easy_threshold must lie in [0, 1]");
  }
}

int BudgetedInstances(double annotation_fraction, long package_instances) {
  const double raw = annotation_fraction * static_cast<double>(package_instances);
  return static_cast<int>(std::floor(raw + 1e-9));
}

double SourceWeight(LabelSource source) {
  switch (source) {
    case LabelSource::kFirstPackage:
      return 2.0;
    case LabelSource::kHardManual:
      return 4.0;
    case LabelSource::kEasyPseudo:
      return 1.0;
  }
  return 0.0;
}

std::string_view SourceName(LabelSource source) {
  switch (source) {
    case LabelSource::kFirstPackage:
      return "first_package";
    case LabelSource::kHardManual:
      return "hard_manual";
    case LabelSource::kEasyPseudo:
      return "easy_pseudo";
  }
  return "unknown";
}

RoutingDecision Route(std::span<const ScoredCandidate> scores,
                      int budget_instances, double easy_threshold) {
  std::vector<ScoredCandidate> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score < b.score;
              return a.id < b.id;
            });
  RoutingDecision routing;
  std::size_t i = 0;
  long used = 0;
  for (; i < sorted.size(); ++i) {
    if (used + sorted[i].instance_count > budget_instances) break;
    used += sorted[i].instance_count;
    routing.hard.push_back(sorted[i].id);
  }
  for (; i < sorted.size(); ++i) {
    if (sorted[i].score >= easy_threshold) {
      routing.easy.push_back(sorted[i].id);
    } else {
      routing.neutral.push_back(sorted[i].id);
    }
  }
  return routing;
}

const std::vector<std::string>& StrategyNames() {
  static const std::vector<std::string> names = {
      "random",        "easy",        "hard",
      "membership",    "pq_based",    "pq_based_star",
      "random_star",   "full_annotation"};
  return names;
}

Strategy ParseStrategy(std::string_view name) {
  Strategy s;
  s.name = std::string(name);
  if (name == "random") {
    s.rule = ScoreRule::kRandom;
  } else if (name == "easy") {
    s.rule = ScoreRule::kEasy;
  } else if (name == "hard" || name == "pq_based") {
    s.rule = ScoreRule::kAssessor;
  } else if (name == "membership") {
    s.rule = ScoreRule::kMembership;
  } else if (name == "pq_based_star") {
    s.rule = ScoreRule::kAssessor;
    s.admit_pseudo = true;
  } else if (name == "random_star") {
    s.rule = ScoreRule::kRandom;
    s.admit_pseudo = true;
    s.admit_all = true;
  } else if (name == "full_annotation") {
    s.rule = ScoreRule::kFull;
  } else {
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
  }
  return s;
}

std::vector<TrainingSignal> TrainingSignals(
    std::span<const WeightedItem> items) {
  std::vector<TrainingSignal> signals;
  signals.reserve(items.size());
  for (const auto& item : items) {
    signals.push_back({item.weight, item.pseudo_quality,
                       item.sample->difficulty,
                       item.source != LabelSource::kEasyPseudo});
  }
  return signals;
}

std::vector<TrainingSignal> TrainingSignals(
    std::span<const WeightedItem> supervised,
    std::span<const WeightedItem> pseudo) {
  auto signals = TrainingSignals(supervised);
  const auto extra = TrainingSignals(pseudo);
  signals.insert(signals.end(), extra.begin(), extra.end());
  return signals;
}

std::vector<CandidateResult> ScoreCandidates(
    std::span<const SamplePtr> candidates, const SimModel& annotation_model,
    const DifficultyAssessor& assessor, std::uint64_t master_seed, int stage,
    const FeatureOptions& options) {
  std::vector<CandidateResult> results;
  results.reserve(candidates.size());
  for (const auto& sample : candidates) {
    Rng rng = MakeRng(master_seed, StreamTag::kCandidateInference,
                      {static_cast<std::uint64_t>(stage), sample->id});
    InferenceResult inference =
        SimulateInferenceDetailed(annotation_model, *sample, rng);
    CandidateResult r;
    r.sample = sample;
    r.features = ExtractFeatures(inference.cmap, options);
    r.predicted_pq = assessor.Predict(inference.cmap, r.features);
    r.score = r.predicted_pq;
    r.achieved_pq = inference.achieved_pq;
    r.cmap = std::move(inference.cmap);
    results.push_back(std::move(r));
  }
  return results;
}

std::pair<std::vector<WeightedItem>, std::vector<WeightedItem>>
BuildTrainingSets(const StageState& state, const RoutingDecision& routing,
                  std::span<const LabelledSample> manual_labels,
                  std::span<const LabelledSample> pseudo_labels,
                  bool admit_pseudo) {
  std::unordered_map<SampleId, const LabelledSample*> manual;
  for (const auto& l : manual_labels) manual[l.sample->id] = &l;
  std::unordered_map<SampleId, const LabelledSample*> pseudo;
  for (const auto& l : pseudo_labels) pseudo[l.sample->id] = &l;

  std::vector<WeightedItem> supervised = state.supervised;
  for (SampleId id : routing.hard) {
    const auto it = manual.find(id);
    if (it == manual.end()) {
      throw DataError("hard sample " + std::to_string(id) +
                      " has no manual label");
    }
    const LabelledSample& l = *it->second;
    supervised.push_back({l.sample, std::make_shared<InstanceMap>(l.label),
                          LabelSource::kHardManual,
                          SourceWeight(LabelSource::kHardManual), 1.0,
                          l.features});
  }
  if (manual.size() != routing.hard.size()) {
    throw DataError("manual labels given for samples not routed to hard");
  }

  std::vector<WeightedItem> pseudo_items;
  std::unordered_set<SampleId> easy(routing.easy.begin(), routing.easy.end());
  for (const auto& [id, l] : pseudo) {
    if (!easy.count(id)) {
      throw DataError("pseudo label given for non-easy sample " +
                      std::to_string(id));
    }
  }
  if (admit_pseudo) {
    for (SampleId id : routing.easy) {
      const auto it = pseudo.find(id);
      if (it == pseudo.end()) {
        throw DataError("easy sample " + std::to_string(id) +
                        " has no pseudo label");
      }
      const LabelledSample& l = *it->second;
      pseudo_items.push_back(
          {l.sample, std::make_shared<InstanceMap>(l.label),
           LabelSource::kEasyPseudo, SourceWeight(LabelSource::kEasyPseudo),
           l.quality, l.features});
    }
  }
  return {std::move(supervised), std::move(pseudo_items)};
}

double EvaluateModel(const SimModel& model, std::span<const Sample> eval_set,
                     std::uint64_t master_seed, int stage) {
  if (eval_set.empty()) return 0.0;
  double total = 0.0;
  for (const auto& sample : eval_set) {
    Rng rng = MakeRng(master_seed, StreamTag::kEvalInference,
                      {static_cast<std::uint64_t>(stage), sample.id});
    total += SimulateAchievedPq(model, sample, rng);
  }
  return total / static_cast<double>(eval_set.size());
}

namespace {

bool SameModel(const SimModel& a, const SimModel& b) {
  return a.skill == b.skill && a.eta == b.eta && a.alpha == b.alpha &&
         a.floor == b.floor && a.noise == b.noise &&
         a.layer_count == b.layer_count && a.min_area == b.min_area;
}

void EvaluateBoth(const StageState& state, std::span<const Sample> eval_set,
                  StageReport& report) {
  report.annotation_pq = EvaluateModel(state.annotation_model, eval_set,
                                       state.master_seed, state.stage_index);
  report.production_pq =
      SameModel(state.annotation_model, state.production_model)
          ? report.annotation_pq
          : EvaluateModel(state.production_model, eval_set, state.master_seed,
                          state.stage_index);
}

}  // namespace

StageOutcome RunStage(const StageState& state,
                      std::span<const SamplePtr> package,
                      const StageContext& context) {
  if (context.assessor == nullptr) throw ConfigError("stage needs an assessor");
  context.budget.Validate();
  const Strategy& strategy = context.strategy;

  StageOutcome out;
  StageState& next = out.state;
  next.stage_index = state.stage_index + 1;
  next.master_seed = state.master_seed;
  const int stage = next.stage_index;
  const std::uint64_t seed = state.master_seed;

  std::vector<SamplePtr> candidates = state.pool;
  candidates.insert(candidates.end(), package.begin(), package.end());
  std::sort(candidates.begin(), candidates.end(),
            [](const SamplePtr& a, const SamplePtr& b) { return a->id < b->id; });

  const long package_instances = InstanceTotal(package);
  const int budget =
      strategy.rule == ScoreRule::kFull
          ? static_cast<int>(package_instances)
          : BudgetedInstances(context.budget.annotation_fraction,
                              package_instances);

  std::vector<CandidateResult> results =
      ScoreCandidates(candidates, state.annotation_model, *context.assessor,
                      seed, stage, context.features);

  std::vector<FeatureVector> supervised_features;
  if (strategy.rule == ScoreRule::kMembership) {
    for (const auto& item : state.supervised) {
      if (!item.features.empty()) supervised_features.push_back(item.features);
    }
  }
  std::vector<ScoredCandidate> scored;
  scored.reserve(results.size());
  double abs_error = 0.0;
  for (auto& r : results) {
    switch (strategy.rule) {
      case ScoreRule::kRandom: {
        Rng rng = MakeRng(seed, StreamTag::kRandomScores,
                          {static_cast<std::uint64_t>(stage), r.sample->id});
        r.score = Uniform01(rng);
        break;
      }
      case ScoreRule::kEasy:
        r.score = 1.0 - r.predicted_pq;
        break;
      case ScoreRule::kMembership:
        r.score = MembershipScore(r.features, supervised_features);
        break;
      case ScoreRule::kAssessor:
      case ScoreRule::kFull:
        break;
    }
    abs_error += std::abs(r.predicted_pq - r.achieved_pq);
    scored.push_back({r.sample->id, r.score, r.sample->instance_count});
  }

  const double threshold =
      strategy.admit_all ? 0.0 : context.budget.easy_threshold;
  const RoutingDecision routing = Route(scored, budget, threshold);

  std::unordered_map<SampleId, const CandidateResult*> by_id;
  for (const auto& r : results) by_id[r.sample->id] = &r;
  std::vector<LabelledSample> manual;
  long annotated = 0;
  for (SampleId id : routing.hard) {
    const CandidateResult& r = *by_id.at(id);
    manual.push_back({r.sample, r.sample->gt, 1.0, r.features});
    annotated += r.sample->instance_count;
  }
  std::vector<LabelledSample> pseudo;
  if (strategy.admit_pseudo) {
    for (SampleId id : routing.easy) {
      const CandidateResult& r = *by_id.at(id);
      pseudo.push_back({r.sample,
                        DecodeClustering(r.cmap, state.annotation_model.min_area),
                        r.achieved_pq, r.features});
    }
  }
  auto [supervised, pseudo_items] = BuildTrainingSets(
      state, routing, manual, pseudo, strategy.admit_pseudo);
  next.supervised = std::move(supervised);
  next.pseudo = std::move(pseudo_items);
  next.annotation_model =
      UpdateSkill(state.annotation_model, TrainingSignals(next.supervised));
  next.production_model =
      UpdateSkill(state.production_model,
                  TrainingSignals(next.supervised, next.pseudo));

  const std::unordered_set<SampleId> hard(routing.hard.begin(),
                                          routing.hard.end());
  for (const auto& c : candidates) {
    if (!hard.count(c->id)) next.pool.push_back(c);
  }
  next.cumulative_instances = state.cumulative_instances + annotated;

  StageReport& report = out.report;
  report.stage_index = stage;
  report.hard = static_cast<int>(routing.hard.size());
  report.easy = static_cast<int>(routing.easy.size());
  report.neutral = static_cast<int>(routing.neutral.size());
  report.pool = static_cast<int>(next.pool.size());
  report.annotated_instances = annotated;
  report.cumulative_instances = next.cumulative_instances;
  report.assessor_mae =
      results.empty() ? 0.0 : abs_error / static_cast<double>(results.size());
  EvaluateBoth(next, context.eval_set, report);

  if (context.observer) {
    context.observer(
        StageTransition{state, next, candidates, routing, budget, report});
  }
  return out;
}

void CampaignConfig::Validate() const {
  if (stages < 1) throw ConfigError("stages must be >= 1");
  if (package_instances < 1) throw ConfigError("package_instances must be >= 1");
  if (package_instances < scene.max_instances) {
    throw ConfigError("package_instances must be at least scene.max_instances");
  }
  if (eval_scenes < 0) throw ConfigError("eval_scenes must be >= 0");
  if (seeds.empty()) throw ConfigError("seed list must not be empty");
  if (!(ridge_lambda >= 0.0)) throw ConfigError("assess.lambda must be >= 0");
  if (!(sim.skill >= 0.0 && sim.skill <= 1.0)) {
    throw ConfigError("sim.initial_skill must lie in [0, 1]");
  }
  if (!(sim.eta > 0.0)) throw ConfigError("sim.eta must be > 0");
  if (!(sim.alpha >= 0.0 && sim.alpha <= 1.0)) {
    throw ConfigError("sim.alpha must lie in [0, 1]");
  }
  if (!(sim.floor >= 0.0 && sim.floor <= 1.0)) {
    throw ConfigError("sim.floor must lie in [0, 1]");
  }
  if (!(sim.noise >= 0.0)) throw ConfigError("sim.noise must be >= 0");
  if (sim.layer_count < 1 || sim.layer_count > 250) {
    throw ConfigError("sim.layers must lie in [1, 250]");
  }
  if (sim.min_area < 1) throw ConfigError("sim.min_area must be >= 1");
  if (instance_cap < 1) {
    throw ConfigError("assess.instance_cap must be >= 1");
  }
  budget.Validate();
  scene.Validate();
  shadow.Validate();
  if (!strategy.empty()) ParseStrategy(strategy);
}

std::vector<Sample> GenerateEvalSet(const SceneParams& params, int count,
                                    std::uint64_t master_seed) {
  Rng rng = MakeRng(master_seed, StreamTag::kEvalSet);
  std::vector<Sample> eval;
  eval.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int n = std::uniform_int_distribution<int>(
        params.min_instances, params.max_instances)(rng);
    eval.push_back(GenerateScene(params, n, kEvalIdBase + i, rng));
  }
  return eval;
}

std::vector<SamplePtr> StagePackage(const CampaignConfig& config,
                                    std::uint64_t master_seed, int stage) {
  Rng rng = MakeRng(master_seed, StreamTag::kPackage,
                    {static_cast<std::uint64_t>(stage)});
  std::vector<SamplePtr> out;
  for (auto& s : GeneratePackage(config.scene, config.package_instances,
                                 StageIdBase(stage), rng)) {
    out.push_back(std::make_shared<const Sample>(std::move(s)));
  }
  return out;
}

ShadowTrainer MakeShadowTrainer(const SimModel& initial) {
  return [initial](std::span<const Sample* const> train) {
    std::vector<TrainingSignal> signals;
    signals.reserve(train.size());
    for (const Sample* s : train) {
      signals.push_back({SourceWeight(LabelSource::kFirstPackage), 1.0,
                         s->difficulty, true});
    }
    return UpdateSkill(initial, signals);
  };
}

ShadowDataset BuildShadowDataset(const CampaignConfig& config,
                                 std::span<const Sample> labelled,
                                 std::uint64_t shadow_seed,
                                 std::uint64_t rebalance_seed) {
  ShadowDataset data;
  data.raw = GenerateShadowPairs(labelled, config.shadow, shadow_seed,
                                 MakeShadowTrainer(config.sim),
                                 config.feature_options());
  Rng rng(rebalance_seed);
  data.rebalanced = RebalanceUniform(data.raw, config.shadow.bins,
                                     config.shadow.per_bin_cap, rng);
  return data;
}

namespace {

AssessorModel FitFromShadow(const CampaignConfig& config,
                            const ShadowDataset& data) {
  if (data.rebalanced.size() < 2) {
    throw ConfigError(
        "shadow protocol produced fewer than 2 pairs; raise "
        "shadow.iterations");
  }
  return FitAssessor(data.rebalanced, config.ridge_lambda,
                     FeatureNames(config.sim.layer_count));
}

}  // namespace

Bootstrap RunBootstrap(const CampaignConfig& config, std::uint64_t seed) {
  config.Validate();
  Bootstrap boot;
  boot.seed = seed;
  StageState& state = boot.state;
  state.stage_index = 1;
  state.master_seed = seed;

  const std::vector<SamplePtr> package = StagePackage(config, seed, 1);
  std::vector<Sample> labelled;
  labelled.reserve(package.size());
  for (const auto& s : package) labelled.push_back(*s);

  for (const auto& s : package) {
    state.supervised.push_back({s, std::make_shared<InstanceMap>(s->gt),
                                LabelSource::kFirstPackage,
                                SourceWeight(LabelSource::kFirstPackage), 1.0,
                                {}});
  }
  state.annotation_model =
      UpdateSkill(config.sim, TrainingSignals(state.supervised));
  state.production_model = state.annotation_model;
  state.cumulative_instances = InstanceTotal(package);

  boot.shadow = BuildShadowDataset(config, labelled,
                                   DeriveSeed(seed, StreamTag::kShadow, {1}),
                                   DeriveSeed(seed, StreamTag::kRebalance, {1}));
  boot.assessor = FitFromShadow(config, boot.shadow);

  const RidgeAssessor assessor(boot.assessor, config.feature_options());
  const auto results = ScoreCandidates(package, state.annotation_model,
                                       assessor, seed, 1, config.feature_options());
  double abs_error = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    state.supervised[i].features = results[i].features;
    abs_error += std::abs(results[i].predicted_pq - results[i].achieved_pq);
  }

  boot.eval_set = GenerateEvalSet(config.scene, config.eval_scenes, seed);
  StageReport& report = boot.report;
  report.stage_index = 1;
  report.hard = static_cast<int>(package.size());
  report.annotated_instances = state.cumulative_instances;
  report.cumulative_instances = state.cumulative_instances;
  report.assessor_mae =
      results.empty() ? 0.0 : abs_error / static_cast<double>(results.size());
  EvaluateBoth(state, boot.eval_set, report);
  return boot;
}

CampaignResult RunCampaign(const CampaignConfig& config, std::uint64_t seed,
                           const Bootstrap* bootstrap,
                           const StageObserver& observer) {
  config.Validate();
  CampaignResult result;
  result.strategy = config.strategy;
  result.seed = seed;
  const Strategy strategy = ParseStrategy(config.strategy);

  Bootstrap local;
  if (bootstrap == nullptr) {
    local = RunBootstrap(config, seed);
    bootstrap = &local;
  } else if (bootstrap->seed != seed) {
    throw ConfigError("bootstrap was built for a different seed");
  }
  result.assessor = bootstrap->assessor;
  result.reports.push_back(bootstrap->report);
  result.collected_instances = bootstrap->report.annotated_instances;

  auto assessor = std::make_unique<RidgeAssessor>(bootstrap->assessor,
                                                  config.feature_options());
  StageContext context;
  context.strategy = strategy;
  context.budget = config.budget;
  context.eval_set = bootstrap->eval_set;
  context.features = config.feature_options();
  context.observer = observer;

  StageState state = bootstrap->state;
  for (int stage = 2; stage <= config.stages; ++stage) {
    context.assessor = assessor.get();
    const auto package = StagePackage(config, seed, stage);
    result.collected_instances += InstanceTotal(package);
    StageOutcome out = RunStage(state, package, context);
    state = std::move(out.state);
    result.reports.push_back(out.report);

    if (config.refit_assessor && stage < config.stages) {
      std::vector<Sample> labelled;
      for (const auto& item : state.supervised) labelled.push_back(*item.sample);
      const auto key = static_cast<std::uint64_t>(stage);
      result.assessor = FitFromShadow(
          config, BuildShadowDataset(
                      config, labelled,
                      DeriveSeed(seed, StreamTag::kRefit, {key}),
                      DeriveSeed(seed, StreamTag::kRebalance, {key})));
      assessor = std::make_unique<RidgeAssessor>(result.assessor,
                                                 config.feature_options());
    }
  }
  result.final_state = std::move(state);
  return result;
}

void LedgerAuditor::Fail(const StageTransition& t, const std::string& what) {
  violations_.push_back("stage " + std::to_string(t.after.stage_index) + ": " +
                        what);
}

void LedgerAuditor::Observe(const StageTransition& t) {
  ++transitions_;
  const RoutingDecision& r = t.routing;

  std::set<SampleId> candidate_ids;
  for (const auto& c : t.candidates) candidate_ids.insert(c->id);
  std::set<SampleId> routed;
  for (const auto* list : {&r.hard, &r.easy, &r.neutral}) {
    for (SampleId id : *list) {
      if (!routed.insert(id).second) Fail(t, "sample routed twice");
    }
  }
  if (r.hard.size() + r.easy.size() + r.neutral.size() !=
          t.candidates.size() ||
      routed != candidate_ids) {
    Fail(t, "routing does not partition the candidates");
  }

  const long delta = t.after.cumulative_instances - t.before.cumulative_instances;
  if (delta < 0) Fail(t, "annotation ledger decreased");
  if (delta > t.budget_instances) Fail(t, "annotation exceeded the budget");
  if (delta != t.report.annotated_instances ||
      t.after.cumulative_instances != t.report.cumulative_instances) {
    Fail(t, "report disagrees with the ledger");
  }

  for (const auto& item : t.after.supervised) {
    if (item.source == LabelSource::kEasyPseudo) {
      Fail(t, "pseudo label in the annotation model's training set");
    }
  }
  for (const auto& item : t.after.pseudo) {
    if (item.source != LabelSource::kEasyPseudo) {
      Fail(t, "manual label in the pseudo set");
    }
  }
  const SimModel expected =
      UpdateSkill(t.before.annotation_model, TrainingSignals(t.after.supervised));
  if (expected.skill != t.after.annotation_model.skill) {
    Fail(t, "annotation model was not trained on the supervised set alone");
  }

  std::set<SampleId> before_supervised;
  for (const auto& item : t.before.supervised) {
    before_supervised.insert(item.id());
  }
  for (SampleId id : r.hard) {
    if (before_supervised.count(id)) Fail(t, "sample annotated twice");
  }
  std::set<SampleId> after_supervised;
  for (const auto& item : t.after.supervised) {
    if (!after_supervised.insert(item.id()).second) {
      Fail(t, "duplicate supervised item");
    }
  }
  std::set<SampleId> after_pool;
  for (const auto& s : t.after.pool) {
    after_pool.insert(s->id);
    if (after_supervised.count(s->id)) Fail(t, "annotated sample in the pool");
  }
  const std::set<SampleId> hard(r.hard.begin(), r.hard.end());
  for (const auto& s : t.before.pool) {
    if (!hard.count(s->id) && !after_pool.count(s->id)) {
      Fail(t, "pooled sample dropped without annotation");
    }
    if (!candidate_ids.count(s->id)) Fail(t, "pooled sample was not re-scored");
  }
}

}  // namespace incseg
