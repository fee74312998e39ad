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

// Synthetic scenes and a simulated terrace segmenter whose competence is a
// single skill value. The simulator stands in for a real network: it turns
// a target PQ into a clustering map that decodes to roughly that PQ, with
// confidence that drops as the target drops.

#ifndef INCSEG_SIMWORLD_H_
#define INCSEG_SIMWORLD_H_

#include <cstdint>
#include <span>
#include <vector>

#include "incseg/rng.h"
#include "incseg/segmap.h"

namespace incseg {

using SampleId = std::uint64_t;

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 1.0;
  double ry = 1.0;
};

struct Scene {
  std::vector<Ellipse> shapes;  // paint order; later shapes occlude earlier
  double crowding = 0.0;
};

struct SceneParams {
  int width = 64;
  int height = 64;
  int min_instances = 3;
  int max_instances = 8;
  // Scales the per-scene probability of placing a shape against an existing
  // one instead of in free space.
  double overlap_pressure = 1.0;
  double min_radius = 4.0;
  double max_radius = 11.0;
  // Instances left smaller than this after occlusion cause a redraw.
  int min_instance_area = 16;

  void Validate() const;
};

struct Sample {
  SampleId id = 0;
  Scene scene;
  InstanceMap gt;
  int instance_count = 0;
  // Hidden from the engine; only the simulator reads it.
  double difficulty = 0.0;
};

struct DifficultyTerms {
  double adjacency = 0.0;
  double area_cv = 0.0;
  double boundary_contact = 0.0;
  double value = 0.0;
};

// How a pseudo label's quality q enters the skill update.
enum class PseudoLabelResponse {
  kZeroFloor,  // q as is: a useless label adds nothing
  kSigned,     // 2q - 1: labels below PQ 0.5 actively hurt
};

struct SimModel {
  double skill = 0.5;
  double eta = 0.08;
  double alpha = 0.7;
  double floor = 0.2;
  double noise = 0.03;
  int layer_count = 4;
  int min_area = kDefaultMinArea;
  PseudoLabelResponse pseudo_response = PseudoLabelResponse::kSigned;
};

// One training example as the skill update sees it.
struct TrainingSignal {
  double weight = 1.0;
  double quality = 1.0;  // 1 for manual labels, achieved PQ for pseudo labels
  double difficulty = 0.0;
  bool manual = true;
};

DifficultyTerms ComputeDifficulty(const InstanceMap& gt);
inline double IntrinsicDifficulty(const InstanceMap& gt) {
  return ComputeDifficulty(gt).value;
}

// Renders one scene with exactly `instance_count` instances.
Sample GenerateScene(const SceneParams& params, int instance_count,
                     SampleId id, Rng& rng);

// Scenes whose instance counts sum to exactly `instance_budget`. Ids are
// first_id, first_id + 1, ... Throws ConfigError if the budget can't be
// composed from the configured count range.
std::vector<Sample> GeneratePackage(const SceneParams& params,
                                    int instance_budget, SampleId first_id,
                                    Rng& rng);

// clamp(p0 + (1 - p0) * s * (1 - alpha * d), 0, 1)
double ExpectedPq(const SimModel& model, double difficulty);

// s' = clamp(s + eta * sum(w_hat * q * (0.5 + d)) * (1 - s), 0, 1).
// w_hat normalizes by the total weight of manual items, so pseudo labels
// add to the update instead of diluting it. With no manual items the total
// weight is used.
SimModel UpdateSkill(const SimModel& model,
                     std::span<const TrainingSignal> items);

// Greedy colouring by descending area so adjacent instances land on
// different terrace layers. Indexed by instance id; entry 0 is 0.
std::vector<int> AssignTerraceLayers(const InstanceMap& gt, int layer_count);

inline constexpr double kCalibrationTolerance = 0.05;
inline constexpr int kMaxCalibrationSteps = 32;

struct InferenceResult {
  ClusteringMap cmap;
  double target_pq = 0.0;
  double achieved_pq = 0.0;
  int evaluations = 0;
};

// Draws a target PQ from the model and corrupts the one-hot terrace
// encoding of the ground truth until the decoded map lands within
// kCalibrationTolerance of it. Throws CalibrationError otherwise.
InferenceResult SimulateInferenceDetailed(const SimModel& model,
                                          const Sample& sample, Rng& rng);

// Same, with the target given instead of drawn.
InferenceResult SimulateInferenceAt(const SimModel& model, const Sample& sample,
                                    double target_pq, Rng& rng);

// The achieved PQ of SimulateInferenceDetailed under the same random
// stream, without materializing the clustering map.
double SimulateAchievedPq(const SimModel& model, const Sample& sample,
                          Rng& rng);

inline ClusteringMap SimulateInference(const SimModel& model,
                                       const Sample& sample, Rng& rng) {
  return SimulateInferenceDetailed(model, sample, rng).cmap;
}

}  // namespace incseg

#endif  // INCSEG_SIMWORLD_H_
