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

// The difficulty assessor: a ridge regressor from clustering-map features
// to the PQ the producing model achieved, plus a similarity baseline.

#ifndef INCSEG_ASSESSOR_H_
#define INCSEG_ASSESSOR_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "incseg/features.h"
#include "incseg/segmap.h"

namespace incseg {

inline constexpr double kDefaultRidgeLambda = 1e-3;

struct ShadowPair {
  FeatureVector features;
  double pq_score = 0.0;
};

struct AssessorModel {
  std::vector<std::string> names;
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 0.0;
  std::vector<double> mu;
  std::vector<double> sigma;  // strictly positive
  double training_mse = 0.0;

  // Unclamped linear output.
  double Raw(std::span<const double> features) const;
};

// Minimizes mean squared error plus lambda * |w|^2 over standardized
// features. Throws DataError for fewer than two pairs, ragged or non-finite
// features, and ConfigError for a negative lambda.
AssessorModel FitAssessor(std::span<const ShadowPair> pairs,
                          double lambda = kDefaultRidgeLambda,
                          std::vector<std::string> names = {});

// Linear prediction clamped to [0, 1]. Low means difficult.
double PredictFromFeatures(const AssessorModel& model,
                           std::span<const double> features);
double PredictDifficulty(const AssessorModel& model, const ClusteringMap& cmap,
                         const FeatureOptions& options = {});

// Backend seam for the engine; a convolutional model can implement this.
class DifficultyAssessor {
 public:
  virtual ~DifficultyAssessor() = default;
  virtual double Predict(const ClusteringMap& cmap) const = 0;
  // `features` are ExtractFeatures(cmap) under the engine's options, for
  // backends that can reuse them.
  virtual double Predict(const ClusteringMap& cmap,
                         std::span<const double> features) const {
    (void)features;
    return Predict(cmap);
  }
};

class RidgeAssessor : public DifficultyAssessor {
 public:
  RidgeAssessor(AssessorModel model, FeatureOptions options = {})
      : model_(std::move(model)), options_(options) {}

  double Predict(const ClusteringMap& cmap) const override {
    return PredictDifficulty(model_, cmap, options_);
  }
  double Predict(const ClusteringMap& cmap,
                 std::span<const double> features) const override {
    (void)cmap;
    return PredictFromFeatures(model_, features);
  }
  const AssessorModel& model() const { return model_; }

 private:
  AssessorModel model_;
  FeatureOptions options_;
};

// Plain key=value text: bias=, lambda=, then w.<name>=, mu.<name>=,
// sigma.<name>= per feature.
void WriteAssessorModel(std::ostream& out, const AssessorModel& model);
AssessorModel ReadAssessorModel(std::istream& in);
void SaveAssessorModel(const std::filesystem::path& path,
                       const AssessorModel& model);
AssessorModel LoadAssessorModel(const std::filesystem::path& path);

// Max cosine similarity to any supervised vector, mapped to [0, 1] by
// (1 + cos) / 2. A zero vector has cosine 0 with everything. Throws
// DataError when the supervised set is empty.
double MembershipScore(std::span<const double> query,
                       std::span<const FeatureVector> supervised);

}  // namespace incseg

#endif  // INCSEG_ASSESSOR_H_
