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

// Summary features of a clustering map. These stand in for the
// convolutional encoder of the difficulty assessor.

#ifndef INCSEG_FEATURES_H_
#define INCSEG_FEATURES_H_

#include <string>
#include <vector>

#include "incseg/segmap.h"

namespace incseg {

inline constexpr int kDefaultInstanceCap = 16;

struct FeatureOptions {
  int instance_cap = kDefaultInstanceCap;
  int min_area = kDefaultMinArea;
};

// Slot order: entropy_mean, entropy_std, margin_mean, background_fraction,
// occupancy_1..occupancy_K, instance_count, area_mean, area_std,
// boundary_density.
using FeatureVector = std::vector<double>;

std::vector<std::string> FeatureNames(int layer_count);
inline int FeatureCount(int layer_count) { return layer_count + 8; }

FeatureVector ExtractFeatures(const ClusteringMap& cmap,
                              const FeatureOptions& options = {});

}  // namespace incseg

#endif  // INCSEG_FEATURES_H_
