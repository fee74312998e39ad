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

#include "incseg/features.h"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace incseg {

std::vector<std::string> FeatureNames(int layer_count) {
  std::vector<std::string> names = {"entropy_mean", "entropy_std",
                                    "margin_mean", "background_fraction"};
  for (int k = 1; k <= layer_count; ++k) {
    names.push_back("occupancy_" + std::to_string(k));
  }
  names.insert(names.end(), {"instance_count", "area_mean", "area_std",
                             "boundary_density"});
  return names;
}

FeatureVector ExtractFeatures(const ClusteringMap& cmap,
                              const FeatureOptions& options) {
  const int n = cmap.pixel_count();
  const int channels = cmap.channels();
  const int layers = cmap.layer_count();
  const double log_norm = std::log(static_cast<double>(channels));

  double entropy_sum = 0.0;
  double entropy_sq = 0.0;
  double margin_sum = 0.0;
  std::vector<std::uint8_t> argmax(n);
  std::vector<int> layer_pixels(channels, 0);
  for (int i = 0; i < n; ++i) {
    const auto px = cmap.pixel(i);
    double h = 0.0;
    double first = -1.0;
    double second = -1.0;
    int best = 0;
    // Softened maps repeat values within a pixel, so two cached terms
    // save most of the logarithms.
    double cached_p[2] = {-1.0, -1.0};
    double cached_term[2] = {0.0, 0.0};
    int slot = 0;
    for (int k = 0; k < channels; ++k) {
      const double p = px[k];
      if (p > 0.0 && p < 1.0) {
        if (p == cached_p[0]) {
          h -= cached_term[0];
        } else if (p == cached_p[1]) {
          h -= cached_term[1];
        } else {
          cached_p[slot] = p;
          cached_term[slot] = p * std::log(p);
          h -= cached_term[slot];
          slot ^= 1;
        }
      }
      if (p > first) {
        second = first;
        first = p;
        best = k;
      } else if (p > second) {
        second = p;
      }
    }
    h = std::clamp(h / log_norm, 0.0, 1.0);
    entropy_sum += h;
    entropy_sq += h * h;
    margin_sum += channels > 1 ? first - second : 1.0;
    argmax[i] = static_cast<std::uint8_t>(best);
    ++layer_pixels[best];
  }

  FeatureVector f;
  f.reserve(FeatureCount(layers));
  const double entropy_mean = entropy_sum / n;
  f.push_back(entropy_mean);
  f.push_back(
      std::sqrt(std::max(0.0, entropy_sq / n - entropy_mean * entropy_mean)));
  f.push_back(margin_sum / n);
  f.push_back(static_cast<double>(layer_pixels[0]) / n);
  for (int k = 1; k <= layers; ++k) {
    f.push_back(static_cast<double>(layer_pixels[k]) / n);
  }

  const InstanceMap decoded = InstancesFromLayers(
      cmap.width(), cmap.height(), argmax, options.min_area);
  std::vector<int> areas;
  for (InstanceId id : decoded.labels()) {
    if (id == 0) continue;
    if (static_cast<int>(areas.size()) < id) areas.resize(id, 0);
    ++areas[id - 1];
  }
  const int count = static_cast<int>(areas.size());
  f.push_back(std::min(1.0, static_cast<double>(count) /
                                std::max(1, options.instance_cap)));
  double area_mean = 0.0;
  double area_std = 0.0;
  if (count > 0) {
    for (int a : areas) area_mean += a;
    area_mean /= count;
    for (int a : areas) area_std += (a - area_mean) * (a - area_mean);
    area_std = std::sqrt(area_std / count);
  }
  f.push_back(area_mean / n);
  f.push_back(area_std / n);

  const int w = cmap.width();
  const int h = cmap.height();
  int boundary = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const std::uint8_t a = argmax[i];
      if ((x > 0 && argmax[i - 1] != a) || (x + 1 < w && argmax[i + 1] != a) ||
          (y > 0 && argmax[i - w] != a) || (y + 1 < h && argmax[i + w] != a)) {
        ++boundary;
      }
    }
  }
  f.push_back(static_cast<double>(boundary) / n);
  return f;
}

}  // namespace incseg
