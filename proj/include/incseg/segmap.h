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

// Instance maps, terrace clustering maps, and the Panoptic Quality metric.

#ifndef INCSEG_SEGMAP_H_
#define INCSEG_SEGMAP_H_

#include <cstdint>
#include <span>
#include <vector>

namespace incseg {

using InstanceId = std::int32_t;

inline constexpr int kDefaultMinArea = 4;

// Row-major grid of instance ids. 0 is background; every positive id is one
// instance. Ids are read off the grid, so an id can't exist without pixels.
class InstanceMap {
 public:
  InstanceMap() = default;
  // All-background map.
  InstanceMap(int width, int height);
  // Throws DataError on a size mismatch or a negative id.
  InstanceMap(int width, int height, std::vector<InstanceId> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return width_ * height_; }

  InstanceId at(int x, int y) const { return labels_[y * width_ + x]; }
  void set(int x, int y, InstanceId id);

  std::span<const InstanceId> labels() const { return labels_; }

  // Sorted distinct positive ids.
  std::vector<InstanceId> InstanceIds() const;
  int InstanceCount() const;

  bool SameShape(const InstanceMap& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool operator==(const InstanceMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<InstanceId> labels_;
};

// Binary pixel mask.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int width, int height);
  PixelMask(int width, int height, std::vector<std::uint8_t> bits);

  static PixelMask OfInstance(const InstanceMap& map, InstanceId id);

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const { return bits_[y * width_ + x] != 0; }
  void set(int x, int y, bool on) { bits_[y * width_ + x] = on ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  int Count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Per-pixel probability distribution over K+1 layers. Layer 0 is
// background, layers 1..K are terrace layers. Stored pixel-major.
class ClusteringMap {
 public:
  ClusteringMap() = default;
  // Every pixel starts as certain background.
  ClusteringMap(int width, int height, int layer_count);
  // Throws DataError if the size is wrong or a pixel distribution is off by
  // more than `tolerance`.
  ClusteringMap(int width, int height, int layer_count,
                std::vector<double> probs, double tolerance = 1e-6);

  int width() const { return width_; }
  int height() const { return height_; }
  int layer_count() const { return layer_count_; }
  int channels() const { return layer_count_ + 1; }
  int pixel_count() const { return width_ * height_; }

  double prob(int pixel, int layer) const {
    return probs_[static_cast<std::size_t>(pixel) * channels() + layer];
  }
  std::span<const double> pixel(int index) const {
    return std::span<const double>(probs_).subspan(
        static_cast<std::size_t>(index) * channels(), channels());
  }
  std::span<double> mutable_pixel(int index) {
    return std::span<double>(probs_).subspan(
        static_cast<std::size_t>(index) * channels(), channels());
  }
  std::span<const double> probs() const { return probs_; }

  // Throws DataError when any pixel breaks the distribution invariants.
  void Validate(double tolerance = 1e-6) const;

  bool operator==(const ClusteringMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int layer_count_ = 0;
  std::vector<double> probs_;
};

struct Match {
  InstanceId pred_id;
  InstanceId gt_id;
  double iou;
};

// Unique (pred, gt) pairs with IoU > 0.5, sorted by pred id.
struct MatchSet {
  std::vector<Match> matches;
};

struct PQResult {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  int tp_count = 0;
  int fp_count = 0;
  int fn_count = 0;
  double sum_iou = 0.0;
};

// |A ∩ B| / |A ∪ B|, or 0 when both masks are empty.
double Iou(const PixelMask& a, const PixelMask& b);

MatchSet MatchInstances(const InstanceMap& pred, const InstanceMap& gt);

// Class-agnostic PQ. Both maps empty scores 1; exactly one side empty
// scores 0.
PQResult PanopticQuality(const InstanceMap& pred, const InstanceMap& gt);

// 4-connected foreground components, ids in raster order of each region's
// first pixel.
InstanceMap ConnectedComponents(const PixelMask& mask);

// Per-pixel argmax layer; ties resolve to the lowest layer index.
std::vector<std::uint8_t> ArgmaxLayers(const ClusteringMap& cmap);

// Instances from a per-pixel layer assignment: 4-connected components of
// each terrace layer, dropping components smaller than `min_area`, numbered
// 1..n in (layer, raster) order.
InstanceMap InstancesFromLayers(int width, int height,
                                std::span<const std::uint8_t> layers,
                                int min_area = kDefaultMinArea);

InstanceMap DecodeClustering(const ClusteringMap& cmap,
                             int min_area = kDefaultMinArea);

// One-hot clustering map with each instance on the given terrace layer.
// `layer_of` is indexed by instance id (entry 0 unused).
ClusteringMap OneHotClustering(const InstanceMap& map, int layer_count,
                               std::span<const int> layer_of);

}  // namespace incseg

#endif  // INCSEG_SEGMAP_H_
