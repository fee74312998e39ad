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

#include "incseg/segmap.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>

#include "incseg/errors.h"

namespace incseg {

namespace {

void CheckDimensions(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw DataError("map dimensions must be positive, got " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
}

void CheckSameShape(const InstanceMap& a, const InstanceMap& b) {
  if (!a.SameShape(b)) {
    throw DimensionMismatch(
        "instance maps differ in size: " + std::to_string(a.width()) + "x" +
        std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
        std::to_string(b.height()));
  }
}

// Maps arbitrary instance ids onto 1..n in ascending id order; 0 stays 0.
class DenseIds {
 public:
  explicit DenseIds(std::span<const InstanceId> labels) {
    InstanceId max_id = 0;
    for (InstanceId v : labels) max_id = std::max(max_id, v);
    if (max_id < (1 << 16)) {
      direct_.assign(static_cast<std::size_t>(max_id) + 1, 0);
      for (InstanceId v : labels) direct_[v] = 1;
      for (InstanceId id = 1; id <= max_id; ++id) {
        if (direct_[id] != 0) {
          ids_.push_back(id);
          direct_[id] = static_cast<int>(ids_.size());
        }
      }
    } else {
      for (InstanceId v : labels) {
        if (v > 0) sparse_.emplace(v, 0);
      }
      for (auto& [id, unused] : sparse_) ids_.push_back(id);
      std::sort(ids_.begin(), ids_.end());
      for (std::size_t i = 0; i < ids_.size(); ++i) {
        sparse_[ids_[i]] = static_cast<int>(i) + 1;
      }
      use_sparse_ = true;
    }
  }

  int Index(InstanceId id) const {
    if (id == 0) return 0;
    return use_sparse_ ? sparse_.at(id) : direct_[id];
  }
  int count() const { return static_cast<int>(ids_.size()); }
  InstanceId Id(int index) const { return ids_[index - 1]; }

 private:
  bool use_sparse_ = false;
  std::vector<int> direct_;
  std::unordered_map<InstanceId, int> sparse_;
  std::vector<InstanceId> ids_;
};

// Pixel areas and pairwise intersections between two same-shaped maps.
struct OverlapTable {
  DenseIds pred;
  DenseIds gt;
  std::vector<int> pred_area;
  std::vector<int> gt_area;
  std::vector<int> intersection;  // (pred_count+1) x (gt_count+1)

  OverlapTable(const InstanceMap& p, const InstanceMap& g)
      : pred(p.labels()), gt(g.labels()) {
    const int np = pred.count() + 1;
    const int ng = gt.count() + 1;
    pred_area.assign(np, 0);
    gt_area.assign(ng, 0);
    intersection.assign(static_cast<std::size_t>(np) * ng, 0);
    const auto pl = p.labels();
    const auto gl = g.labels();
    for (std::size_t i = 0; i < pl.size(); ++i) {
      const int a = pred.Index(pl[i]);
      const int b = gt.Index(gl[i]);
      ++pred_area[a];
      ++gt_area[b];
      ++intersection[static_cast<std::size_t>(a) * ng + b];
    }
  }

  int Inter(int a, int b) const {
    return intersection[static_cast<std::size_t>(a) * (gt.count() + 1) + b];
  }
};

MatchSet MatchFromTable(const OverlapTable& table) {
  MatchSet result;
  for (int a = 1; a <= table.pred.count(); ++a) {
    for (int b = 1; b <= table.gt.count(); ++b) {
      const int inter = table.Inter(a, b);
      if (inter == 0) continue;
      const int uni = table.pred_area[a] + table.gt_area[b] - inter;
      // IoU > 0.5 compared in integers so that exactly 0.5 never matches.
      if (2 * inter > uni) {
        result.matches.push_back(
            {table.pred.Id(a), table.gt.Id(b),
             static_cast<double>(inter) / static_cast<double>(uni)});
      }
    }
  }
  return result;
}

}  // namespace

InstanceMap::InstanceMap(int width, int height)
    : width_(width), height_(height) {
  CheckDimensions(width, height);
  labels_.assign(static_cast<std::size_t>(width) * height, 0);
}

InstanceMap::InstanceMap(int width, int height, std::vector<InstanceId> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  CheckDimensions(width, height);
  if (labels_.size() != static_cast<std::size_t>(width) * height) {
    throw DataError("instance map expects " + std::to_string(width * height) +
                    " labels, got " + std::to_string(labels_.size()));
  }
  for (InstanceId v : labels_) {
    if (v < 0) throw DataError("instance ids must be non-negative");
  }
}

void InstanceMap::set(int x, int y, InstanceId id) {
  if (id < 0) throw DataError("instance ids must be non-negative");
  labels_[y * width_ + x] = id;
}

std::vector<InstanceId> InstanceMap::InstanceIds() const {
  DenseIds ids(labels_);
  std::vector<InstanceId> out;
  out.reserve(ids.count());
  for (int i = 1; i <= ids.count(); ++i) out.push_back(ids.Id(i));
  return out;
}

int InstanceMap::InstanceCount() const { return DenseIds(labels_).count(); }

PixelMask::PixelMask(int width, int height) : width_(width), height_(height) {
  CheckDimensions(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

PixelMask::PixelMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  CheckDimensions(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * height) {
    throw DataError("mask size does not match its dimensions");
  }
}

PixelMask PixelMask::OfInstance(const InstanceMap& map, InstanceId id) {
  PixelMask mask(map.width(), map.height());
  const auto labels = map.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mask.bits_[i] = labels[i] == id ? 1 : 0;
  }
  return mask;
}

int PixelMask::Count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1));
}

ClusteringMap::ClusteringMap(int width, int height, int layer_count)
    : width_(width), height_(height), layer_count_(layer_count) {
  CheckDimensions(width, height);
  if (layer_count <= 0) throw DataError("layer count must be positive");
  probs_.assign(static_cast<std::size_t>(width) * height * channels(), 0.0);
  for (int i = 0; i < pixel_count(); ++i) mutable_pixel(i)[0] = 1.0;
}

ClusteringMap::ClusteringMap(int width, int height, int layer_count,
                             std::vector<double> probs, double tolerance)
    : width_(width),
      height_(height),
      layer_count_(layer_count),
      probs_(std::move(probs)) {
  CheckDimensions(width, height);
  if (layer_count <= 0) throw DataError("layer count must be positive");
  if (probs_.size() != static_cast<std::size_t>(width) * height * channels()) {
    throw DataError("clustering map has the wrong number of probabilities");
  }
  Validate(tolerance);
}

void ClusteringMap::Validate(double tolerance) const {
  for (int i = 0; i < pixel_count(); ++i) {
    double sum = 0.0;
    for (double p : pixel(i)) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("probability outside [0, 1] at pixel " +
                        std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw DataError("pixel " + std::to_string(i) +
                      " distribution does not sum to 1");
    }
  }
}

double Iou(const PixelMask& a, const PixelMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatch("masks differ in size");
  }
  const auto ab = a.bits();
  const auto bb = b.bits();
  int inter = 0;
  int uni = 0;
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += (ab[i] & bb[i]);
    uni += (ab[i] | bb[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

MatchSet MatchInstances(const InstanceMap& pred, const InstanceMap& gt) {
  CheckSameShape(pred, gt);
  return MatchFromTable(OverlapTable(pred, gt));
}

PQResult PanopticQuality(const InstanceMap& pred, const InstanceMap& gt) {
  CheckSameShape(pred, gt);
  const OverlapTable table(pred, gt);
  const MatchSet matched = MatchFromTable(table);

  PQResult r;
  r.tp_count = static_cast<int>(matched.matches.size());
  r.fp_count = table.pred.count() - r.tp_count;
  r.fn_count = table.gt.count() - r.tp_count;
  for (const Match& m : matched.matches) r.sum_iou += m.iou;

  if (table.pred.count() == 0 && table.gt.count() == 0) {
    r.pq = r.sq = r.rq = 1.0;
    return r;
  }
  if (r.tp_count == 0) return r;
  r.sq = r.sum_iou / r.tp_count;
  const double denom = r.tp_count + 0.5 * r.fp_count + 0.5 * r.fn_count;
  r.rq = r.tp_count / denom;
  r.pq = r.sum_iou / denom;
  return r;
}

InstanceMap ConnectedComponents(const PixelMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  const auto bits = mask.bits();
  std::vector<InstanceId> labels(bits.size(), 0);
  std::vector<int> stack;
  InstanceId next = 0;
  for (int start = 0; start < w * h; ++start) {
    if (bits[start] == 0 || labels[start] != 0) continue;
    labels[start] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w;
      const int y = p / w;
      const int nbr[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                          y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
      for (int q : nbr) {
        if (q >= 0 && bits[q] != 0 && labels[q] == 0) {
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  return InstanceMap(w, h, std::move(labels));
}

std::vector<std::uint8_t> ArgmaxLayers(const ClusteringMap& cmap) {
  std::vector<std::uint8_t> out(cmap.pixel_count(), 0);
  for (int i = 0; i < cmap.pixel_count(); ++i) {
    const auto px = cmap.pixel(i);
    int best = 0;
    for (int k = 1; k < cmap.channels(); ++k) {
      if (px[k] > px[best]) best = k;
    }
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

InstanceMap InstancesFromLayers(int width, int height,
                                std::span<const std::uint8_t> layers,
                                int min_area) {
  CheckDimensions(width, height);
  if (layers.size() != static_cast<std::size_t>(width) * height) {
    throw DataError("layer assignment size does not match map");
  }
  struct Component {
    std::uint8_t layer;
    int first_pixel;
    int area;
  };
  std::vector<int> comp(layers.size(), -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (int start = 0; start < width * height; ++start) {
    const std::uint8_t layer = layers[start];
    if (layer == 0 || comp[start] >= 0) continue;
    const int c = static_cast<int>(comps.size());
    comps.push_back({layer, start, 0});
    comp[start] = c;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++comps[c].area;
      const int x = p % width;
      const int y = p / width;
      const int nbr[4] = {x > 0 ? p - 1 : -1, x + 1 < width ? p + 1 : -1,
                          y > 0 ? p - width : -1,
                          y + 1 < height ? p + width : -1};
      for (int q : nbr) {
        if (q >= 0 && comp[q] < 0 && layers[q] == layer) {
          comp[q] = c;
          stack.push_back(q);
        }
      }
    }
  }

  std::vector<int> order(comps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (comps[a].layer != comps[b].layer) return comps[a].layer < comps[b].layer;
    return comps[a].first_pixel < comps[b].first_pixel;
  });
  std::vector<InstanceId> id_of(comps.size(), 0);
  InstanceId next = 0;
  for (int c : order) {
    if (comps[c].area >= min_area) id_of[c] = ++next;
  }

  std::vector<InstanceId> labels(layers.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (comp[i] >= 0) labels[i] = id_of[comp[i]];
  }
  return InstanceMap(width, height, std::move(labels));
}

InstanceMap DecodeClustering(const ClusteringMap& cmap, int min_area) {
  const auto layers = ArgmaxLayers(cmap);
  return InstancesFromLayers(cmap.width(), cmap.height(), layers, min_area);
}

ClusteringMap OneHotClustering(const InstanceMap& map, int layer_count,
                               std::span<const int> layer_of) {
  ClusteringMap cmap(map.width(), map.height(), layer_count);
  const auto labels = map.labels();
  for (int i = 0; i < map.size(); ++i) {
    if (labels[i] == 0) continue;
    if (static_cast<std::size_t>(labels[i]) >= layer_of.size()) {
      throw DataError("no terrace layer given for instance " +
                      std::to_string(labels[i]));
    }
    const int layer = layer_of[labels[i]];
    if (layer < 1 || layer > layer_count) {
      throw DataError("terrace layer out of range");
    }
    auto px = cmap.mutable_pixel(i);
    px[0] = 0.0;
    px[layer] = 1.0;
  }
  return cmap;
}

}  // namespace incseg
