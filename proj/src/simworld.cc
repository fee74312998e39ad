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

#include "incseg/simworld.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include "incseg/errors.h"

namespace incseg {

namespace {

constexpr int kMaxSceneAttempts = 64;
constexpr int kSpuriousBlobs = 5;
constexpr double kMaxErosion = 0.45;   // keeps IoU of an eroded instance > 0.5
constexpr double kMaxDilation = 0.7;   // IoU >= 1 / 1.7
constexpr double kMaxSpeckle = 0.03;
constexpr double kMaxSoftening = 0.45;  // argmax survives below 0.5
constexpr double kRefineTolerance = 0.02;

template <typename F>
void ForEachNeighbor(int p, int w, int h, F&& f) {
  const int x = p % w;
  const int y = p / w;
  if (x > 0) f(p - 1);
  if (x + 1 < w) f(p + 1);
  if (y > 0) f(p - w);
  if (y + 1 < h) f(p + w);
}

double UniformIn(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

// Collapses arbitrary positive ids to 1..n in ascending order.
struct DenseLabels {
  std::vector<InstanceId> original;  // dense index - 1 -> id
  std::vector<int> dense;            // per pixel

  explicit DenseLabels(const InstanceMap& map) {
    original = map.InstanceIds();
    std::unordered_map<InstanceId, int> index;
    for (std::size_t i = 0; i < original.size(); ++i) {
      index.emplace(original[i], static_cast<int>(i) + 1);
    }
    const auto labels = map.labels();
    dense.resize(labels.size());
    for (std::size_t p = 0; p < labels.size(); ++p) {
      dense[p] = labels[p] == 0 ? 0 : index.at(labels[p]);
    }
  }
  int count() const { return static_cast<int>(original.size()); }
};

std::vector<std::set<int>> DenseAdjacency(const DenseLabels& d, int w, int h) {
  std::vector<std::set<int>> adj(d.count() + 1);
  for (int p = 0; p < w * h; ++p) {
    const int a = d.dense[p];
    if (a == 0) continue;
    const int x = p % w;
    const int y = p / w;
    if (x + 1 < w) {
      const int b = d.dense[p + 1];
      if (b != 0 && b != a) {
        adj[a].insert(b);
        adj[b].insert(a);
      }
    }
    if (y + 1 < h) {
      const int b = d.dense[p + w];
      if (b != 0 && b != a) {
        adj[a].insert(b);
        adj[b].insert(a);
      }
    }
  }
  return adj;
}

InstanceMap Paint(const Scene& scene, int w, int h) {
  std::vector<InstanceId> labels(static_cast<std::size_t>(w) * h, 0);
  for (std::size_t j = 0; j < scene.shapes.size(); ++j) {
    const Ellipse& e = scene.shapes[j];
    const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rx)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(e.cx + e.rx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x - e.cx) / e.rx;
        const double dy = (y - e.cy) / e.ry;
        if (dx * dx + dy * dy <= 1.0) {
          labels[y * w + x] = static_cast<InstanceId>(j + 1);
        }
      }
    }
  }
  return InstanceMap(w, h, std::move(labels));
}

// Keeps the largest 4-connected piece of every instance. Returns false if an
// instance vanished or ended up below `min_area`.
bool KeepLargestPieces(InstanceMap& map, int instance_count, int min_area) {
  const int w = map.width();
  const int h = map.height();
  const auto labels = map.labels();
  std::vector<int> comp(labels.size(), -1);
  std::vector<int> comp_area;
  std::vector<InstanceId> comp_id;
  std::vector<int> stack;
  for (int s = 0; s < w * h; ++s) {
    if (labels[s] == 0 || comp[s] >= 0) continue;
    const int c = static_cast<int>(comp_area.size());
    comp_area.push_back(0);
    comp_id.push_back(labels[s]);
    comp[s] = c;
    stack.push_back(s);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++comp_area[c];
      ForEachNeighbor(p, w, h, [&](int q) {
        if (comp[q] < 0 && labels[q] == labels[s]) {
          comp[q] = c;
          stack.push_back(q);
        }
      });
    }
  }
  std::vector<int> best(instance_count + 1, -1);
  for (std::size_t c = 0; c < comp_area.size(); ++c) {
    const InstanceId id = comp_id[c];
    if (best[id] < 0 || comp_area[c] > comp_area[best[id]]) {
      best[id] = static_cast<int>(c);
    }
  }
  for (int id = 1; id <= instance_count; ++id) {
    if (best[id] < 0 || comp_area[best[id]] < min_area) return false;
  }
  for (int p = 0; p < w * h; ++p) {
    if (labels[p] != 0 && best[labels[p]] != comp[p]) map.set(p % w, p / w, 0);
  }
  return true;
}

}  // namespace

void SceneParams::Validate() const {
  if (width < 16 || height < 16) {
    throw ConfigError("scene width and height must be at least 16");
  }
  if (min_instances < 1 || max_instances < min_instances) {
    throw ConfigError("scene instance range must be nonempty and positive");
  }
  if (!(overlap_pressure >= 0.0)) {
    throw ConfigError("overlap pressure must be non-negative");
  }
  if (!(min_radius >= 1.0) || max_radius < min_radius) {
    throw ConfigError("scene radius range must satisfy 1 <= min <= max");
  }
  if (min_instance_area < 1) {
    throw ConfigError("minimum instance area must be positive");
  }
}

DifficultyTerms ComputeDifficulty(const InstanceMap& gt) {
  const int w = gt.width();
  const int h = gt.height();
  const DenseLabels d(gt);
  const int n = d.count();
  DifficultyTerms t;
  if (n == 0) return t;

  const auto adj = DenseAdjacency(d, w, h);
  int pairs = 0;
  for (int i = 1; i <= n; ++i) pairs += static_cast<int>(adj[i].size());
  pairs /= 2;

  std::vector<double> area(n + 1, 0.0);
  int boundary = 0;
  int contact = 0;
  for (int p = 0; p < w * h; ++p) {
    const int a = d.dense[p];
    if (a == 0) continue;
    area[a] += 1.0;
    bool on_boundary = false;
    bool touches = false;
    ForEachNeighbor(p, w, h, [&](int q) {
      const int b = d.dense[q];
      if (b != a) {
        on_boundary = true;
        if (b != 0) touches = true;
      }
    });
    boundary += on_boundary ? 1 : 0;
    contact += touches ? 1 : 0;
  }

  const double mean = std::accumulate(area.begin() + 1, area.end(), 0.0) / n;
  double var = 0.0;
  for (int i = 1; i <= n; ++i) var += (area[i] - mean) * (area[i] - mean);
  t.area_cv = std::min(1.0, std::sqrt(var / n) / mean);

  double weighted = 0.2 * t.area_cv;
  double weight = 0.2;
  if (n >= 2) {
    // A chain of n touching instances has n - 1 adjacent pairs.
    t.adjacency = std::min(1.0, static_cast<double>(pairs) / (n - 1));
    weighted += 0.5 * t.adjacency;
    weight += 0.5;
  }
  if (boundary > 0) {
    t.boundary_contact = static_cast<double>(contact) / boundary;
    weighted += 0.3 * t.boundary_contact;
    weight += 0.3;
  }
  t.value = std::clamp(weighted / weight, 0.0, 1.0);
  return t;
}

Sample GenerateScene(const SceneParams& params, int instance_count,
                     SampleId id, Rng& rng) {
  params.Validate();
  if (instance_count < 1) throw ConfigError("scene needs at least 1 instance");
  const int w = params.width;
  const int h = params.height;
  for (int attempt = 0; attempt < kMaxSceneAttempts; ++attempt) {
    // Late attempts give up on crowding and then shrink the shapes.
    const double crowd_scale = attempt < kMaxSceneAttempts / 2 ? 1.0 : 0.0;
    const double radius_scale = attempt < 3 * kMaxSceneAttempts / 4 ? 1.0 : 0.7;
    Scene scene;
    scene.crowding =
        std::min(1.0, params.overlap_pressure * Uniform01(rng)) * crowd_scale;
    for (int j = 0; j < instance_count; ++j) {
      Ellipse e;
      e.rx = UniformIn(rng, params.min_radius, params.max_radius) * radius_scale;
      e.ry = UniformIn(rng, params.min_radius, params.max_radius) * radius_scale;
      if (j > 0 && Uniform01(rng) < scene.crowding) {
        const auto k = std::uniform_int_distribution<int>(0, j - 1)(rng);
        const Ellipse& anchor = scene.shapes[k];
        const double theta = 2.0 * std::numbers::pi * Uniform01(rng);
        const double reach = 0.5 * (anchor.rx + anchor.ry + e.rx + e.ry) *
                             UniformIn(rng, 0.45, 0.85);
        e.cx = std::clamp(anchor.cx + reach * std::cos(theta), 0.0, w - 1.0);
        e.cy = std::clamp(anchor.cy + reach * std::sin(theta), 0.0, h - 1.0);
      } else {
        for (int tries = 0; tries < 30; ++tries) {
          e.cx = UniformIn(rng, std::min(e.rx, w / 2.0),
                           std::max(w - 1.0 - e.rx, w / 2.0));
          e.cy = UniformIn(rng, std::min(e.ry, h / 2.0),
                           std::max(h - 1.0 - e.ry, h / 2.0));
          bool clear = true;
          for (const Ellipse& o : scene.shapes) {
            const double gap = std::hypot(e.cx - o.cx, e.cy - o.cy) -
                               std::max(e.rx, e.ry) - std::max(o.rx, o.ry);
            if (gap < 2.0) {
              clear = false;
              break;
            }
          }
          if (clear) break;
        }
      }
      scene.shapes.push_back(e);
    }
    InstanceMap gt = Paint(scene, w, h);
    if (!KeepLargestPieces(gt, instance_count, params.min_instance_area)) {
      continue;
    }
    Sample sample;
    sample.id = id;
    sample.scene = std::move(scene);
    sample.gt = std::move(gt);
    sample.instance_count = instance_count;
    sample.difficulty = IntrinsicDifficulty(sample.gt);
    return sample;
  }
  throw ConfigError("could not place " + std::to_string(instance_count) +
                    " instances on a " + std::to_string(w) + "x" +
                    std::to_string(h) + " grid");
}

std::vector<Sample> GeneratePackage(const SceneParams& params,
                                    int instance_budget, SampleId first_id,
                                    Rng& rng) {
  params.Validate();
  const int lo = params.min_instances;
  const int hi = params.max_instances;
  if (instance_budget < lo) {
    throw ConfigError("instance budget " + std::to_string(instance_budget) +
                      " is below the minimum scene size " + std::to_string(lo));
  }
  // reachable[r]: r instances can be split into scenes of lo..hi instances.
  std::vector<char> reachable(instance_budget + 1, 0);
  reachable[0] = 1;
  for (int r = 1; r <= instance_budget; ++r) {
    for (int n = lo; n <= std::min(hi, r) && !reachable[r]; ++n) {
      reachable[r] = reachable[r - n];
    }
  }
  if (!reachable[instance_budget]) {
    throw ConfigError("instance budget " + std::to_string(instance_budget) +
                      " cannot be composed from scenes of " +
                      std::to_string(lo) + ".." + std::to_string(hi) +
                      " instances");
  }

  std::vector<Sample> package;
  int remaining = instance_budget;
  std::vector<int> options;
  while (remaining > 0) {
    options.clear();
    for (int n = lo; n <= std::min(hi, remaining); ++n) {
      if (reachable[remaining - n]) options.push_back(n);
    }
    const int pick = std::uniform_int_distribution<int>(
        0, static_cast<int>(options.size()) - 1)(rng);
    const int n = options[pick];
    package.push_back(
        GenerateScene(params, n, first_id + package.size(), rng));
    remaining -= n;
  }
  return package;
}

double ExpectedPq(const SimModel& model, double difficulty) {
  const double v = model.floor + (1.0 - model.floor) * model.skill *
                                     (1.0 - model.alpha * difficulty);
  return std::clamp(v, 0.0, 1.0);
}

SimModel UpdateSkill(const SimModel& model,
                     std::span<const TrainingSignal> items) {
  if (items.empty()) return model;
  double manual_mass = 0.0;
  double total_mass = 0.0;
  for (const TrainingSignal& it : items) {
    total_mass += it.weight;
    if (it.manual) manual_mass += it.weight;
  }
  const double norm = manual_mass > 0.0 ? manual_mass : total_mass;
  if (norm <= 0.0) return model;

  double gain = 0.0;
  for (const TrainingSignal& it : items) {
    double q = it.quality;
    if (!it.manual && model.pseudo_response == PseudoLabelResponse::kSigned) {
      q = 2.0 * q - 1.0;
    }
    gain += (it.weight / norm) * q * (0.5 + it.difficulty);
  }
  SimModel out = model;
  out.skill = std::clamp(
      model.skill + model.eta * gain * (1.0 - model.skill), 0.0, 1.0);
  return out;
}

std::vector<int> AssignTerraceLayers(const InstanceMap& gt, int layer_count) {
  if (layer_count < 1) throw ConfigError("layer count must be positive");
  const DenseLabels d(gt);
  const int n = d.count();
  const auto adj = DenseAdjacency(d, gt.width(), gt.height());
  std::vector<int> area(n + 1, 0);
  for (int v : d.dense) ++area[v];

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return area[a] > area[b]; });

  std::vector<int> color(n + 1, 0);
  std::vector<int> uncolored;
  for (int i : order) {
    for (int k = 1; k <= layer_count; ++k) {
      bool used = false;
      for (int j : adj[i]) used = used || color[j] == k;
      if (!used) {
        color[i] = k;
        break;
      }
    }
    if (color[i] == 0) uncolored.push_back(i);
  }

  if (!uncolored.empty()) {
    // Greedy got stuck; a bounded exact search usually finds a colouring.
    std::vector<int> trial(n + 1, 0);
    long budget = 200000;
    auto solve = [&](auto&& self, int pos) -> bool {
      if (pos == n) return true;
      if (--budget < 0) return false;
      const int i = order[pos];
      for (int k = 1; k <= layer_count; ++k) {
        bool used = false;
        for (int j : adj[i]) used = used || trial[j] == k;
        if (used) continue;
        trial[i] = k;
        if (self(self, pos + 1)) return true;
        trial[i] = 0;
      }
      return false;
    };
    if (solve(solve, 0)) {
      color = trial;
    } else {
      std::vector<int> uses(layer_count + 1, 0);
      for (int i = 1; i <= n; ++i) ++uses[color[i]];
      for (int i : uncolored) {
        int least = 1;
        for (int k = 2; k <= layer_count; ++k) {
          if (uses[k] < uses[least]) least = k;
        }
        color[i] = least;
        ++uses[least];
      }
    }
  }

  // Re-index by original id.
  const InstanceId max_id = n == 0 ? 0 : d.original.back();
  std::vector<int> by_id(static_cast<std::size_t>(max_id) + 1, 0);
  for (int i = 1; i <= n; ++i) by_id[d.original[i - 1]] = color[i];
  return by_id;
}

namespace {

enum class Failure : std::uint8_t { kMiss, kMerge, kSplit };

struct Blob {
  std::vector<int> pixels;
  int layer = 1;
};

// Pre-draws every random choice for one inference so that the decoded PQ
// is a deterministic function of (failed instances, spurious blobs,
// strength). Calibration then searches that space.
class Corruptor {
 public:
  Corruptor(const SimModel& model, const InstanceMap& gt, Rng& rng)
      : model_(model),
        gt_(gt),
        w_(gt.width()),
        h_(gt.height()),
        dense_(gt),
        n_(dense_.count()) {
    const int k = model.layer_count;
    const auto by_id = AssignTerraceLayers(gt, k);
    layer_.assign(n_ + 1, 0);
    for (int i = 1; i <= n_; ++i) layer_[i] = by_id[dense_.original[i - 1]];

    pixels_.resize(n_ + 1);
    for (int p = 0; p < w_ * h_; ++p) {
      if (dense_.dense[p] != 0) pixels_[dense_.dense[p]].push_back(p);
    }
    const auto adj = DenseAdjacency(dense_, w_, h_);
    neighbors_.resize(n_ + 1);
    for (int i = 1; i <= n_; ++i) {
      neighbors_[i].assign(adj[i].begin(), adj[i].end());
    }

    // Per-pixel random fields, four 16-bit lanes per draw.
    speckle_.resize(w_ * h_);
    speckle_pick_.resize(w_ * h_);
    soft_.resize(w_ * h_);
    soft_pick_.resize(w_ * h_);
    for (int p = 0; p < w_ * h_; ++p) {
      const std::uint64_t r = rng();
      speckle_[p] = static_cast<float>((r & 0xffff) / 65536.0);
      speckle_pick_[p] = static_cast<std::uint16_t>((r >> 16) & 0xffff);
      soft_[p] = static_cast<float>(((r >> 32) & 0xffff) / 65536.0);
      soft_pick_[p] = static_cast<std::uint16_t>((r >> 48) & 0xffff);
      if (speckle_[p] < kMaxSpeckle) speckle_candidates_.push_back(p);
    }

    failure_order_.resize(n_);
    std::iota(failure_order_.begin(), failure_order_.end(), 1);
    std::shuffle(failure_order_.begin(), failure_order_.end(), rng);

    mode_.assign(n_ + 1, Failure::kMiss);
    merge_target_.assign(n_ + 1, 0);
    split_layer_.assign(n_ + 1, 0);
    split_side_.assign(w_ * h_, 0);
    dilate_.assign(n_ + 1, false);
    erosion_order_.resize(n_ + 1);
    depth_.assign(w_ * h_, -1);
    dist_.assign(w_ * h_, -1);
    for (int i = 1; i <= n_; ++i) {
      const double m = Uniform01(rng);
      if (m < 0.5 || (m < 0.75 && neighbors_[i].empty())) {
        mode_[i] = Failure::kMiss;
      } else if (m < 0.75) {
        mode_[i] = Failure::kMerge;
        merge_target_[i] = neighbors_[i][std::uniform_int_distribution<int>(
            0, static_cast<int>(neighbors_[i].size()) - 1)(rng)];
      } else {
        mode_[i] = Failure::kSplit;
      }
      PrepareSplit(i, rng);
      dilate_[i] = Uniform01(rng) < 0.4;
      PrepareErosion(i);
    }
    PlaceBlobs(rng);

    layers_.resize(w_ * h_);
    owner_.resize(w_ * h_);
    stamp_.assign(w_ * h_, 0);
  }

  int instance_count() const { return n_; }
  int blob_count() const { return static_cast<int>(blobs_.size()); }
  const std::vector<std::uint8_t>& layers() const { return layers_; }

  double Score(int level, int blobs, double strength) {
    Build(level, blobs, strength);
    ++evaluations_;
    return CurrentPq();
  }

  int Find(int l) {
    while (parent_[l] != l) {
      parent_[l] = parent_[parent_[l]];
      l = parent_[l];
    }
    return l;
  }

  // PQ of the current layer assignment against the ground truth. Matches
  // PanopticQuality(InstancesFromLayers(...), gt) bit for bit, including
  // the order in which matched IoUs are summed, without building either
  // map.
  double CurrentPq() {
    // Two-pass labelling. Provisional labels are created in raster order
    // and a union keeps the smaller root, so each root is the label of its
    // component's first pixel.
    const int np = w_ * h_;
    comp_.resize(np);
    parent_.clear();
    comp_layer_.clear();
    for (int y = 0, p = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x, ++p) {
        const std::uint8_t layer = layers_[p];
        if (layer == 0) {
          comp_[p] = -1;
          continue;
        }
        const int left = (x > 0 && layers_[p - 1] == layer) ? comp_[p - 1] : -1;
        const int up = (y > 0 && layers_[p - w_] == layer) ? comp_[p - w_] : -1;
        if (left < 0 && up < 0) {
          comp_[p] = static_cast<int>(parent_.size());
          parent_.push_back(comp_[p]);
          comp_layer_.push_back(layer);
        } else if (left >= 0 && up >= 0) {
          const int ra = Find(left);
          const int rb = Find(up);
          const int r = std::min(ra, rb);
          parent_[std::max(ra, rb)] = r;
          comp_[p] = r;
        } else {
          comp_[p] = left >= 0 ? left : up;
        }
      }
    }
    const int labels = static_cast<int>(parent_.size());
    compact_.resize(labels);
    int nc = 0;
    for (int l = 0; l < labels; ++l) {
      const int r = Find(l);
      compact_[l] = r == l ? nc++ : compact_[r];
    }
    comp_area_.assign(nc, 0);
    for (int p = 0; p < np; ++p) {
      if (comp_[p] >= 0) {
        comp_[p] = compact_[comp_[p]];
        ++comp_area_[comp_[p]];
      }
    }
    for (int l = 0, c = 0; l < labels; ++l) {
      if (parent_[l] == l) comp_layer_[c++] = comp_layer_[l];
    }
    comp_layer_.resize(nc);

    // Canonical instance order is (layer, first pixel); components were
    // found in first-pixel order, so a stable sort by layer gives it.
    rank_.clear();
    for (int c = 0; c < nc; ++c) {
      if (comp_area_[c] >= model_.min_area) rank_.push_back(c);
    }
    std::stable_sort(rank_.begin(), rank_.end(), [&](int a, int b) {
      return comp_layer_[a] < comp_layer_[b];
    });
    const int kept = static_cast<int>(rank_.size());
    kept_index_.assign(nc, -1);
    for (int r = 0; r < kept; ++r) kept_index_[rank_[r]] = r;

    const int stride = n_ + 1;
    inter_.assign(static_cast<std::size_t>(kept) * stride, 0);
    for (int p = 0; p < np; ++p) {
      const int c = comp_[p];
      if (c < 0) continue;
      const int r = kept_index_[c];
      if (r >= 0) ++inter_[static_cast<std::size_t>(r) * stride + dense_.dense[p]];
    }
    if (kept == 0 && n_ == 0) return 1.0;
    int tp = 0;
    double sum_iou = 0.0;
    for (int r = 0; r < kept; ++r) {
      const int area = comp_area_[rank_[r]];
      for (int b = 1; b <= n_; ++b) {
        const int inter = inter_[static_cast<std::size_t>(r) * stride + b];
        if (inter == 0) continue;
        const int uni = area + static_cast<int>(pixels_[b].size()) - inter;
        if (2 * inter > uni) {
          ++tp;
          sum_iou += static_cast<double>(inter) / static_cast<double>(uni);
        }
      }
    }
    if (tp == 0) return 0.0;
    return sum_iou / (tp + 0.5 * (kept - tp) + 0.5 * (n_ - tp));
  }

  int evaluations() const { return evaluations_; }

  // Damage levels 0..n fail that many instances in their drawn mode; levels
  // n+1..2n additionally turn the first (level - n) failures into plain
  // misses, down to an empty prediction at 2n.
  int level_count() const { return 2 * n_ + 1; }

  void Build(int level, int blobs, double strength) {
    const int failed = std::min(level, n_);
    const int forced_misses = std::max(0, level - n_);
    for (int p = 0; p < w_ * h_; ++p) {
      const int i = dense_.dense[p];
      layers_[p] = static_cast<std::uint8_t>(layer_[i]);
      owner_[p] = i;
    }
    intact_.assign(n_ + 1, 1);
    auto& intact = intact_;
    for (int f = 0; f < failed; ++f) {
      const int i = failure_order_[f];
      intact[i] = 0;
      const Failure mode = f < forced_misses ? Failure::kMiss : mode_[i];
      switch (mode) {
        case Failure::kMiss:
          for (int p : pixels_[i]) {
            layers_[p] = 0;
            owner_[p] = 0;
          }
          break;
        case Failure::kMerge:
          for (int p : pixels_[i]) {
            layers_[p] = static_cast<std::uint8_t>(layer_[merge_target_[i]]);
          }
          break;
        case Failure::kSplit:
          for (int p : pixels_[i]) {
            if (split_side_[p]) {
              layers_[p] = static_cast<std::uint8_t>(split_layer_[i]);
            }
          }
          break;
      }
    }
    for (int b = 0; b < blobs; ++b) {
      for (int p : blobs_[b].pixels) {
        layers_[p] = static_cast<std::uint8_t>(blobs_[b].layer);
        owner_[p] = n_ + 1 + b;
      }
    }
    if (strength <= 0.0) return;

    for (int i = 1; i <= n_; ++i) {
      if (!intact[i] || dilate_[i]) continue;
      const int count = static_cast<int>(
          std::floor(strength * kMaxErosion * pixels_[i].size()));
      for (int e = 0; e < count; ++e) {
        const int p = erosion_order_[i][e];
        layers_[p] = 0;
        owner_[p] = 0;
      }
    }
    for (int i = 1; i <= n_; ++i) {
      if (intact[i] && dilate_[i]) Dilate(i, strength);
    }
    const double speckle_rate = kMaxSpeckle * strength;
    const int k = model_.layer_count;
    for (int p : speckle_candidates_) {
      if (speckle_[p] >= speckle_rate) continue;
      // Only layers absent from the 4-neighbourhood, so a speckle never
      // joins anything and decodes as a hole or nothing.
      std::uint32_t blocked = 1u << layers_[p];
      ForEachNeighbor(p, w_, h_,
                      [&](int q) { blocked |= 1u << layers_[q]; });
      int options[16];
      int count = 0;
      for (int l = 0; l <= k && count < 16; ++l) {
        if (!(blocked & (1u << l))) options[count++] = l;
      }
      if (count == 0) continue;
      layers_[p] = static_cast<std::uint8_t>(options[speckle_pick_[p] % count]);
      owner_[p] = 0;
    }
  }

  ClusteringMap Soften(double target) const {
    const int k = model_.layer_count;
    ClusteringMap cmap(w_, h_, k);
    const double base = kMaxSoftening * std::clamp(1.0 - target, 0.0, 1.0);
    for (int p = 0; p < w_ * h_; ++p) {
      const int main = layers_[p];
      bool edge = false;
      ForEachNeighbor(p, w_, h_,
                      [&](int q) { edge = edge || layers_[q] != main; });
      const double u = std::min(
          kMaxSoftening, base * (0.55 + 0.9 * soft_[p]) * (edge ? 1.25 : 1.0));
      int confusion = 0;
      if (main == 0) {
        const int i = dense_.dense[p];
        confusion = i != 0 ? layer_[i] : 1 + soft_pick_[p] % k;
      }
      auto px = cmap.mutable_pixel(p);
      std::fill(px.begin(), px.end(), 0.0);
      px[main] = 1.0 - u;
      if (k == 1) {
        px[confusion] += u;
        continue;
      }
      px[confusion] += 0.65 * u;
      const double rest = 0.35 * u / (k - 1);
      for (int l = 0; l <= k; ++l) {
        if (l != main && l != confusion) px[l] += rest;
      }
    }
    return cmap;
  }

 private:
  void PrepareSplit(int i, Rng& rng) {
    const double theta = 2.0 * std::numbers::pi * Uniform01(rng);
    double cx = 0.0;
    double cy = 0.0;
    for (int p : pixels_[i]) {
      cx += p % w_;
      cy += p / w_;
    }
    cx /= pixels_[i].size();
    cy /= pixels_[i].size();
    for (int p : pixels_[i]) {
      const double side =
          (p % w_ - cx) * std::cos(theta) + (p / w_ - cy) * std::sin(theta);
      split_side_[p] = side > 0.0 ? 1 : 0;
    }
    const int k = model_.layer_count;
    std::vector<char> taken(k + 1, 0);
    taken[layer_[i]] = 1;
    for (int j : neighbors_[i]) taken[layer_[j]] = 1;
    split_layer_[i] = 0;
    for (int l = 1; l <= k; ++l) {
      if (!taken[l]) {
        split_layer_[i] = l;
        break;
      }
    }
    if (split_layer_[i] == 0) {
      split_layer_[i] = layer_[i] % k + 1;
      if (k == 1 && mode_[i] == Failure::kSplit) mode_[i] = Failure::kMiss;
    }
  }

  // Removal order: pixels farthest (geodesically) from the instance core go
  // first, so every remaining pixel keeps a path to the core and erosion
  // never fragments an instance.
  void PrepareErosion(int i) {
    const auto& px = pixels_[i];
    auto& depth = depth_;
    auto& dist = dist_;
    auto& queue = queue_;
    queue.clear();
    for (int p : px) {
      bool boundary = false;
      const int x = p % w_;
      const int y = p / w_;
      if (x == 0 || y == 0 || x == w_ - 1 || y == h_ - 1) boundary = true;
      ForEachNeighbor(p, w_, h_, [&](int q) {
        boundary = boundary || dense_.dense[q] != i;
      });
      if (boundary) {
        depth[p] = 0;
        queue.push_back(p);
      }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int p = queue[head];
      ForEachNeighbor(p, w_, h_, [&](int q) {
        if (dense_.dense[q] == i && depth[q] < 0) {
          depth[q] = depth[p] + 1;
          queue.push_back(q);
        }
      });
    }
    int core = px.front();
    for (int p : px) {
      if (depth[p] > depth[core]) core = p;
    }
    queue.assign(1, core);
    dist[core] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int p = queue[head];
      ForEachNeighbor(p, w_, h_, [&](int q) {
        if (dense_.dense[q] == i && dist[q] < 0) {
          dist[q] = dist[p] + 1;
          queue.push_back(q);
        }
      });
    }
    auto& order = erosion_order_[i];
    order = px;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist[a] != dist[b]) return dist[a] > dist[b];
      return soft_pick_[a] < soft_pick_[b];
    });
    for (int p : px) depth[p] = dist[p] = -1;
  }

  void PlaceBlobs(Rng& rng) {
    const int k = model_.layer_count;
    std::vector<char> reserved(w_ * h_, 0);
    for (int b = 0; b < kSpuriousBlobs; ++b) {
      const double r = UniformIn(rng, 1.6, 2.6);
      const int layer = std::uniform_int_distribution<int>(1, k)(rng);
      for (int tries = 0; tries < 40; ++tries) {
        const double cx = UniformIn(rng, 0.0, w_ - 1.0);
        const double cy = UniformIn(rng, 0.0, h_ - 1.0);
        const double margin = r + 2.0;
        bool ok = true;
        Blob blob;
        blob.layer = layer;
        for (int y = static_cast<int>(std::floor(cy - margin));
             ok && y <= static_cast<int>(std::ceil(cy + margin)); ++y) {
          for (int x = static_cast<int>(std::floor(cx - margin));
               x <= static_cast<int>(std::ceil(cx + margin)); ++x) {
            const double d = std::hypot(x - cx, y - cy);
            if (d > margin) continue;
            if (x < 0 || y < 0 || x >= w_ || y >= h_) {
              ok = false;
              break;
            }
            const int p = y * w_ + x;
            if (dense_.dense[p] != 0 || reserved[p]) {
              ok = false;
              break;
            }
            if (d <= r) blob.pixels.push_back(p);
          }
        }
        if (!ok || static_cast<int>(blob.pixels.size()) < model_.min_area) {
          continue;
        }
        for (int y = static_cast<int>(std::floor(cy - margin));
             y <= static_cast<int>(std::ceil(cy + margin)); ++y) {
          for (int x = static_cast<int>(std::floor(cx - margin));
               x <= static_cast<int>(std::ceil(cx + margin)); ++x) {
            if (std::hypot(x - cx, y - cy) <= margin) reserved[y * w_ + x] = 1;
          }
        }
        blobs_.push_back(std::move(blob));
        break;
      }
    }
  }

  // Grows instance i into free background, ring by ring, never touching a
  // same-layer region owned by something else.
  void Dilate(int i, double strength) {
    const int target = static_cast<int>(
        std::floor(strength * kMaxDilation * pixels_[i].size()));
    if (target == 0) return;
    const int layer = layer_[i];
    ++stamp_value_;
    queue_.clear();
    for (int p : pixels_[i]) {
      if (owner_[p] == i) {
        queue_.push_back(p);
        stamp_[p] = stamp_value_;
      }
    }
    int claimed = 0;
    for (std::size_t head = 0; head < queue_.size() && claimed < target;
         ++head) {
      const int p = queue_[head];
      ForEachNeighbor(p, w_, h_, [&](int q) {
        if (claimed >= target || stamp_[q] == stamp_value_) return;
        stamp_[q] = stamp_value_;
        if (layers_[q] != 0 || owner_[q] != 0) return;
        bool allowed = true;
        ForEachNeighbor(q, w_, h_, [&](int r) {
          if (layers_[r] == layer && owner_[r] != i) allowed = false;
        });
        if (!allowed) return;
        layers_[q] = static_cast<std::uint8_t>(layer);
        owner_[q] = i;
        queue_.push_back(q);
        ++claimed;
      });
    }
  }

  const SimModel& model_;
  const InstanceMap& gt_;
  int w_;
  int h_;
  DenseLabels dense_;
  int n_;
  std::vector<int> layer_;
  std::vector<std::vector<int>> pixels_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<float> speckle_;
  std::vector<std::uint16_t> speckle_pick_;
  std::vector<int> speckle_candidates_;  // raster order
  std::vector<float> soft_;
  std::vector<std::uint16_t> soft_pick_;
  std::vector<int> failure_order_;
  std::vector<Failure> mode_;
  std::vector<int> merge_target_;
  std::vector<int> split_layer_;
  std::vector<std::uint8_t> split_side_;
  std::vector<bool> dilate_;
  std::vector<std::vector<int>> erosion_order_;
  std::vector<Blob> blobs_;

  std::vector<std::uint8_t> layers_;
  std::vector<int> owner_;
  std::vector<int> stamp_;
  int stamp_value_ = 0;
  std::vector<int> queue_;
  std::vector<int> depth_;
  std::vector<int> dist_;
  std::vector<char> intact_;
  std::vector<int> comp_;
  std::vector<int> parent_;
  std::vector<int> compact_;
  std::vector<std::uint8_t> comp_layer_;
  std::vector<int> comp_area_;
  std::vector<int> rank_;
  std::vector<int> kept_index_;
  std::vector<int> inter_;
  int evaluations_ = 0;
};

struct Setting {
  int level = 0;
  int blobs = 0;
  double strength = 0.0;
  double pq = -1.0;
};

}  // namespace

namespace {

InferenceResult Calibrate(const SimModel& model, const Sample& sample,
                          double target_pq, Rng& rng, bool build_map) {
  const double t = std::clamp(target_pq, 0.0, 1.0);
  Corruptor corruptor(model, sample.gt, rng);

  Setting best;
  auto consider = [&](const Setting& s) {
    if (best.pq < 0.0 || std::abs(s.pq - t) < std::abs(best.pq - t)) best = s;
  };

  bool done = false;
  for (int failed = 0; failed < corruptor.level_count() && !done; ++failed) {
    for (int blobs = 0; blobs <= corruptor.blob_count() && !done; ++blobs) {
      Setting hi{failed, blobs, 0.0, corruptor.Score(failed, blobs, 0.0)};
      consider(hi);
      if (std::abs(hi.pq - t) <= kRefineTolerance) {
        done = true;
        break;
      }
      if (hi.pq < t) continue;  // already too damaged at zero strength
      Setting lo{failed, blobs, 1.0, corruptor.Score(failed, blobs, 1.0)};
      consider(lo);
      if (lo.pq > t + kCalibrationTolerance) continue;  // needs more damage
      if (std::abs(lo.pq - t) <= kRefineTolerance) {
        done = true;
        break;
      }
      // Bracketing search on strength within this damage level. The step
      // interpolates linearly between the bracket ends but stays inside the
      // middle 80% of the bracket, so it never does worse than bisection
      // by more than a constant factor.
      double a = 0.0;
      double b = 1.0;
      double pa = hi.pq;
      double pb = lo.pq;
      for (int step = 0; step < kMaxCalibrationSteps; ++step) {
        double m = 0.5 * (a + b);
        if (pa > pb) m = a + (b - a) * (pa - t) / (pa - pb);
        m = std::clamp(m, a + 0.1 * (b - a), b - 0.1 * (b - a));
        Setting mid{failed, blobs, m, corruptor.Score(failed, blobs, m)};
        consider(mid);
        if (std::abs(mid.pq - t) <= kRefineTolerance || b - a < 1e-3) break;
        if (mid.pq > t) {
          a = m;
          pa = mid.pq;
        } else {
          b = m;
          pb = mid.pq;
        }
      }
      if (std::abs(best.pq - t) <= kCalibrationTolerance) done = true;
    }
  }

  if (std::abs(best.pq - t) > kCalibrationTolerance) {
    throw CalibrationError("sample " + std::to_string(sample.id) +
                           ": target PQ " + std::to_string(t) +
                           " unreachable, closest " + std::to_string(best.pq));
  }
  InferenceResult result;
  if (build_map) {
    corruptor.Build(best.level, best.blobs, best.strength);
    result.cmap = corruptor.Soften(t);
  }
  result.target_pq = t;
  result.achieved_pq = best.pq;
  result.evaluations = corruptor.evaluations();
  return result;
}

double DrawTarget(const SimModel& model, const Sample& sample, Rng& rng) {
  double target = ExpectedPq(model, sample.difficulty);
  if (model.noise > 0.0) {
    target += std::normal_distribution<double>(0.0, model.noise)(rng);
  }
  return std::clamp(target, 0.0, 1.0);
}

}  // namespace

InferenceResult SimulateInferenceAt(const SimModel& model, const Sample& sample,
                                    double target_pq, Rng& rng) {
  return Calibrate(model, sample, target_pq, rng, true);
}

InferenceResult SimulateInferenceDetailed(const SimModel& model,
                                          const Sample& sample, Rng& rng) {
  const double t = DrawTarget(model, sample, rng);
  return Calibrate(model, sample, t, rng, true);
}

double SimulateAchievedPq(const SimModel& model, const Sample& sample,
                          Rng& rng) {
  const double t = DrawTarget(model, sample, rng);
  return Calibrate(model, sample, t, rng, false).achieved_pq;
}

}  // namespace incseg
