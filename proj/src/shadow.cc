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

#include "incseg/shadow.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "incseg/errors.h"

namespace incseg {

void ShadowConfig::Validate() const {
  if (iterations < 0) throw ConfigError("shadow.iterations must be >= 0");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ConfigError("shadow.split_fraction must lie in (0, 1)");
  }
  if (bins < 2) throw ConfigError("shadow.bins must be >= 2");
  if (per_bin_cap < 1) throw ConfigError("shadow.per_bin_cap must be >= 1");
}

std::vector<ShadowPair> GenerateShadowPairs(std::span<const Sample> labelled,
                                            const ShadowConfig& config,
                                            std::uint64_t seed,
                                            const ShadowTrainer& trainer,
                                            const FeatureOptions& options) {
  config.Validate();
  if (labelled.empty()) throw DataError("shadow protocol needs labelled data");
  const int m = static_cast<int>(labelled.size());
  int train_count = static_cast<int>(std::lround(config.split_fraction * m));
  train_count = m == 1 ? 0 : std::clamp(train_count, 1, m - 1);

  std::vector<ShadowPair> pairs;
  pairs.reserve(static_cast<std::size_t>(config.iterations) * (m - train_count));
  std::vector<int> order(m);
  std::vector<const Sample*> train;
  for (int it = 0; it < config.iterations; ++it) {
    Rng rng(Mix64(seed ^ static_cast<std::uint64_t>(it)));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::sort(order.begin(), order.begin() + train_count);
    std::sort(order.begin() + train_count, order.end());
    train.clear();
    for (int i = 0; i < train_count; ++i) train.push_back(&labelled[order[i]]);
    const SimModel shadow = trainer(train);
    for (int i = train_count; i < m; ++i) {
      const Sample& sample = labelled[order[i]];
      const ClusteringMap cmap = SimulateInference(shadow, sample, rng);
      const InstanceMap decoded = DecodeClustering(cmap, shadow.min_area);
      pairs.push_back({ExtractFeatures(cmap, options),
                       PanopticQuality(decoded, sample.gt).pq});
    }
  }
  return pairs;
}

std::vector<int> PqHistogram(std::span<const ShadowPair> pairs, int bins) {
  std::vector<int> hist(bins, 0);
  for (const auto& p : pairs) ++hist[PqBin(p.pq_score, bins)];
  return hist;
}

double HistogramFlatness(std::span<const int> histogram) {
  int lo = 0;
  int hi = 0;
  for (int c : histogram) {
    if (c == 0) continue;
    lo = lo == 0 ? c : std::min(lo, c);
    hi = std::max(hi, c);
  }
  return lo == 0 ? 0.0 : static_cast<double>(hi) / lo;
}

std::vector<ShadowPair> RebalanceUniform(std::span<const ShadowPair> pairs,
                                         int bins, int per_bin_cap, Rng& rng) {
  if (bins < 2) throw ConfigError("rebalance needs at least 2 bins");
  if (per_bin_cap < 1) throw ConfigError("per-bin cap must be positive");
  std::vector<std::vector<int>> members(bins);
  for (int i = 0; i < static_cast<int>(pairs.size()); ++i) {
    members[PqBin(pairs[i].pq_score, bins)].push_back(i);
  }
  int largest = 0;
  for (const auto& m : members) largest = std::max<int>(largest, m.size());

  int best_q = 0;
  long best_total = 0;
  for (int q = 1; q <= std::min(per_bin_cap, largest); ++q) {
    const int floor_count = (2 * q + 2) / 3;  // ceil(q / 1.5)
    long total = 0;
    for (const auto& m : members) {
      const int c = static_cast<int>(m.size());
      if (c >= floor_count) total += std::min(c, q);
    }
    if (total > best_total) {
      best_total = total;
      best_q = q;
    }
  }

  std::vector<char> keep(pairs.size(), 0);
  const int floor_count = (2 * best_q + 2) / 3;
  for (auto& m : members) {
    const int c = static_cast<int>(m.size());
    if (best_q == 0 || c < floor_count) continue;
    const int take = std::min(c, best_q);
    for (int i = 0; i < take; ++i) {
      std::uniform_int_distribution<int> pick(i, c - 1);
      std::swap(m[i], m[pick(rng)]);
      keep[m[i]] = 1;
    }
  }
  std::vector<ShadowPair> out;
  out.reserve(best_total);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (keep[i]) out.push_back(pairs[i]);
  }
  return out;
}

void WriteShadowCsv(std::ostream& out, std::span<const ShadowPair> pairs,
                    std::span<const std::string> names) {
  out << "pq";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof(buf), "%.6f", p.pq_score);
    out << buf;
    for (double v : p.features) {
      std::snprintf(buf, sizeof(buf), ",%.6f", v);
      out << buf;
    }
    out << '\n';
  }
}

std::vector<ShadowPair> ReadShadowCsv(std::istream& in,
                                      std::vector<std::string>* names) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("shadow CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "pq") {
    throw DataError("shadow CSV header must start with 'pq'");
  }
  if (names) names->assign(header.begin() + 1, header.end());
  std::vector<ShadowPair> pairs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() ||
          !std::isfinite(v)) {
        throw DataError("shadow CSV line " + std::to_string(line_no) +
                        ": bad number '" + cell + "'");
      }
      values.push_back(v);
    }
    if (values.size() != header.size()) {
      throw DataError("shadow CSV line " + std::to_string(line_no) +
                      ": expected " + std::to_string(header.size()) +
                      " columns");
    }
    pairs.push_back({FeatureVector(values.begin() + 1, values.end()),
                     values[0]});
  }
  return pairs;
}

void SaveShadowCsv(const std::filesystem::path& path,
                   std::span<const ShadowPair> pairs,
                   std::span<const std::string> names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  WriteShadowCsv(out, pairs, names);
}

}  // namespace incseg
