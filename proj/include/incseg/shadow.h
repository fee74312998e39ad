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

// Shadow-model protocol that produces (features, PQ) training pairs for the
// difficulty assessor, and uniform rebalancing of those pairs.

#ifndef INCSEG_SHADOW_H_
#define INCSEG_SHADOW_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "incseg/assessor.h"
#include "incseg/rng.h"
#include "incseg/simworld.h"

namespace incseg {

struct ShadowConfig {
  int iterations = 80;
  double split_fraction = 0.5;  // shadow-train share
  int bins = 10;
  int per_bin_cap = 910;

  void Validate() const;
};

// Trains a fresh shadow model on the given shadow-train samples.
using ShadowTrainer =
    std::function<SimModel(std::span<const Sample* const> train)>;

// Iteration i draws its split and inferences from Rng(Mix64(seed ^ i)).
// Pairs are returned in iteration order, then shadow-test order.
std::vector<ShadowPair> GenerateShadowPairs(std::span<const Sample> labelled,
                                            const ShadowConfig& config,
                                            std::uint64_t seed,
                                            const ShadowTrainer& trainer,
                                            const FeatureOptions& options = {});

inline int PqBin(double pq, int bins) {
  const int b = static_cast<int>(pq * bins);
  return b < 0 ? 0 : (b >= bins ? bins - 1 : b);
}

std::vector<int> PqHistogram(std::span<const ShadowPair> pairs, int bins);

// max / min over nonempty bins; 0 for an empty histogram.
double HistogramFlatness(std::span<const int> histogram);

// Subsamples pairs towards a flat PQ histogram over `bins` equal-width
// intervals. Every kept bin receives min(count, Q) pairs for a quota
// Q <= per_bin_cap; bins holding fewer than ceil(Q / 1.5) pairs are dropped
// so the result has flatness <= 1.5. Q maximizes the number of kept pairs.
// The output keeps input order.
std::vector<ShadowPair> RebalanceUniform(std::span<const ShadowPair> pairs,
                                         int bins, int per_bin_cap, Rng& rng);

// CSV with header pq,<names...> and 6-decimal values.
void WriteShadowCsv(std::ostream& out, std::span<const ShadowPair> pairs,
                    std::span<const std::string> names);
std::vector<ShadowPair> ReadShadowCsv(std::istream& in,
                                      std::vector<std::string>* names = nullptr);
void SaveShadowCsv(const std::filesystem::path& path,
                   std::span<const ShadowPair> pairs,
                   std::span<const std::string> names);

}  // namespace incseg

#endif  // INCSEG_SHADOW_H_
