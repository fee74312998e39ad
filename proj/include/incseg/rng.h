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

#ifndef INCSEG_RNG_H_
#define INCSEG_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace incseg {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Purpose tags keep the random streams of different pipeline steps apart, so
// that e.g. changing the strategy never shifts the draws used for scene
// generation.
enum class StreamTag : std::uint64_t {
  kPackage = 1,
  kEvalSet = 2,
  kCandidateInference = 3,
  kEvalInference = 4,
  kShadow = 5,
  kRebalance = 6,
  kRandomScores = 7,
  kMembership = 8,
  kRefit = 9,
};

inline std::uint64_t DeriveSeed(std::uint64_t master, StreamTag tag,
                                std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = Mix64(master ^ Mix64(static_cast<std::uint64_t>(tag)));
  for (std::uint64_t k : keys) h = Mix64(h ^ Mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng MakeRng(std::uint64_t master, StreamTag tag,
                   std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(DeriveSeed(master, tag, keys));
}

inline double Uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace incseg

#endif  // INCSEG_RNG_H_
