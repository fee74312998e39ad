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

// Campaign configuration files: one `key = value` per line, `#` starts a
// comment, dotted prefixes group the scene, simulator, shadow and assessor
// settings. Missing keys keep their defaults; unknown keys are errors.
//
//   stages = 6
//   annotation_fraction = 0.10
//   sim.initial_skill = 0.3
//   shadow.iterations = 80

#ifndef INCSEG_CONFIG_H_
#define INCSEG_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "incseg/engine.h"

namespace incseg {

// Throws ConfigError with "<source>:<line>: ..." on a syntax error, an
// unknown key or an out-of-range value.
CampaignConfig ParseConfigText(std::string_view text,
                               std::string_view source = "<config>");
CampaignConfig ParseConfig(const std::filesystem::path& path);

// Every key with its effective value, in the file grammar.
std::string FormatConfig(const CampaignConfig& config);

std::vector<std::string> ParseNameList(std::string_view text);
std::vector<std::uint64_t> ParseSeedList(std::string_view text);
std::vector<double> ParseValueList(std::string_view text);

}  // namespace incseg

#endif  // INCSEG_CONFIG_H_
