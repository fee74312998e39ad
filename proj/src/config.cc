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

#include "incseg/config.h"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "incseg/errors.h"

namespace incseg {

namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> SplitCommas(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(Trim(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

long long ToInteger(std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

int ToInt(std::string_view v) {
  const long long x = ToInteger(v);
  if (x < INT32_MIN || x > INT32_MAX) {
    throw ConfigError("integer out of range: '" + std::string(v) + "'");
  }
  return static_cast<int>(x);
}

std::uint64_t ToSeed(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative seed, got '" + std::string(v) +
                      "'");
  }
  return out;
}

double ToDouble(std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE ||
      !std::isfinite(x)) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return x;
}

bool ToBool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

PseudoLabelResponse ToResponse(std::string_view v) {
  if (v == "signed") return PseudoLabelResponse::kSigned;
  if (v == "zero_floor") return PseudoLabelResponse::kZeroFloor;
  throw ConfigError("expected signed or zero_floor, got '" + std::string(v) +
                    "'");
}

using Setter = std::function<void(CampaignConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& Setters() {
  static const std::map<std::string, Setter, std::less<>> setters = {
      {"strategy", [](auto& c, auto v) { c.strategy = std::string(v); }},
      {"stages", [](auto& c, auto v) { c.stages = ToInt(v); }},
      {"package_instances",
       [](auto& c, auto v) { c.package_instances = ToInt(v); }},
      {"annotation_fraction",
       [](auto& c, auto v) { c.budget.annotation_fraction = ToDouble(v); }},
      {"easy_threshold",
       [](auto& c, auto v) { c.budget.easy_threshold = ToDouble(v); }},
      {"eval_scenes", [](auto& c, auto v) { c.eval_scenes = ToInt(v); }},
      {"refit_assessor",
       [](auto& c, auto v) { c.refit_assessor = ToBool(v); }},
      {"seeds", [](auto& c, auto v) { c.seeds = ParseSeedList(v); }},
      {"output_dir", [](auto& c, auto v) { c.output_dir = std::string(v); }},
      {"scene.width", [](auto& c, auto v) { c.scene.width = ToInt(v); }},
      {"scene.height", [](auto& c, auto v) { c.scene.height = ToInt(v); }},
      {"scene.min_instances",
       [](auto& c, auto v) { c.scene.min_instances = ToInt(v); }},
      {"scene.max_instances",
       [](auto& c, auto v) { c.scene.max_instances = ToInt(v); }},
      {"scene.overlap_pressure",
       [](auto& c, auto v) { c.scene.overlap_pressure = ToDouble(v); }},
      {"scene.min_radius",
       [](auto& c, auto v) { c.scene.min_radius = ToDouble(v); }},
      {"scene.max_radius",
       [](auto& c, auto v) { c.scene.max_radius = ToDouble(v); }},
      {"scene.min_instance_area",
       [](auto& c, auto v) { c.scene.min_instance_area = ToInt(v); }},
      {"sim.initial_skill",
       [](auto& c, auto v) { c.sim.skill = ToDouble(v); }},
      {"sim.eta", [](auto& c, auto v) { c.sim.eta = ToDouble(v); }},
      {"sim.alpha", [](auto& c, auto v) { c.sim.alpha = ToDouble(v); }},
      {"sim.floor", [](auto& c, auto v) { c.sim.floor = ToDouble(v); }},
      {"sim.noise", [](auto& c, auto v) { c.sim.noise = ToDouble(v); }},
      {"sim.layers", [](auto& c, auto v) { c.sim.layer_count = ToInt(v); }},
      {"sim.min_area",
       [](auto& c, auto v) { c.sim.min_area = ToInt(v); }},
      {"sim.pseudo_response",
       [](auto& c, auto v) { c.sim.pseudo_response = ToResponse(v); }},
      {"shadow.iterations",
       [](auto& c, auto v) { c.shadow.iterations = ToInt(v); }},
      {"shadow.split_fraction",
       [](auto& c, auto v) { c.shadow.split_fraction = ToDouble(v); }},
      {"shadow.bins", [](auto& c, auto v) { c.shadow.bins = ToInt(v); }},
      {"shadow.per_bin_cap",
       [](auto& c, auto v) { c.shadow.per_bin_cap = ToInt(v); }},
      {"assess.lambda", [](auto& c, auto v) { c.ridge_lambda = ToDouble(v); }},
      {"assess.instance_cap",
       [](auto& c, auto v) { c.instance_cap = ToInt(v); }},
  };
  return setters;
}

}  // namespace

std::vector<std::string> ParseNameList(std::string_view text) {
  std::vector<std::string> out;
  for (auto item : SplitCommas(text)) {
    if (item.empty()) throw ConfigError("empty entry in list");
    out.emplace_back(item);
  }
  return out;
}

std::vector<std::uint64_t> ParseSeedList(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (auto item : SplitCommas(text)) {
    const auto dash = item.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      const std::uint64_t lo = ToSeed(Trim(item.substr(0, dash)));
      const std::uint64_t hi = ToSeed(Trim(item.substr(dash + 1)));
      if (hi < lo || hi - lo > 100000) {
        throw ConfigError("bad seed range '" + std::string(item) + "'");
      }
      for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(ToSeed(item));
    }
  }
  return out;
}

std::vector<double> ParseValueList(std::string_view text) {
  std::vector<double> out;
  for (auto item : SplitCommas(text)) out.push_back(ToDouble(item));
  return out;
}

CampaignConfig ParseConfigText(std::string_view text, std::string_view source) {
  CampaignConfig config;
  const auto& setters = Setters();
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto where = [&] {
      return std::string(source) + ":" + std::to_string(line_no) + ": ";
    };
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where() + "expected 'key = value'");
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = Trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(where() + "unknown key '" + std::string(key) + "'");
    }
    if (value.empty()) {
      throw ConfigError(where() + "missing value for '" + std::string(key) +
                        "'");
    }
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + std::string(key) + ": " + e.what());
    }
  }
  try {
    config.Validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return config;
}

CampaignConfig ParseConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfigText(buffer.str(), path.string());
}

std::string FormatConfig(const CampaignConfig& c) {
  std::ostringstream out;
  char buf[64];
  const auto num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  const auto integer = [&](const char* key, long long v) {
    out << key << " = " << v << '\n';
  };
  if (!c.strategy.empty()) out << "strategy = " << c.strategy << '\n';
  integer("stages", c.stages);
  integer("package_instances", c.package_instances);
  num("annotation_fraction", c.budget.annotation_fraction);
  num("easy_threshold", c.budget.easy_threshold);
  integer("eval_scenes", c.eval_scenes);
  out << "refit_assessor = " << (c.refit_assessor ? "true" : "false") << '\n';
  out << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    out << (i ? "," : "") << c.seeds[i];
  }
  out << '\n';
  if (!c.output_dir.empty()) out << "output_dir = " << c.output_dir << '\n';
  integer("scene.width", c.scene.width);
  integer("scene.height", c.scene.height);
  integer("scene.min_instances", c.scene.min_instances);
  integer("scene.max_instances", c.scene.max_instances);
  num("scene.overlap_pressure", c.scene.overlap_pressure);
  num("scene.min_radius", c.scene.min_radius);
  num("scene.max_radius", c.scene.max_radius);
  integer("scene.min_instance_area", c.scene.min_instance_area);
  num("sim.initial_skill", c.sim.skill);
  num("sim.eta", c.sim.eta);
  num("sim.alpha", c.sim.alpha);
  num("sim.floor", c.sim.floor);
  num("sim.noise", c.sim.noise);
  integer("sim.layers", c.sim.layer_count);
  integer("sim.min_area", c.sim.min_area);
  out << "sim.pseudo_response = "
      << (c.sim.pseudo_response == PseudoLabelResponse::kSigned ? "signed"
                                                                : "zero_floor")
      << '\n';
  integer("shadow.iterations", c.shadow.iterations);
  num("shadow.split_fraction", c.shadow.split_fraction);
  integer("shadow.bins", c.shadow.bins);
  integer("shadow.per_bin_cap", c.shadow.per_bin_cap);
  num("assess.lambda", c.ridge_lambda);
  integer("assess.instance_cap", c.instance_cap);
  return out.str();
}

}  // namespace incseg
