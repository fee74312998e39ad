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

#include "incseg/segmap_io.h"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "incseg/errors.h"

namespace incseg {

namespace {

constexpr std::int64_t kMicro = 1000000;

std::vector<std::string_view> SplitWhitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string_view> Next(const char* what) {
    if (!std::getline(in_, line_)) {
      throw DataError("unexpected end of input at line " +
                      std::to_string(line_no_ + 1) + " (expected " + what +
                      ")");
    }
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    return SplitWhitespace(line_);
  }

  [[noreturn]] void Fail(const std::string& msg) const {
    throw DataError("line " + std::to_string(line_no_) + ": " + msg);
  }

  int line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::string line_;
  int line_no_ = 0;
};

template <typename T>
T ParseNumber(const LineReader& reader, std::string_view token) {
  T value{};
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    reader.Fail("cannot parse '" + std::string(token) + "'");
  }
  return value;
}

double ParseProbability(const LineReader& reader, std::string_view token) {
  // std::from_chars for double is unavailable on older libstdc++.
  const std::string s(token);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) {
    reader.Fail("cannot parse probability '" + s + "'");
  }
  return v;
}

void ExpectEnd(std::istream& in, LineReader& reader) {
  std::string rest;
  while (std::getline(in, rest)) {
    if (!SplitWhitespace(rest).empty()) {
      reader.Fail("trailing data after map body");
    }
  }
}

}  // namespace

void WriteInstanceMap(std::ostream& out, const InstanceMap& map) {
  out << "IMAP " << map.width() << ' ' << map.height() << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (x > 0) out << ' ';
      out << map.at(x, y);
    }
    out << '\n';
  }
}

InstanceMap ReadInstanceMap(std::istream& in) {
  LineReader reader(in);
  const auto header = reader.Next("IMAP header");
  if (header.size() != 3 || header[0] != "IMAP") {
    reader.Fail("expected 'IMAP <width> <height>'");
  }
  const int width = ParseNumber<int>(reader, header[1]);
  const int height = ParseNumber<int>(reader, header[2]);
  if (width <= 0 || height <= 0) reader.Fail("dimensions must be positive");

  std::vector<InstanceId> labels;
  labels.reserve(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const auto row = reader.Next("map row");
    if (static_cast<int>(row.size()) != width) {
      reader.Fail("expected " + std::to_string(width) + " values, got " +
                  std::to_string(row.size()));
    }
    for (auto token : row) {
      const auto v = ParseNumber<InstanceId>(reader, token);
      if (v < 0) reader.Fail("negative instance id");
      labels.push_back(v);
    }
  }
  ExpectEnd(in, reader);
  return InstanceMap(width, height, std::move(labels));
}

void WriteClusteringMap(std::ostream& out, const ClusteringMap& cmap) {
  const int channels = cmap.channels();
  // Fixed-point micro units per pixel, residue on the largest entry.
  std::vector<std::int64_t> micro(static_cast<std::size_t>(cmap.pixel_count()) *
                                  channels);
  for (int i = 0; i < cmap.pixel_count(); ++i) {
    const auto px = cmap.pixel(i);
    std::int64_t sum = 0;
    int largest = 0;
    for (int k = 0; k < channels; ++k) {
      const auto v = static_cast<std::int64_t>(std::llround(px[k] * kMicro));
      micro[static_cast<std::size_t>(i) * channels + k] = v;
      sum += v;
      if (px[k] > px[largest]) largest = k;
    }
    micro[static_cast<std::size_t>(i) * channels + largest] += kMicro - sum;
  }

  out << "CMAP " << cmap.width() << ' ' << cmap.height() << ' '
      << cmap.layer_count() << '\n';
  char buf[32];
  for (int k = 0; k < channels; ++k) {
    for (int y = 0; y < cmap.height(); ++y) {
      for (int x = 0; x < cmap.width(); ++x) {
        const std::int64_t v =
            micro[static_cast<std::size_t>(y * cmap.width() + x) * channels +
                  k];
        std::snprintf(buf, sizeof(buf), "%s%lld.%06lld", x > 0 ? " " : "",
                      static_cast<long long>(v / kMicro),
                      static_cast<long long>(v % kMicro));
        out << buf;
      }
      out << '\n';
    }
  }
}

ClusteringMap ReadClusteringMap(std::istream& in) {
  LineReader reader(in);
  const auto header = reader.Next("CMAP header");
  if (header.size() != 4 || header[0] != "CMAP") {
    reader.Fail("expected 'CMAP <width> <height> <K>'");
  }
  const int width = ParseNumber<int>(reader, header[1]);
  const int height = ParseNumber<int>(reader, header[2]);
  const int layers = ParseNumber<int>(reader, header[3]);
  if (width <= 0 || height <= 0 || layers <= 0) {
    reader.Fail("dimensions and layer count must be positive");
  }
  const int channels = layers + 1;
  std::vector<double> probs(static_cast<std::size_t>(width) * height *
                            channels);
  for (int k = 0; k < channels; ++k) {
    for (int y = 0; y < height; ++y) {
      const auto row = reader.Next("probability row");
      if (static_cast<int>(row.size()) != width) {
        reader.Fail("expected " + std::to_string(width) + " values, got " +
                    std::to_string(row.size()));
      }
      for (int x = 0; x < width; ++x) {
        probs[static_cast<std::size_t>(y * width + x) * channels + k] =
            ParseProbability(reader, row[x]);
      }
    }
  }
  ExpectEnd(in, reader);
  return ClusteringMap(width, height, layers, std::move(probs));
}

InstanceMap LoadInstanceMap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return ReadInstanceMap(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void SaveInstanceMap(const std::filesystem::path& path, const InstanceMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  WriteInstanceMap(out, map);
}

ClusteringMap LoadClusteringMap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return ReadClusteringMap(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void SaveClusteringMap(const std::filesystem::path& path,
                       const ClusteringMap& cmap) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  WriteClusteringMap(out, cmap);
}

}  // namespace incseg
