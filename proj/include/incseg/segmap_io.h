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

// Text formats for instance maps (IMAPv1) and clustering maps (CMAPv1).
//
//   IMAP <width> <height>
//   <height lines of width space-separated ids>
//
//   CMAP <width> <height> <K>
//   <K+1 blocks of height lines, width probabilities with 6 decimals>

#ifndef INCSEG_SEGMAP_IO_H_
#define INCSEG_SEGMAP_IO_H_

#include <filesystem>
#include <iosfwd>

#include "incseg/segmap.h"

namespace incseg {

void WriteInstanceMap(std::ostream& out, const InstanceMap& map);
// Throws DataError on malformed input.
InstanceMap ReadInstanceMap(std::istream& in);

// Probabilities are rounded to 6 decimals with the rounding residue folded
// into each pixel's largest entry, so the printed values still sum to 1.
void WriteClusteringMap(std::ostream& out, const ClusteringMap& cmap);
ClusteringMap ReadClusteringMap(std::istream& in);

InstanceMap LoadInstanceMap(const std::filesystem::path& path);
void SaveInstanceMap(const std::filesystem::path& path, const InstanceMap& map);
ClusteringMap LoadClusteringMap(const std::filesystem::path& path);
void SaveClusteringMap(const std::filesystem::path& path,
                       const ClusteringMap& cmap);

}  // namespace incseg

#endif  // INCSEG_SEGMAP_IO_H_
