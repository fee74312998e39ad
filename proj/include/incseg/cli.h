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

// The incseg command-line interface.
//
//   simulate --config C --seed N --out DIR [--strategy S]
//   compare --config C --strategies LIST --seeds LIST --out DIR
//   sweep-threshold --config C --values LIST --out DIR [--seeds LIST]
//   eval-pq PRED GT
//   shadow-gen --config C --out FILE [--seed N]
//
// Exit status: 0 success, 1 configuration or internal error, 2 bad input
// data.

#ifndef INCSEG_CLI_H_
#define INCSEG_CLI_H_

#include <iosfwd>

namespace incseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace incseg

#endif  // INCSEG_CLI_H_
