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

#ifndef INCSEG_ERRORS_H_
#define INCSEG_ERRORS_H_

#include <stdexcept>
#include <string>

namespace incseg {

// Malformed or inconsistent input data. The CLI maps this to exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

// Bad configuration or arguments. The CLI maps this to exit status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The simulated segmenter could not hit its target PQ within the iteration
// bound.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace incseg

#endif  // INCSEG_ERRORS_H_
