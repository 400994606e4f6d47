// Copyright 2026 The LFL Simulator Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfl/error.hpp"

namespace lfl {

// Dense model-space vector: θ, θ̂, local updates, error accumulators.
using ModelVector = std::vector<double>;

// Number of uniform quantization intervals, always >= 1.
class QuantLevel {
 public:
  explicit QuantLevel(std::uint32_t q) : q_(q) {
    if (q == 0) throw DomainError("quantization level must be >= 1");
  }

  std::uint32_t value() const noexcept { return q_; }

  friend bool operator==(QuantLevel, QuantLevel) = default;

 private:
  std::uint32_t q_;
};

// nullopt stands for q = infinity, i.e. the link is lossless.
using LinkLevel = std::optional<QuantLevel>;

inline std::string to_string(const LinkLevel& level) {
  return level ? std::to_string(level->value()) : std::string("inf");
}

enum class ExecutionPolicy { kSerial, kParallel };

inline double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace lfl
