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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lfl/types.hpp"

namespace lfl::transform {

// Orthonormal Walsh-Hadamard transform over the next power of two >= d,
// optionally preceded by a seeded ±1 diagonal.
class HadamardPlan {
 public:
  explicit HadamardPlan(std::size_t d, bool randomize_signs = false,
                        std::uint64_t sign_seed = 0);

  std::size_t size() const noexcept { return n_; }
  std::size_t padded_from() const noexcept { return d_; }
  bool randomize_signs() const noexcept { return !signs_.empty(); }
  std::uint64_t sign_seed() const noexcept { return sign_seed_; }
  // Empty unless randomize_signs.
  std::span<const double> signs() const noexcept { return signs_; }

 private:
  std::size_t d_;
  std::size_t n_;
  std::uint64_t sign_seed_;
  std::vector<double> signs_;
};

std::size_t next_power_of_two(std::size_t d) noexcept;

ModelVector forward(std::span<const double> x, const HadamardPlan& plan,
                    ExecutionPolicy policy = ExecutionPolicy::kSerial);
ModelVector inverse(std::span<const double> y, const HadamardPlan& plan,
                    ExecutionPolicy policy = ExecutionPolicy::kSerial);

}  // namespace lfl::transform
