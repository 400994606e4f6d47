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

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP twin; the two produce bit-identical results and the test suite
// checks that they do.

#include <cstdint>
#include <span>

#include "lfl/quant.hpp"
#include "lfl/rng.hpp"

namespace lfl::kernels {

// Magnitude extremes of x.
struct Extremes {
  double max_abs;
  double min_abs;
};

// Fills out.levels / out.signs / header for already validated, finite x.
// Entry i uses the uniform draw rng.uniform_at(base + i).
namespace serial {
Extremes extremes(std::span<const double> x) noexcept;
void quantize(std::span<const double> x, std::uint32_t q, const RngStream& rng,
              std::uint64_t base, quant::QuantizedMessage& out);
// Unnormalized in-place Walsh-Hadamard butterflies; data.size() is 2^k.
void fwht(std::span<double> data) noexcept;
}  // namespace serial

namespace omp {
Extremes extremes(std::span<const double> x) noexcept;
void quantize(std::span<const double> x, std::uint32_t q, const RngStream& rng,
              std::uint64_t base, quant::QuantizedMessage& out);
void fwht(std::span<double> data) noexcept;
}  // namespace omp

}  // namespace lfl::kernels
