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

#include <algorithm>
#include <cmath>

#include "lfl/kernels.hpp"

namespace lfl::kernels::serial {

Extremes extremes(std::span<const double> x) noexcept {
  double hi = 0.0;
  double lo = x.empty() ? 0.0 : std::abs(x[0]);
  for (double v : x) {
    const double a = std::abs(v);
    hi = std::max(hi, a);
    lo = std::min(lo, a);
  }
  return {hi, lo};
}

void quantize(std::span<const double> x, std::uint32_t q, const RngStream& rng,
              std::uint64_t base, quant::QuantizedMessage& out) {
  const Extremes ext = extremes(x);
  const std::size_t d = x.size();
  out.x_max = ext.max_abs;
  out.x_min = ext.min_abs;
  out.q = QuantLevel(q);
  out.signs.resize(d);
  out.levels.resize(d);
  const double range = ext.max_abs - ext.min_abs;
  for (std::size_t i = 0; i < d; ++i) {
    out.signs[i] = x[i] < 0.0 ? std::int8_t{-1} : std::int8_t{1};
    if (range == 0.0) {
      out.levels[i] = 0;
      continue;
    }
    const double normalized = (std::abs(x[i]) - ext.min_abs) / range;
    out.levels[i] = quant::level_for(normalized, q, rng.uniform_at(base + i));
  }
}

void fwht(std::span<double> data) noexcept {
  const std::size_t n = data.size();
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = data[j];
        const double b = data[j + h];
        data[j] = a + b;
        data[j + h] = a - b;
      }
    }
  }
}

}  // namespace lfl::kernels::serial
