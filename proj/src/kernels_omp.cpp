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
#include <bit>
#include <cmath>
#include <cstdint>

#include "lfl/kernels.hpp"

namespace lfl::kernels::omp {

Extremes extremes(std::span<const double> x) noexcept {
  const auto n = static_cast<std::int64_t>(x.size());
  double hi = 0.0;
  double lo = x.empty() ? 0.0 : std::abs(x[0]);
#pragma omp parallel for reduction(max : hi) reduction(min : lo) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = std::abs(x[i]);
    hi = std::max(hi, a);
    lo = std::min(lo, a);
  }
  return {hi, lo};
}

void quantize(std::span<const double> x, std::uint32_t q, const RngStream& rng,
              std::uint64_t base, quant::QuantizedMessage& out) {
  const Extremes ext = extremes(x);
  const auto d = static_cast<std::int64_t>(x.size());
  out.x_max = ext.max_abs;
  out.x_min = ext.min_abs;
  out.q = QuantLevel(q);
  out.signs.resize(x.size());
  out.levels.resize(x.size());
  const double range = ext.max_abs - ext.min_abs;
  std::int8_t* signs = out.signs.data();
  std::uint32_t* levels = out.levels.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < d; ++i) {
    signs[i] = x[i] < 0.0 ? std::int8_t{-1} : std::int8_t{1};
    if (range == 0.0) {
      levels[i] = 0;
    } else {
      const double normalized = (std::abs(x[i]) - ext.min_abs) / range;
      levels[i] = quant::level_for(
          normalized, q, rng.uniform_at(base + static_cast<std::uint64_t>(i)));
    }
  }
}

void fwht(std::span<double> data) noexcept {
  const auto n = static_cast<std::int64_t>(data.size());
  if (n < 2) return;
  double* p = data.data();
  // Stages narrower than a chunk stay inside it; wider stages split butterflies.
  const std::int64_t chunk = std::min<std::int64_t>(n, 1 << 12);
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < n; c += chunk) {
      for (std::int64_t h = 1; h < chunk; h *= 2) {
        for (std::int64_t i = c; i < c + chunk; i += 2 * h) {
          for (std::int64_t j = i; j < i + h; ++j) {
            const double a = p[j];
            const double b = p[j + h];
            p[j] = a + b;
            p[j + h] = a - b;
          }
        }
      }
    }
    for (std::int64_t h = chunk; h < n; h *= 2) {
      const int shift = std::countr_zero(static_cast<std::uint64_t>(h));
#pragma omp for schedule(static)
      for (std::int64_t k = 0; k < n / 2; ++k) {
        const std::int64_t i = ((k >> shift) << (shift + 1)) | (k & (h - 1));
        const double a = p[i];
        const double b = p[i + h];
        p[i] = a + b;
        p[i + h] = a - b;
      }
    }
  }
}

}  // namespace lfl::kernels::omp
