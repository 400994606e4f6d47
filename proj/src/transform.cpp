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

#include "lfl/transform.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "lfl/kernels.hpp"
#include "lfl/rng.hpp"

namespace lfl::transform {

namespace {

void butterflies(std::span<double> data, ExecutionPolicy policy) {
  if (policy == ExecutionPolicy::kParallel) {
    kernels::omp::fwht(data);
  } else {
    kernels::serial::fwht(data);
  }
}

}  // namespace

std::size_t next_power_of_two(std::size_t d) noexcept {
  return d <= 1 ? 1 : std::bit_ceil(d);
}

HadamardPlan::HadamardPlan(std::size_t d, bool randomize_signs,
                           std::uint64_t sign_seed)
    : d_(d), n_(next_power_of_two(d)), sign_seed_(sign_seed) {
  if (d == 0) throw StructuralError("HadamardPlan: d must be >= 1");
  if (randomize_signs) {
    RngStream rng(sign_seed, 0);
    signs_.resize(n_);
    for (double& s : signs_) s = (rng.next_bits() >> 63) ? -1.0 : 1.0;
  }
}

ModelVector forward(std::span<const double> x, const HadamardPlan& plan,
                    ExecutionPolicy policy) {
  if (x.size() != plan.padded_from()) {
    throw StructuralError("forward: expected length " +
                          std::to_string(plan.padded_from()) + ", got " +
                          std::to_string(x.size()));
  }
  const std::size_t n = plan.size();
  ModelVector y(n, 0.0);
  const auto signs = plan.signs();
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = signs.empty() ? x[i] : signs[i] * x[i];
  }
  butterflies(y, policy);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : y) v *= scale;
  return y;
}

ModelVector inverse(std::span<const double> y, const HadamardPlan& plan,
                    ExecutionPolicy policy) {
  const std::size_t n = plan.size();
  if (y.size() != n) {
    throw StructuralError("inverse: expected length " + std::to_string(n) +
                          ", got " + std::to_string(y.size()));
  }
  ModelVector work(y.begin(), y.end());
  butterflies(work, policy);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto signs = plan.signs();
  ModelVector x(plan.padded_from());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = work[i] * scale;
    if (!signs.empty()) x[i] *= signs[i];
  }
  return x;
}

}  // namespace lfl::transform
