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

#include <benchmark/benchmark.h>

#include <vector>

#include "lfl/fedcore.hpp"
#include "lfl/kernels.hpp"
#include "lfl/losses.hpp"
#include "lfl/rng.hpp"

namespace {

std::vector<double> random_vector(std::size_t n) {
  lfl::RngStream rng(11, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
  return x;
}

template <bool kParallel>
void BM_Quantize(benchmark::State& state) {
  const auto x = random_vector(static_cast<std::size_t>(state.range(0)));
  const lfl::RngStream rng(3, 0);
  lfl::quant::QuantizedMessage msg;
  msg.q = lfl::QuantLevel(4);
  msg.signs.resize(x.size());
  msg.levels.resize(x.size());
  std::uint64_t base = 0;
  for (auto _ : state) {
    if constexpr (kParallel) {
      lfl::kernels::omp::quantize(x, 4, rng, base, msg);
    } else {
      lfl::kernels::serial::quantize(x, 4, rng, base, msg);
    }
    base += x.size();
    benchmark::DoNotOptimize(msg.levels.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool kParallel>
void BM_Fwht(benchmark::State& state) {
  auto x = random_vector(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (kParallel) {
      lfl::kernels::omp::fwht(x);
    } else {
      lfl::kernels::serial::fwht(x);
    }
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <lfl::ExecutionPolicy kPolicy>
void BM_Round(benchmark::State& state) {
  lfl::losses::QuadraticSpec spec;
  spec.num_devices = 20;
  spec.dim = static_cast<std::size_t>(state.range(0));
  const auto problem = lfl::losses::make_quadratic(spec);
  lfl::fed::SchemeConfig cfg;
  cfg.q1 = lfl::QuantLevel(2);
  cfg.q2 = lfl::QuantLevel(2);
  cfg.tau = 4;
  cfg.lr = lfl::theory::LearningRate::constant(0.05);
  lfl::fed::Simulation sim(problem, cfg, {}, 1, kPolicy);
  for (auto _ : state) sim.step();
}

}  // namespace

BENCHMARK(BM_Quantize<false>)->Name("quantize/serial")->RangeMultiplier(16)->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Quantize<true>)->Name("quantize/omp")->RangeMultiplier(16)->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Fwht<false>)->Name("fwht/serial")->RangeMultiplier(16)->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Fwht<true>)->Name("fwht/omp")->RangeMultiplier(16)->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Round<lfl::ExecutionPolicy::kSerial>)->Name("round/serial")->Arg(50)->Arg(200);
BENCHMARK(BM_Round<lfl::ExecutionPolicy::kParallel>)->Name("round/parallel")->Arg(50)->Arg(200);

BENCHMARK_MAIN();
