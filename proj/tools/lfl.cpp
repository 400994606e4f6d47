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

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lfl/error.hpp"
#include "lfl/experiment.hpp"
#include "lfl/quant.hpp"
#include "lfl/rng.hpp"

namespace {

int cmd_run(const std::string& path) {
  const lfl::experiment::RunConfig cfg = lfl::experiment::load_config(path);
  const auto report = lfl::experiment::run_experiment(cfg);
  std::cout << "wrote " << report.csv_files.size() << " run(s) to "
            << report.output_dir.string() << "\n";
  for (const auto& e : report.errors) std::cerr << "run failed: " << e << "\n";
  return report.errors.empty() ? 0 : 3;
}

int cmd_summarize(const std::string& dir) {
  const auto rows = lfl::experiment::summarize(dir);
  std::printf("%-9s %5s %7s %22s %22s %8s\n", "scheme", "runs", "rounds",
              "final_loss_mean", "bits_down_cum", "viol");
  for (const auto& s : rows) {
    std::printf("%-9s %5zu %7zu %22.15g %22.15g %8zu\n", s.scheme.c_str(), s.runs,
                s.rounds, s.final_loss_mean, s.bits_down_cum, s.bound_violations);
  }
  return 0;
}

int cmd_quantize_bench(std::size_t d, std::uint32_t q, std::uint64_t seed, int reps) {
  using clock = std::chrono::steady_clock;
  const lfl::QuantLevel level(q);
  lfl::RngStream data_rng(seed, 1);
  std::vector<double> x(d);
  for (auto& v : x) v = 2.0 * data_rng.uniform() - 1.0;

  auto time_policy = [&](lfl::ExecutionPolicy policy, lfl::quant::QuantizedMessage& msg) {
    lfl::RngStream rng(seed, 2);
    const auto start = clock::now();
    for (int r = 0; r < reps; ++r) lfl::quant::quantize_into(x, level, rng, msg, policy);
    return std::chrono::duration<double>(clock::now() - start).count() / reps;
  };
  lfl::quant::QuantizedMessage serial_msg;
  lfl::quant::QuantizedMessage parallel_msg;
  const double t_serial = time_policy(lfl::ExecutionPolicy::kSerial, serial_msg);
  const double t_parallel = time_policy(lfl::ExecutionPolicy::kParallel, parallel_msg);

  const auto cost = lfl::quant::bit_cost(d, level);
  const auto bytes = lfl::quant::encode(serial_msg);
  const auto back = lfl::quant::reconstruct(serial_msg);
  double err2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) err2 += (back[i] - x[i]) * (back[i] - x[i]);

  std::printf("d=%zu q=%u reps=%d\n", d, q, reps);
  std::printf("serial_seconds    %.6e\n", t_serial);
  std::printf("parallel_seconds  %.6e\n", t_parallel);
  std::printf("identical         %s\n", serial_msg == parallel_msg ? "yes" : "no");
  std::printf("formula_bits      %.17g\n", cost.formula_bits);
  std::printf("packed_bits       %llu\n", static_cast<unsigned long long>(cost.packed_bits));
  std::printf("encoded_bytes     %zu\n", bytes.size());
  std::printf("lossless_bits     %.17g\n", lfl::quant::kLosslessBitsPerEntry * d);
  std::printf("savings_ratio     %.17g\n", lfl::quant::savings_ratio(level, d));
  std::printf("sq_error          %.17g\n", err2);
  return serial_msg == parallel_msg ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lossy federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the scheme sweep described by a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  std::string dir;
  auto* summarize = app.add_subcommand("summarize", "Summarize the run CSVs of a directory");
  summarize->add_option("dir", dir, "Run directory")->required();

  std::size_t d = 0;
  std::uint32_t q = 0;
  std::uint64_t seed = 1;
  int reps = 10;
  auto* bench = app.add_subcommand("quantize-bench", "Quantize a random vector and report cost");
  bench->add_option("d", d, "Dimension")->required()->check(CLI::PositiveNumber);
  bench->add_option("q", q, "Quantization level")->required()->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed, "Seed");
  bench->add_option("--reps", reps, "Repetitions")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path);
    if (*summarize) return cmd_summarize(dir);
    if (*bench) return cmd_quantize_bench(d, q, seed, reps);
  } catch (const lfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
