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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfl/data.hpp"
#include "lfl/fedcore.hpp"
#include "lfl/types.hpp"

namespace lfl::experiment {

enum class ProblemKind { kQuadratic, kLogistic, kMnist };

// Everything a sweep needs. Parsed from flat `key = value` text; see
// parse_config for the key list.
struct RunConfig {
  std::vector<fed::Scheme> schemes;
  ProblemKind problem = ProblemKind::kQuadratic;
  std::size_t num_devices = 10;
  std::size_t dim = 20;  // quadratic only
  int tau = 1;
  std::size_t rounds = 100;
  LinkLevel q1;
  LinkLevel q2;
  LinkLevel ltgm_q1;  // overrides q1 for LTGM when set
  bool lr_decaying = false;
  double eta = 0.1;
  double alpha = 1.0;
  double beta = 1.0;
  bool lr_cap = false;
  std::vector<std::uint64_t> seeds;
  data::PartitionMode partition = data::PartitionMode::kIid;
  std::filesystem::path output_dir = "lfl_out";
  std::size_t batch_size = 0;
  fed::LocalOptimizer optimizer = fed::LocalOptimizer::kSgd;
  bool parallel = false;
  bool ltgm_randomize_signs = false;
  std::uint64_t ltgm_sign_seed = 0;
  // nullopt: use each scheme's measured running max of ε.
  std::optional<double> bound_epsilon = 1e-3;

  std::uint64_t problem_seed = 1;
  // quadratic
  double mu = 1.0;
  double L = 5.0;
  double center_scale = 1.0;
  double heterogeneity = 0.1;
  std::size_t samples_per_device = 1;
  double sample_noise = 0.0;
  // logistic
  int classes = 10;
  std::size_t features = 10;
  std::size_t samples_per_class = 100;
  std::size_t test_per_class = 20;
  double separation = 1.0;
  double lambda_reg = 0.01;
  // mnist
  std::filesystem::path mnist_images;
  std::filesystem::path mnist_labels;
  std::filesystem::path mnist_test_images;
  std::filesystem::path mnist_test_labels;
  std::size_t mnist_limit = 0;
  bool solve_optimum = true;

  // Scheme settings with the per-scheme level rules applied: LB drops q1,
  // LOSSLESS drops both, LTGM takes ltgm_q1 when set.
  fed::SchemeConfig scheme_config(fed::Scheme scheme) const;
};

// Throws ConfigError naming the offending key. Unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Output directory with LFL_OUTPUT_ROOT prepended to relative paths.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

inline constexpr const char* kCsvHeader =
    "round,scheme,seed,global_loss,dist_to_opt_sq,bits_down_cum,bits_up_cum,"
    "epsilon_t,bound_value,test_accuracy";

std::string csv_file_name(fed::Scheme scheme, std::uint64_t seed);

struct ExperimentReport {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> csv_files;
  std::vector<std::string> errors;  // one entry per run cut short
};

// Runs every (scheme, seed) pair, writes one CSV per run, then the summary.
ExperimentReport run_experiment(const RunConfig& config);

struct SchemeSummary {
  std::string scheme;
  std::size_t runs = 0;
  std::size_t rounds = 0;
  double final_loss_mean = 0.0;
  double final_loss_std = 0.0;
  std::optional<double> final_dist_mean;
  double bits_down_cum = 0.0;
  double bits_up_cum = 0.0;
  double epsilon_mean = 0.0;
  double epsilon_max = 0.0;
  std::size_t bound_violations = 0;
  std::size_t bound_rounds = 0;  // rounds that carried a bound value
  std::vector<std::string> errors;
};

// Reads the run CSVs of a directory and writes summary.csv and summary.json
// with one row per scheme. Throws Error when the directory has no runs.
std::vector<SchemeSummary> summarize(const std::filesystem::path& dir);

}  // namespace lfl::experiment
