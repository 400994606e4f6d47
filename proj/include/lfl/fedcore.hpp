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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfl/losses.hpp"
#include "lfl/quant.hpp"
#include "lfl/rng.hpp"
#include "lfl/theory.hpp"
#include "lfl/transform.hpp"
#include "lfl/types.hpp"

namespace lfl::fed {

// Downlink treatment of the global model.
//   kLfl       quantize θ(t) - θ̂(t-1), devices accumulate the reconstruction
//   kLb        lossless broadcast, quantized uplink
//   kLgm       quantize θ(t) plus the PS error accumulator
//   kLtgm      Walsh-Hadamard transform, quantize, inverse at the devices
//   kLossless  both links lossless
enum class Scheme { kLfl, kLb, kLgm, kLtgm, kLossless };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

enum class LocalOptimizer { kSgd, kAdam };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SchemeConfig {
  Scheme scheme = Scheme::kLfl;
  LinkLevel q1;  // downlink; nullopt = lossless
  LinkLevel q2;  // uplink; nullopt = lossless
  int tau = 1;
  theory::LearningRate lr = theory::LearningRate::constant(0.1);
  LocalOptimizer optimizer = LocalOptimizer::kSgd;
  AdamConfig adam;
  // Samples per local step drawn with replacement; 0 = full shard.
  std::size_t batch_size = 0;
  bool ltgm_randomize_signs = false;
  std::uint64_t ltgm_sign_seed = 0;
  // When set, every η(t) must satisfy η(t) <= min{1, 1/(μτ)} for this μ.
  std::optional<double> lr_cap_mu;

  // Throws StructuralError on scheme/level mismatches (LOSSLESS needs
  // q1 = q2 = inf, LB needs q1 = inf) and bad tau.
  void validate() const;
};

struct AdamState {
  ModelVector first;
  ModelVector second;
  std::uint64_t steps = 0;
};

struct DeviceState {
  std::size_t id = 0;
  ModelVector theta_hat;  // θ̂(t)
  ModelVector delta;      // uplink error accumulator δ_m
  double weight = 0.0;    // B_m / B
  RngStream rng;
  ModelVector update;     // Δθ_m(t) of the latest round
  ModelVector grad_sum;   // Σ_i ∇F_m(θ_m^i, ξ_m^i) of the latest round
  ModelVector sent;       // reconstruction of the latest uplink message
  AdamState adam;
  losses::GradBound grad_bound;
  std::vector<std::size_t> batch;
  ModelVector local;      // θ_m^i scratch
  ModelVector grad;       // gradient scratch
  quant::QuantizedMessage message;
};

struct ServerState {
  ModelVector theta;             // θ(t)
  ModelVector theta_hat_mirror;  // θ̂ as tracked by the PS
  ModelVector lgm_error;         // LGM only
  double bits_down_cum = 0.0;
  double bits_up_cum = 0.0;
  std::uint64_t round = 0;
  RngStream rng;
  quant::QuantizedMessage message;
};

struct LinkCosts {
  double down_per_round = 0.0;
  double up_per_round = 0.0;  // summed over devices
};

// Closed-form per-round link costs; LTGM pays for the padded dimension.
LinkCosts per_round_costs(const SchemeConfig& cfg, std::size_t d, std::size_t num_devices);

struct BroadcastOutcome {
  double bits = 0.0;
  double epsilon = 0.0;  // skewness of θ(t) - θ̂(t-1)
};

// Sends θ(t) to the devices per the scheme and sets every θ̂ (devices and
// mirror) to the same vector. Requires all device estimates to equal the
// mirror beforehand. `plan` is required for LTGM.
BroadcastOutcome broadcast_step(ServerState& server, std::span<DeviceState> devices,
                                const SchemeConfig& cfg,
                                const transform::HadamardPlan* plan = nullptr,
                                ExecutionPolicy policy = ExecutionPolicy::kSerial);

// τ local steps from θ̂(t); stores and returns Δθ_m(t) = θ_m^{τ+1} - θ̂(t).
// Throws NumericError on a non-finite gradient.
const ModelVector& local_update(DeviceState& dev, const SchemeConfig& cfg,
                                const losses::Problem& problem, std::uint64_t t);

// Quantizes Δθ_m + δ_m on each device, updates δ_m, and aggregates
// θ(t+1) = θ̂(t) + Σ_m (B_m/B) reconstruction_m in ascending device order.
// Returns the uplink bits of this round.
double uplink_step(std::span<DeviceState> devices, ServerState& server,
                   const SchemeConfig& cfg,
                   ExecutionPolicy policy = ExecutionPolicy::kSerial);

struct RoundMetrics {
  std::uint64_t round = 0;
  double global_loss = 0.0;
  std::optional<double> dist_to_opt_sq;
  double bits_down_cum = 0.0;
  double bits_up_cum = 0.0;
  double epsilon_t = 0.0;
  std::optional<double> test_accuracy;
};

// Full-participation LFL engine over one problem instance.
class Simulation {
 public:
  Simulation(const losses::Problem& problem, SchemeConfig cfg, ModelVector theta0,
             std::uint64_t seed, ExecutionPolicy policy = ExecutionPolicy::kSerial);

  // One round: broadcast, local updates on every device, uplink/aggregation.
  void step();

  const ServerState& server() const noexcept { return server_; }
  std::span<const DeviceState> devices() const noexcept { return devices_; }
  const SchemeConfig& config() const noexcept { return cfg_; }
  const theory::EpsilonEstimate& epsilon() const noexcept { return epsilon_; }
  double last_epsilon() const noexcept { return last_epsilon_; }
  // Largest stochastic-gradient norm seen on any device so far.
  losses::GradBound grad_bound() const noexcept;

  RoundMetrics metrics(const std::optional<ModelVector>& theta_star) const;

 private:
  const losses::Problem& problem_;
  SchemeConfig cfg_;
  ExecutionPolicy policy_;
  ServerState server_;
  std::vector<DeviceState> devices_;
  std::optional<transform::HadamardPlan> plan_;
  LinkCosts costs_;
  theory::EpsilonEstimate epsilon_;
  double last_epsilon_ = 0.0;
};

struct RunOptions {
  ModelVector theta0;  // empty: zeros
  std::optional<ModelVector> theta_star;
  ExecutionPolicy policy = ExecutionPolicy::kSerial;
};

struct RunResult {
  RoundMetrics initial;              // θ(0)
  std::vector<RoundMetrics> rounds;  // θ(1) .. θ(T)
  theory::EpsilonEstimate epsilon;
  losses::GradBound grad_bound;
  std::optional<std::string> error;  // set when a numeric failure cut the run short
};

RunResult run(const losses::Problem& problem, const SchemeConfig& cfg, std::size_t T,
              std::uint64_t seed, const RunOptions& options = {});

}  // namespace lfl::fed
