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

#include "lfl/fedcore.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "lfl/error.hpp"

namespace lfl::fed {

namespace {

bool is_quantized_downlink(const SchemeConfig& cfg) {
  return cfg.q1.has_value() && cfg.scheme != Scheme::kLb &&
         cfg.scheme != Scheme::kLossless;
}

void copy_into(std::span<const double> from, ModelVector& to) {
  to.assign(from.begin(), from.end());
}

// Runs body(m) for every device, in parallel when asked, rethrowing the
// first failure by device id.
template <typename Body>
void for_each_device(std::size_t count, ExecutionPolicy policy, Body&& body) {
  if (policy == ExecutionPolicy::kSerial) {
    for (std::size_t m = 0; m < count; ++m) body(m);
    return;
  }
  std::vector<std::exception_ptr> failures(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t m = 0; m < n; ++m) {
    try {
      body(static_cast<std::size_t>(m));
    } catch (...) {
      failures[static_cast<std::size_t>(m)] = std::current_exception();
    }
  }
  for (auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
}

}  // namespace

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kLfl: return "LFL";
    case Scheme::kLb: return "LB";
    case Scheme::kLgm: return "LGM";
    case Scheme::kLtgm: return "LTGM";
    case Scheme::kLossless: return "LOSSLESS";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::kLfl, Scheme::kLb, Scheme::kLgm, Scheme::kLtgm,
                   Scheme::kLossless}) {
    if (to_string(s) == name) return s;
  }
  throw StructuralError("unknown scheme '" + name + "'");
}

void SchemeConfig::validate() const {
  if (tau < 1) throw StructuralError("tau must be >= 1");
  if (scheme == Scheme::kLossless && (q1 || q2)) {
    throw StructuralError("LOSSLESS requires q1 = q2 = inf");
  }
  if (scheme == Scheme::kLb && q1) throw StructuralError("LB requires q1 = inf");
}

LinkCosts per_round_costs(const SchemeConfig& cfg, std::size_t d, std::size_t num_devices) {
  LinkCosts costs;
  const double lossless = quant::kLosslessBitsPerEntry * static_cast<double>(d);
  if (is_quantized_downlink(cfg)) {
    const std::size_t effective =
        cfg.scheme == Scheme::kLtgm ? transform::next_power_of_two(d) : d;
    costs.down_per_round = quant::bit_cost(effective, *cfg.q1).formula_bits;
  } else {
    costs.down_per_round = lossless;
  }
  const double per_device = cfg.q2 ? quant::bit_cost(d, *cfg.q2).formula_bits : lossless;
  costs.up_per_round = per_device * static_cast<double>(num_devices);
  return costs;
}

BroadcastOutcome broadcast_step(ServerState& server, std::span<DeviceState> devices,
                                const SchemeConfig& cfg,
                                const transform::HadamardPlan* plan,
                                ExecutionPolicy policy) {
  for (const auto& dev : devices) {
    if (dev.theta_hat != server.theta_hat_mirror) {
      throw StructuralError("broadcast_step: device " + std::to_string(dev.id) +
                            " is out of sync with the PS mirror");
    }
  }
  const std::size_t d = server.theta.size();
  ModelVector& mirror = server.theta_hat_mirror;

  ModelVector update(d);
  for (std::size_t i = 0; i < d; ++i) update[i] = server.theta[i] - mirror[i];
  BroadcastOutcome outcome;
  outcome.epsilon = theory::epsilon_of_round(update);

  if (!is_quantized_downlink(cfg)) {
    mirror = server.theta;
    outcome.bits = quant::kLosslessBitsPerEntry * static_cast<double>(d);
  } else {
    const QuantLevel q1 = *cfg.q1;
    switch (cfg.scheme) {
      case Scheme::kLfl: {
        quant::quantize_into(update, q1, server.rng, server.message, policy);
        for (std::size_t i = 0; i < d; ++i) {
          mirror[i] += quant::reconstruct_entry(server.message, i);
        }
        outcome.bits = quant::bit_cost(d, q1).formula_bits;
        break;
      }
      case Scheme::kLgm: {
        if (server.lgm_error.size() != d) server.lgm_error.assign(d, 0.0);
        ModelVector target(d);
        for (std::size_t i = 0; i < d; ++i) target[i] = server.theta[i] + server.lgm_error[i];
        quant::quantize_into(target, q1, server.rng, server.message, policy);
        for (std::size_t i = 0; i < d; ++i) {
          mirror[i] = quant::reconstruct_entry(server.message, i);
          server.lgm_error[i] = target[i] - mirror[i];
        }
        outcome.bits = quant::bit_cost(d, q1).formula_bits;
        break;
      }
      case Scheme::kLtgm: {
        if (plan == nullptr || plan->padded_from() != d) {
          throw StructuralError("broadcast_step: LTGM needs a Hadamard plan for d");
        }
        const ModelVector projected = transform::forward(server.theta, *plan, policy);
        quant::quantize_into(projected, q1, server.rng, server.message, policy);
        mirror = transform::inverse(quant::reconstruct(server.message), *plan, policy);
        outcome.bits = quant::bit_cost(plan->size(), q1).formula_bits;
        break;
      }
      case Scheme::kLb:
      case Scheme::kLossless:
        break;
    }
  }

  for (auto& dev : devices) dev.theta_hat = mirror;
  return outcome;
}

const ModelVector& local_update(DeviceState& dev, const SchemeConfig& cfg,
                                const losses::Problem& problem, std::uint64_t t) {
  const std::size_t d = dev.theta_hat.size();
  const std::size_t m = dev.id;
  const double eta = cfg.lr.at(static_cast<std::int64_t>(t));
  const std::size_t shard = problem.shard_size(m);

  copy_into(dev.theta_hat, dev.local);
  dev.grad.resize(d);
  dev.grad_sum.assign(d, 0.0);
  if (cfg.batch_size == 0) {
    if (dev.batch.size() != shard) {
      dev.batch.resize(shard);
      std::iota(dev.batch.begin(), dev.batch.end(), std::size_t{0});
    }
  } else {
    dev.batch.resize(cfg.batch_size);
  }
  if (cfg.optimizer == LocalOptimizer::kAdam && dev.adam.first.size() != d) {
    dev.adam.first.assign(d, 0.0);
    dev.adam.second.assign(d, 0.0);
  }

  for (int step = 0; step < cfg.tau; ++step) {
    if (cfg.batch_size != 0) {
      for (auto& j : dev.batch) j = static_cast<std::size_t>(dev.rng.uniform_index(shard));
    }
    problem.gradient(m, dev.local, dev.batch, dev.grad);
    if (!all_finite(dev.grad)) {
      throw NumericError("non-finite gradient on device " + std::to_string(m) +
                         " in round " + std::to_string(t) + ", local step " +
                         std::to_string(step + 1));
    }
    dev.grad_bound.observe(std::sqrt(squared_norm(dev.grad)));
    for (std::size_t i = 0; i < d; ++i) dev.grad_sum[i] += dev.grad[i];

    if (cfg.optimizer == LocalOptimizer::kSgd) {
      for (std::size_t i = 0; i < d; ++i) dev.local[i] -= eta * dev.grad[i];
    } else {
      auto& adam = dev.adam;
      ++adam.steps;
      const double b1 = cfg.adam.beta1;
      const double b2 = cfg.adam.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.steps));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.steps));
      for (std::size_t i = 0; i < d; ++i) {
        const double g = dev.grad[i];
        adam.first[i] = b1 * adam.first[i] + (1.0 - b1) * g;
        adam.second[i] = b2 * adam.second[i] + (1.0 - b2) * g * g;
        const double mhat = adam.first[i] / c1;
        const double vhat = adam.second[i] / c2;
        dev.local[i] -= eta * mhat / (std::sqrt(vhat) + cfg.adam.epsilon);
      }
    }
  }

  dev.update.resize(d);
  for (std::size_t i = 0; i < d; ++i) dev.update[i] = dev.local[i] - dev.theta_hat[i];
  return dev.update;
}

double uplink_step(std::span<DeviceState> devices, ServerState& server,
                   const SchemeConfig& cfg, ExecutionPolicy policy) {
  const std::size_t d = server.theta.size();
  double bits = 0.0;

  for_each_device(devices.size(), policy, [&](std::size_t m) {
    DeviceState& dev = devices[m];
    ModelVector corrected(d);
    for (std::size_t i = 0; i < d; ++i) corrected[i] = dev.update[i] + dev.delta[i];
    dev.sent.resize(d);
    if (cfg.q2) {
      // Device-level parallelism already covers the cores.
      quant::quantize_into(corrected, *cfg.q2, dev.rng, dev.message,
                           ExecutionPolicy::kSerial);
      quant::reconstruct_into(dev.message, dev.sent);
    } else {
      dev.sent = corrected;
    }
    for (std::size_t i = 0; i < d; ++i) dev.delta[i] = corrected[i] - dev.sent[i];
  });

  ModelVector aggregate(d, 0.0);
  for (const auto& dev : devices) {
    for (std::size_t i = 0; i < d; ++i) aggregate[i] += dev.weight * dev.sent[i];
    bits += cfg.q2 ? quant::bit_cost(d, *cfg.q2).formula_bits
                   : quant::kLosslessBitsPerEntry * static_cast<double>(d);
  }
  for (std::size_t i = 0; i < d; ++i) {
    server.theta[i] = server.theta_hat_mirror[i] + aggregate[i];
  }
  if (!all_finite(server.theta)) {
    throw NumericError("global model became non-finite in round " +
                       std::to_string(server.round));
  }
  return bits;
}

Simulation::Simulation(const losses::Problem& problem, SchemeConfig cfg,
                       ModelVector theta0, std::uint64_t seed, ExecutionPolicy policy)
    : problem_(problem), cfg_(std::move(cfg)), policy_(policy) {
  cfg_.validate();
  const std::size_t d = problem.dim();
  if (theta0.empty()) theta0.assign(d, 0.0);
  if (theta0.size() != d) throw StructuralError("theta0 has the wrong dimension");
  if (!all_finite(theta0)) throw DomainError("theta0 must be finite");

  double weight_sum = 0.0;
  for (std::size_t m = 0; m < problem.num_devices(); ++m) weight_sum += problem.weight(m);
  if (std::abs(weight_sum - 1.0) > 1e-12) {
    throw StructuralError("device weights must sum to one");
  }

  server_.theta = theta0;
  server_.theta_hat_mirror = theta0;  // θ̂(-1) := θ(0)
  server_.lgm_error.assign(d, 0.0);
  server_.rng = RngStream(seed, 0);
  devices_.resize(problem.num_devices());
  for (std::size_t m = 0; m < devices_.size(); ++m) {
    DeviceState& dev = devices_[m];
    dev.id = m;
    dev.theta_hat = theta0;
    dev.delta.assign(d, 0.0);
    dev.weight = problem.weight(m);
    dev.rng = RngStream(seed, m + 1);
  }
  if (cfg_.scheme == Scheme::kLtgm) {
    plan_.emplace(d, cfg_.ltgm_randomize_signs, cfg_.ltgm_sign_seed);
  }
  costs_ = per_round_costs(cfg_, d, devices_.size());
}

losses::GradBound Simulation::grad_bound() const noexcept {
  losses::GradBound g;
  for (const auto& dev : devices_) g.merge(dev.grad_bound);
  return g;
}

void Simulation::step() {
  const std::uint64_t t = server_.round;
  if (cfg_.lr_cap_mu) {
    const double cap = theory::max_learning_rate(*cfg_.lr_cap_mu, cfg_.tau);
    const double eta = cfg_.lr.at(static_cast<std::int64_t>(t));
    if (eta > cap * (1.0 + 1e-12)) {
      throw DomainError("eta(" + std::to_string(t) + ") = " + std::to_string(eta) +
                        " exceeds min{1, 1/(mu tau)} = " + std::to_string(cap));
    }
  }

  const BroadcastOutcome down = broadcast_step(
      server_, devices_, cfg_, plan_ ? &*plan_ : nullptr, policy_);
  last_epsilon_ = down.epsilon;
  epsilon_.add(down.epsilon);

  for_each_device(devices_.size(), policy_, [&](std::size_t m) {
    local_update(devices_[m], cfg_, problem_, t);
  });
  uplink_step(devices_, server_, cfg_, policy_);

  ++server_.round;
  // Products of the constant per-round costs keep the counters exact.
  server_.bits_down_cum = static_cast<double>(server_.round) * costs_.down_per_round;
  server_.bits_up_cum = static_cast<double>(server_.round) * costs_.up_per_round;
}

RoundMetrics Simulation::metrics(const std::optional<ModelVector>& theta_star) const {
  RoundMetrics out;
  out.round = server_.round;
  out.global_loss = problem_.global_loss(server_.theta);
  if (theta_star) out.dist_to_opt_sq = squared_distance(server_.theta, *theta_star);
  out.bits_down_cum = server_.bits_down_cum;
  out.bits_up_cum = server_.bits_up_cum;
  out.epsilon_t = server_.round == 0 ? 0.0 : last_epsilon_;
  out.test_accuracy = problem_.test_accuracy(server_.theta);
  return out;
}

RunResult run(const losses::Problem& problem, const SchemeConfig& cfg, std::size_t T,
              std::uint64_t seed, const RunOptions& options) {
  if (T == 0) throw StructuralError("run: T must be >= 1");
  Simulation sim(problem, cfg, options.theta0, seed, options.policy);
  RunResult result;
  result.initial = sim.metrics(options.theta_star);
  result.rounds.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    try {
      sim.step();
      auto m = sim.metrics(options.theta_star);
      if (!std::isfinite(m.global_loss)) {
        throw NumericError("global loss became non-finite in round " + std::to_string(m.round));
      }
      result.rounds.push_back(std::move(m));
    } catch (const NumericError& e) {
      result.error = e.what();
      break;
    }
  }
  result.epsilon = sim.epsilon();
  result.grad_bound = sim.grad_bound();
  return result;
}

}  // namespace lfl::fed
