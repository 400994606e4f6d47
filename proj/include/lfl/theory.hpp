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

namespace lfl::theory {

// η(t): constant, or α / (t + β).
class LearningRate {
 public:
  static LearningRate constant(double eta);
  static LearningRate decaying(double alpha, double beta);

  // η(t); t < 0 evaluates at t = 0.
  double at(std::int64_t t) const noexcept;
  bool is_constant() const noexcept { return constant_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

 private:
  LearningRate(bool constant, double alpha, double beta)
      : constant_(constant), alpha_(alpha), beta_(beta) {}

  bool constant_;
  double alpha_;  // η itself for constant schedules
  double beta_;
};

// Inputs of the mean-square distance envelope.
struct BoundParams {
  double mu = 1.0;
  double L = 1.0;
  double G = 0.0;
  double gamma = 0.0;
  int tau = 1;
  LinkLevel q1;  // nullopt: lossless broadcast, quantization term vanishes
  std::size_t d = 1;
  double epsilon = 1e-3;
  LearningRate lr = LearningRate::constant(0.1);
  double theta0_dist_sq = 0.0;
};

// Largest admissible step: min{1, 1/(μτ)}.
double max_learning_rate(double mu, int tau) noexcept;

// Throws DomainError unless 0 < η(i) <= min{1, 1/(μτ)}.
void check_step(std::int64_t i, const BoundParams& p);

// A(i) = 1 - μη(i)(τ - η(i)(τ - 1)).
double a_coeff(std::int64_t i, const BoundParams& p);

// B(i) = A(i) (η(i-1) τ G / (2 q1))² ε d + η(i)² (τ² + τ - 1) G²
//        + (1 + μ(1 - η(i))) η(i)² G² τ(τ-1)(2τ-1)/6 + 2 η(i) (τ - 1) Γ,
// with η(-1) := η(0).
double b_coeff(std::int64_t i, const BoundParams& p);

// bound[0..T] via bound(t+1) = A(t) bound(t) + B(t), bound(0) = ‖θ(0) - θ*‖².
std::vector<double> bound_trajectory(const BoundParams& p, std::size_t T);

// (L/2) bound(T): envelope on E[F(θ(T))] - F*.
double loss_gap_bound(const BoundParams& p, std::size_t T);

// Closed form of the loss-gap envelope for constant η and τ = 1:
// (L/2)(1-μη)^T D0 + (L/2)((1-μη) εd/(4q1²) + 1)(1 - (1-μη)^T) ηG²/μ.
double corollary_loss_gap(const BoundParams& p, std::size_t T);
// Its T -> infinity limit.
double corollary_loss_gap_limit(const BoundParams& p);

// (max|u| - min|u|)² / ‖u‖²; 0 for the zero vector.
double epsilon_of_round(std::span<const double> update) noexcept;

class EpsilonEstimate {
 public:
  void add(double epsilon);
  void add_update(std::span<const double> update) { add(epsilon_of_round(update)); }

  const std::vector<double>& per_round() const noexcept { return values_; }
  double running_max() const noexcept { return max_; }
  double running_mean() const noexcept {
    return values_.empty() ? 0.0 : sum_ / static_cast<double>(values_.size());
  }

 private:
  std::vector<double> values_;
  double max_ = 0.0;
  double sum_ = 0.0;
};

struct AsymptoticReport {
  bool passed = false;
  bool eventually_decreasing = false;
  std::size_t peak_round = 0;
  double peak_value = 0.0;
  double final_ratio = 0.0;  // bound(T) / bound(0)
};

// Checks that the envelope peaks and then never increases, and that
// bound(T) < threshold * bound(0). Refuses (DomainError) schedules that do
// not vanish.
AsymptoticReport asymptotic_check(const BoundParams& p, std::size_t T,
                                  double threshold = 0.05);

}  // namespace lfl::theory
