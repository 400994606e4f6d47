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

#include "lfl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lfl::theory {

LearningRate LearningRate::constant(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw DomainError("learning rate must be positive and finite");
  }
  return {true, eta, 0.0};
}

LearningRate LearningRate::decaying(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw DomainError("decaying schedule needs alpha > 0 and beta > 0");
  }
  return {false, alpha, beta};
}

double LearningRate::at(std::int64_t t) const noexcept {
  if (constant_) return alpha_;
  const double step = static_cast<double>(std::max<std::int64_t>(t, 0));
  return alpha_ / (step + beta_);
}

double max_learning_rate(double mu, int tau) noexcept {
  return std::min(1.0, 1.0 / (mu * static_cast<double>(tau)));
}

void check_step(std::int64_t i, const BoundParams& p) {
  if (p.tau < 1) throw DomainError("tau must be >= 1");
  if (!(p.mu > 0.0)) throw DomainError("mu must be positive");
  const double eta = p.lr.at(i);
  const double cap = max_learning_rate(p.mu, p.tau);
  if (!(eta > 0.0) || eta > cap * (1.0 + 1e-12)) {
    throw DomainError("eta(" + std::to_string(i) + ") = " + std::to_string(eta) +
                      " outside (0, min{1, 1/(mu tau)}] = (0, " + std::to_string(cap) + "]");
  }
}

double a_coeff(std::int64_t i, const BoundParams& p) {
  check_step(i, p);
  const double eta = p.lr.at(i);
  const double tau = static_cast<double>(p.tau);
  return 1.0 - p.mu * eta * (tau - eta * (tau - 1.0));
}

double b_coeff(std::int64_t i, const BoundParams& p) {
  const double a = a_coeff(i, p);
  const double eta = p.lr.at(i);
  const double eta_prev = p.lr.at(i - 1);
  const double tau = static_cast<double>(p.tau);
  const double g2 = p.G * p.G;

  double quantization = 0.0;
  if (p.q1) {
    const double spread = eta_prev * tau * p.G / (2.0 * static_cast<double>(p.q1->value()));
    quantization = a * spread * spread * p.epsilon * static_cast<double>(p.d);
  }
  const double local_noise = eta * eta * (tau * tau + tau - 1.0) * g2;
  const double drift = (1.0 + p.mu * (1.0 - eta)) * eta * eta * g2 * tau * (tau - 1.0) *
                       (2.0 * tau - 1.0) / 6.0;
  const double heterogeneity = 2.0 * eta * (tau - 1.0) * p.gamma;
  return quantization + local_noise + drift + heterogeneity;
}

std::vector<double> bound_trajectory(const BoundParams& p, std::size_t T) {
  if (T == 0) throw DomainError("bound_trajectory: T must be >= 1");
  std::vector<double> bound(T + 1);
  bound[0] = p.theta0_dist_sq;
  for (std::size_t t = 0; t < T; ++t) {
    const auto i = static_cast<std::int64_t>(t);
    bound[t + 1] = a_coeff(i, p) * bound[t] + b_coeff(i, p);
  }
  return bound;
}

double loss_gap_bound(const BoundParams& p, std::size_t T) {
  return 0.5 * p.L * bound_trajectory(p, T).back();
}

namespace {

void require_corollary_setting(const BoundParams& p) {
  if (p.tau != 1 || !p.lr.is_constant()) {
    throw DomainError("closed form needs tau = 1 and a constant learning rate");
  }
  check_step(0, p);
}

double quantization_factor(const BoundParams& p, double contraction) {
  if (!p.q1) return 1.0;
  const double q = static_cast<double>(p.q1->value());
  return contraction * (p.epsilon * static_cast<double>(p.d) / (4.0 * q * q)) + 1.0;
}

}  // namespace

double corollary_loss_gap(const BoundParams& p, std::size_t T) {
  require_corollary_setting(p);
  const double eta = p.lr.at(0);
  const double contraction = 1.0 - p.mu * eta;
  const double decay = std::pow(contraction, static_cast<double>(T));
  return 0.5 * p.L * decay * p.theta0_dist_sq +
         0.5 * p.L * quantization_factor(p, contraction) * (1.0 - decay) *
             (eta * p.G * p.G / p.mu);
}

double corollary_loss_gap_limit(const BoundParams& p) {
  require_corollary_setting(p);
  const double eta = p.lr.at(0);
  const double contraction = 1.0 - p.mu * eta;
  return 0.5 * p.L * quantization_factor(p, contraction) * (eta * p.G * p.G / p.mu);
}

double epsilon_of_round(std::span<const double> update) noexcept {
  if (update.empty()) return 0.0;
  double hi = 0.0;
  double lo = std::abs(update[0]);
  double norm2 = 0.0;
  for (double v : update) {
    const double a = std::abs(v);
    hi = std::max(hi, a);
    lo = std::min(lo, a);
    norm2 += v * v;
  }
  if (norm2 == 0.0) return 0.0;
  const double spread = hi - lo;
  // (hi - lo)² <= hi² <= ‖u‖² mathematically; clamp the rounding excess.
  return std::min(1.0, spread * spread / norm2);
}

void EpsilonEstimate::add(double epsilon) {
  values_.push_back(epsilon);
  max_ = std::max(max_, epsilon);
  sum_ += epsilon;
}

AsymptoticReport asymptotic_check(const BoundParams& p, std::size_t T, double threshold) {
  if (p.lr.is_constant()) {
    throw DomainError("asymptotic check needs a learning rate that vanishes as t grows");
  }
  const auto bound = bound_trajectory(p, T);
  AsymptoticReport report;
  const auto peak = std::max_element(bound.begin(), bound.end());
  report.peak_round = static_cast<std::size_t>(peak - bound.begin());
  report.peak_value = *peak;
  report.eventually_decreasing = true;
  for (std::size_t t = report.peak_round; t + 1 < bound.size(); ++t) {
    if (bound[t + 1] > bound[t] * (1.0 + 1e-12)) {
      report.eventually_decreasing = false;
      break;
    }
  }
  report.final_ratio = bound[0] > 0.0 ? bound.back() / bound[0] : 0.0;
  report.passed = report.eventually_decreasing && bound.back() < threshold * bound[0];
  return report;
}

}  // namespace lfl::theory
