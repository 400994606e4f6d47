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

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lfl/data.hpp"
#include "lfl/types.hpp"

namespace lfl::losses {

// θ*, F*, the per-device minima F_m* and the heterogeneity gap
// Γ = F* - Σ_m (B_m/B) F_m*.
struct OptimalityInfo {
  ModelVector theta_star;
  double f_star = 0.0;
  std::vector<double> device_f_star;
  double gamma = 0.0;
  // ‖∇F(θ*)‖ reached by the solver; 0 for closed forms.
  double gradient_norm = 0.0;
};

struct Smoothness {
  double mu = 0.0;
  double L = 0.0;
};

// Running max of observed stochastic-gradient norms.
struct GradBound {
  double G = 0.0;
  void observe(double norm) noexcept {
    if (norm > G) G = norm;
  }
  void merge(const GradBound& other) noexcept { observe(other.G); }
};

// F(θ) = Σ_m (B_m/B) F_m(θ), with per-device sample shards.
//
// Implementations are immutable after construction and all methods are
// reentrant, so devices may evaluate gradients concurrently.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_devices() const = 0;
  virtual std::size_t shard_size(std::size_t m) const = 0;
  // B_m / B; sums to one over devices.
  virtual double weight(std::size_t m) const = 0;

  // Mean of per-sample gradients of device m's loss over `batch` (indices
  // into the shard, repeats allowed). Empty batches are rejected.
  virtual void gradient(std::size_t m, std::span<const double> theta,
                        std::span<const std::size_t> batch,
                        std::span<double> out) const = 0;
  virtual double device_loss(std::size_t m, std::span<const double> theta) const = 0;

  virtual OptimalityInfo solve_optimum() const = 0;
  virtual Smoothness estimate_smoothness() const = 0;

  // Held-out classification accuracy, when the problem has a test split.
  virtual std::optional<double> test_accuracy(std::span<const double>) const {
    return std::nullopt;
  }

  double global_loss(std::span<const double> theta) const;
  void full_gradient(std::size_t m, std::span<const double> theta,
                     std::span<double> out) const;

 protected:
  void check_batch(std::size_t m, std::span<const std::size_t> batch) const;
};

// One device of a quadratic problem: f(θ, u) = ½ (θ - u)ᵀ A (θ - u) for each
// sample center u, so F_m(θ) = ½ (θ - c_m)ᵀ A (θ - c_m) + const with c_m the
// sample mean.
struct QuadraticDevice {
  Eigen::MatrixXd A;
  std::vector<ModelVector> samples;
};

class QuadraticProblem final : public Problem {
 public:
  // Empty weights means B_m / B from the sample counts.
  explicit QuadraticProblem(std::vector<QuadraticDevice> devices,
                            std::vector<double> weights = {});

  std::size_t dim() const override { return dim_; }
  std::size_t num_devices() const override { return devices_.size(); }
  std::size_t shard_size(std::size_t m) const override {
    return devices_[m].samples.size();
  }
  double weight(std::size_t m) const override { return weights_[m]; }

  void gradient(std::size_t m, std::span<const double> theta,
                std::span<const std::size_t> batch,
                std::span<double> out) const override;
  double device_loss(std::size_t m, std::span<const double> theta) const override;

  OptimalityInfo solve_optimum() const override;
  Smoothness estimate_smoothness() const override;

  const QuadraticDevice& device(std::size_t m) const { return devices_[m]; }
  const ModelVector& center(std::size_t m) const { return centers_[m]; }

 private:
  std::size_t dim_;
  std::vector<QuadraticDevice> devices_;
  std::vector<double> weights_;
  std::vector<ModelVector> centers_;
  std::vector<double> center_spread_;  // F_m(c_m)
  std::vector<Smoothness> eig_range_;
};

struct QuadraticSpec {
  std::size_t num_devices = 10;
  std::size_t dim = 20;
  double mu = 1.0;
  double L = 5.0;
  // Shared center mean ~ N(0, center_scale² I); device offsets
  // ~ N(0, heterogeneity² I).
  double center_scale = 1.0;
  double heterogeneity = 0.1;
  std::size_t samples_per_device = 1;
  double sample_noise = 0.0;
  std::uint64_t seed = 1;
};

// Random orthogonal basis times eigenvalues uniform in [mu, L]; device 0
// always carries both mu and L so the declared constants are tight.
QuadraticProblem make_quadratic(const QuadraticSpec& spec);

// L2-regularized logistic regression. Two classes use the sigmoid model with
// θ in R^p; more classes use softmax with θ in R^{K p} (row k = class k).
// Each device loss is (1/B_m) Σ f(θ, u) + (λ/2) ‖θ‖².
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(std::vector<data::Dataset> shards, int num_classes,
                  double lambda_reg,
                  std::optional<data::Dataset> test_set = std::nullopt);

  std::size_t dim() const override { return dim_; }
  std::size_t num_devices() const override { return shards_.size(); }
  std::size_t shard_size(std::size_t m) const override { return shards_[m].size(); }
  double weight(std::size_t m) const override { return weights_[m]; }

  void gradient(std::size_t m, std::span<const double> theta,
                std::span<const std::size_t> batch,
                std::span<double> out) const override;
  double device_loss(std::size_t m, std::span<const double> theta) const override;

  OptimalityInfo solve_optimum() const override;
  // mu = λ, L = λ + c max_m λ_max(X_mᵀ X_m / B_m), c = 1/4 (sigmoid) or
  // 1/2 (softmax).
  Smoothness estimate_smoothness() const override;
  std::optional<double> test_accuracy(std::span<const double> theta) const override;

  int num_classes() const noexcept { return classes_; }
  std::size_t num_features() const noexcept { return features_; }
  double lambda_reg() const noexcept { return lambda_; }
  const data::Dataset& shard(std::size_t m) const { return shards_[m]; }

  // Loss and gradient of a single sample (without the regularizer).
  double sample_loss(std::span<const double> theta, std::span<const double> x,
                     int label) const;
  void add_sample_gradient(std::span<const double> theta, std::span<const double> x,
                           int label, double scale, std::span<double> out) const;

 private:
  // Minimizes Σ_m w_m F_m with Newton steps (small d) or Nesterov
  // acceleration (large d).
  ModelVector minimize(std::span<const double> weights, double& grad_norm) const;
  double weighted_loss(std::span<const double> weights, std::span<const double> theta) const;
  void weighted_gradient(std::span<const double> weights, std::span<const double> theta,
                         std::span<double> out) const;
  Eigen::MatrixXd weighted_hessian(std::span<const double> weights,
                                   std::span<const double> theta) const;

  std::vector<data::Dataset> shards_;
  int classes_;
  double lambda_;
  std::optional<data::Dataset> test_;
  std::size_t features_;
  std::size_t dim_;
  std::vector<double> weights_;
};

struct LogisticSpec {
  std::size_t num_devices = 10;
  int num_classes = 10;
  std::size_t num_features = 10;  // before the bias column
  std::size_t samples_per_class = 100;
  std::size_t test_per_class = 20;
  // Class means ~ N(0, separation² I); samples add N(0, I) noise.
  double separation = 1.0;
  double lambda_reg = 0.01;
  data::PartitionMode partition = data::PartitionMode::kNonIidLabelSorted;
  std::uint64_t seed = 1;
};

LogisticProblem make_logistic(const LogisticSpec& spec);

// Partitions `train` over devices; rows are used as-is (add a bias column
// beforehand if wanted).
LogisticProblem make_logistic(const data::Dataset& train,
                              std::optional<data::Dataset> test,
                              std::size_t num_devices, data::PartitionMode mode,
                              int num_classes, double lambda_reg, std::uint64_t seed);

// Largest eigenvalue of XᵀX / rows for row-major X, by power iteration.
double gram_max_eigenvalue(std::span<const double> features, std::size_t rows,
                           std::size_t cols, std::uint64_t seed = 7);

}  // namespace lfl::losses
