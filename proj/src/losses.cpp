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

#include "lfl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "lfl/error.hpp"
#include "lfl/rng.hpp"

namespace lfl::losses {

namespace {

using ConstMap = Eigen::Map<const Eigen::VectorXd>;
using Map = Eigen::Map<Eigen::VectorXd>;

constexpr double kMaxCondition = 1e12;
constexpr double kSolveTolerance = 1e-10;
constexpr std::size_t kNewtonMaxDim = 600;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

std::vector<double> normalized(std::vector<double> w) {
  double total = 0.0;
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw StructuralError("device weights must be positive and finite");
    }
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> sample_count_weights(const std::vector<std::size_t>& counts) {
  std::vector<double> w(counts.begin(), counts.end());
  return normalized(std::move(w));
}

}  // namespace

// ---------------------------------------------------------------------------
// Problem

double Problem::global_loss(std::span<const double> theta) const {
  double total = 0.0;
  for (std::size_t m = 0; m < num_devices(); ++m) {
    total += weight(m) * device_loss(m, theta);
  }
  return total;
}

void Problem::full_gradient(std::size_t m, std::span<const double> theta,
                            std::span<double> out) const {
  std::vector<std::size_t> all(shard_size(m));
  std::iota(all.begin(), all.end(), std::size_t{0});
  gradient(m, theta, all, out);
}

void Problem::check_batch(std::size_t m, std::span<const std::size_t> batch) const {
  if (m >= num_devices()) throw StructuralError("device index out of range");
  if (batch.empty()) throw StructuralError("gradient: empty mini-batch");
  const std::size_t limit = shard_size(m);
  for (std::size_t j : batch) {
    if (j >= limit) {
      throw StructuralError("gradient: sample " + std::to_string(j) +
                            " not in shard of device " + std::to_string(m));
    }
  }
}

// ---------------------------------------------------------------------------
// QuadraticProblem

QuadraticProblem::QuadraticProblem(std::vector<QuadraticDevice> devices,
                                   std::vector<double> weights)
    : dim_(devices.empty() ? 0 : static_cast<std::size_t>(devices[0].A.rows())),
      devices_(std::move(devices)) {
  if (devices_.empty()) throw StructuralError("quadratic problem needs devices");
  if (dim_ == 0) throw StructuralError("quadratic problem needs d >= 1");

  std::vector<std::size_t> counts;
  for (const auto& dev : devices_) {
    if (static_cast<std::size_t>(dev.A.rows()) != dim_ ||
        static_cast<std::size_t>(dev.A.cols()) != dim_) {
      throw StructuralError("quadratic device matrix must be d x d");
    }
    if ((dev.A - dev.A.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, dev.A.cwiseAbs().maxCoeff())) {
      throw StructuralError("quadratic device matrix must be symmetric");
    }
    if (dev.samples.empty()) throw StructuralError("quadratic device needs samples");
    for (const auto& u : dev.samples) {
      if (u.size() != dim_) throw StructuralError("sample center has wrong length");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dev.A, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) throw StructuralError("quadratic device matrix must be positive definite");
    eig_range_.push_back({lo, hi});
    counts.push_back(dev.samples.size());
  }

  if (weights.empty()) {
    weights_ = sample_count_weights(counts);
  } else {
    if (weights.size() != devices_.size()) {
      throw StructuralError("one weight per device required");
    }
    weights_ = normalized(std::move(weights));
  }

  for (const auto& dev : devices_) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& u : dev.samples) c += ConstMap(u.data(), u.size());
    c /= static_cast<double>(dev.samples.size());
    double spread = 0.0;
    for (const auto& u : dev.samples) {
      const Eigen::VectorXd diff = ConstMap(u.data(), u.size()) - c;
      spread += 0.5 * diff.dot(dev.A * diff);
    }
    center_spread_.push_back(spread / static_cast<double>(dev.samples.size()));
    centers_.emplace_back(c.data(), c.data() + c.size());
  }
}

void QuadraticProblem::gradient(std::size_t m, std::span<const double> theta,
                                std::span<const std::size_t> batch,
                                std::span<double> out) const {
  check_batch(m, batch);
  const auto& dev = devices_[m];
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t j : batch) {
    mean += ConstMap(dev.samples[j].data(), static_cast<Eigen::Index>(dim_));
  }
  mean /= static_cast<double>(batch.size());
  Map(out.data(), static_cast<Eigen::Index>(dim_)) =
      dev.A * (ConstMap(theta.data(), static_cast<Eigen::Index>(dim_)) - mean);
}

double QuadraticProblem::device_loss(std::size_t m, std::span<const double> theta) const {
  const Eigen::VectorXd diff =
      ConstMap(theta.data(), static_cast<Eigen::Index>(dim_)) -
      ConstMap(centers_[m].data(), static_cast<Eigen::Index>(dim_));
  return 0.5 * diff.dot(devices_[m].A * diff) + center_spread_[m];
}

OptimalityInfo QuadraticProblem::solve_optimum() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (std::size_t m = 0; m < devices_.size(); ++m) {
    H += weights_[m] * devices_[m].A;
    b += weights_[m] * (devices_[m].A * ConstMap(centers_[m].data(), n));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
  const double condition = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
  if (!(condition <= kMaxCondition)) {
    throw DomainError("solve_optimum: condition number " + std::to_string(condition) +
                      " exceeds 1e12");
  }
  const Eigen::VectorXd star = H.ldlt().solve(b);

  OptimalityInfo info;
  info.theta_star.assign(star.data(), star.data() + star.size());
  info.f_star = global_loss(info.theta_star);
  info.device_f_star = center_spread_;
  // Γ = Σ_m w_m (F_m(θ*) - F_m*), each term a nonnegative quadratic form.
  for (std::size_t m = 0; m < devices_.size(); ++m) {
    const Eigen::VectorXd diff = star - ConstMap(centers_[m].data(), n);
    info.gamma += weights_[m] * 0.5 * diff.dot(devices_[m].A * diff);
  }
  return info;
}

Smoothness QuadraticProblem::estimate_smoothness() const {
  Smoothness s{eig_range_[0].mu, eig_range_[0].L};
  for (const auto& r : eig_range_) {
    s.mu = std::min(s.mu, r.mu);
    s.L = std::max(s.L, r.L);
  }
  return s;
}

QuadraticProblem make_quadratic(const QuadraticSpec& spec) {
  if (spec.num_devices == 0 || spec.dim == 0) {
    throw StructuralError("make_quadratic: M and d must be >= 1");
  }
  if (!(spec.mu > 0.0 && spec.L >= spec.mu)) {
    throw DomainError("make_quadratic: need 0 < mu <= L");
  }
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.dim);

  ModelVector center_mean(spec.dim);
  for (double& v : center_mean) v = spec.center_scale * normal(gen);

  std::vector<QuadraticDevice> devices;
  for (std::size_t m = 0; m < spec.num_devices; ++m) {
    Eigen::MatrixXd gauss(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) gauss(i, j) = normal(gen);
    }
    const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
    Eigen::VectorXd eigenvalues(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      eigenvalues(i) = spec.mu + (spec.L - spec.mu) * unit(gen);
    }
    if (m == 0) {
      eigenvalues(0) = spec.mu;
      if (d > 1) eigenvalues(1) = spec.L;
    } else if (m == 1 && d == 1) {
      eigenvalues(0) = spec.L;
    }
    Eigen::MatrixXd A = basis * eigenvalues.asDiagonal() * basis.transpose();
    A = 0.5 * (A + A.transpose()).eval();

    ModelVector center(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i) {
      center[i] = center_mean[i] + spec.heterogeneity * normal(gen);
    }
    QuadraticDevice dev{std::move(A), {}};
    for (std::size_t j = 0; j < std::max<std::size_t>(1, spec.samples_per_device); ++j) {
      ModelVector u = center;
      if (spec.sample_noise > 0.0) {
        for (double& v : u) v += spec.sample_noise * normal(gen);
      }
      dev.samples.push_back(std::move(u));
    }
    devices.push_back(std::move(dev));
  }
  return QuadraticProblem(std::move(devices));
}

// ---------------------------------------------------------------------------
// LogisticProblem

LogisticProblem::LogisticProblem(std::vector<data::Dataset> shards, int num_classes,
                                 double lambda_reg, std::optional<data::Dataset> test_set)
    : shards_(std::move(shards)),
      classes_(num_classes),
      lambda_(lambda_reg),
      test_(std::move(test_set)),
      features_(shards_.empty() ? 0 : shards_[0].num_features) {
  if (shards_.empty()) throw StructuralError("logistic problem needs shards");
  if (classes_ < 2) throw StructuralError("logistic problem needs >= 2 classes");
  if (!(lambda_ > 0.0)) throw DomainError("logistic problem needs lambda_reg > 0");
  if (features_ == 0) throw StructuralError("logistic problem needs features");
  std::vector<std::size_t> counts;
  auto check = [&](const data::Dataset& ds) {
    if (ds.num_features != features_) throw StructuralError("shard feature count mismatch");
    for (int y : ds.labels) {
      if (y < 0 || y >= classes_) throw StructuralError("label out of range");
    }
  };
  for (const auto& s : shards_) {
    if (s.size() == 0) throw StructuralError("empty shard");
    check(s);
    counts.push_back(s.size());
  }
  if (test_) check(*test_);
  dim_ = classes_ == 2 ? features_ : static_cast<std::size_t>(classes_) * features_;
  weights_ = sample_count_weights(counts);
}

double LogisticProblem::sample_loss(std::span<const double> theta,
                                    std::span<const double> x, int label) const {
  if (classes_ == 2) {
    const double y = label == 1 ? 1.0 : -1.0;
    return softplus(-y * dot(theta, x));
  }
  double peak = -INFINITY;
  std::vector<double> logits(static_cast<std::size_t>(classes_));
  for (int k = 0; k < classes_; ++k) {
    logits[k] = dot(theta.subspan(k * features_, features_), x);
    peak = std::max(peak, logits[k]);
  }
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  return peak + std::log(sum) - logits[label];
}

void LogisticProblem::add_sample_gradient(std::span<const double> theta,
                                          std::span<const double> x, int label,
                                          double scale, std::span<double> out) const {
  if (classes_ == 2) {
    const double y = label == 1 ? 1.0 : -1.0;
    const double coeff = -y * sigmoid(-y * dot(theta, x)) * scale;
    for (std::size_t a = 0; a < features_; ++a) out[a] += coeff * x[a];
    return;
  }
  std::vector<double> prob(static_cast<std::size_t>(classes_));
  double peak = -INFINITY;
  for (int k = 0; k < classes_; ++k) {
    prob[k] = dot(theta.subspan(k * features_, features_), x);
    peak = std::max(peak, prob[k]);
  }
  double sum = 0.0;
  for (double& p : prob) {
    p = std::exp(p - peak);
    sum += p;
  }
  for (int k = 0; k < classes_; ++k) {
    const double coeff = (prob[k] / sum - (k == label ? 1.0 : 0.0)) * scale;
    auto row = out.subspan(k * features_, features_);
    for (std::size_t a = 0; a < features_; ++a) row[a] += coeff * x[a];
  }
}

void LogisticProblem::gradient(std::size_t m, std::span<const double> theta,
                               std::span<const std::size_t> batch,
                               std::span<double> out) const {
  check_batch(m, batch);
  std::fill(out.begin(), out.end(), 0.0);
  const auto& shard = shards_[m];
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j : batch) {
    add_sample_gradient(theta, shard.row(j), shard.labels[j], scale, out);
  }
  for (std::size_t i = 0; i < dim_; ++i) out[i] += lambda_ * theta[i];
}

double LogisticProblem::device_loss(std::size_t m, std::span<const double> theta) const {
  const auto& shard = shards_[m];
  double total = 0.0;
  for (std::size_t j = 0; j < shard.size(); ++j) {
    total += sample_loss(theta, shard.row(j), shard.labels[j]);
  }
  return total / static_cast<double>(shard.size()) + 0.5 * lambda_ * squared_norm(theta);
}

double LogisticProblem::weighted_loss(std::span<const double> weights,
                                      std::span<const double> theta) const {
  double total = 0.0;
  for (std::size_t m = 0; m < shards_.size(); ++m) {
    if (weights[m] != 0.0) total += weights[m] * device_loss(m, theta);
  }
  return total;
}

void LogisticProblem::weighted_gradient(std::span<const double> weights,
                                        std::span<const double> theta,
                                        std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  double weight_sum = 0.0;
  for (std::size_t m = 0; m < shards_.size(); ++m) {
    if (weights[m] == 0.0) continue;
    weight_sum += weights[m];
    const auto& shard = shards_[m];
    const double scale = weights[m] / static_cast<double>(shard.size());
    for (std::size_t j = 0; j < shard.size(); ++j) {
      add_sample_gradient(theta, shard.row(j), shard.labels[j], scale, out);
    }
  }
  for (std::size_t i = 0; i < dim_; ++i) out[i] += weight_sum * lambda_ * theta[i];
}

Eigen::MatrixXd LogisticProblem::weighted_hessian(std::span<const double> weights,
                                                  std::span<const double> theta) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  const auto p = static_cast<Eigen::Index>(features_);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> prob(static_cast<std::size_t>(classes_));
  double weight_sum = 0.0;
  for (std::size_t m = 0; m < shards_.size(); ++m) {
    if (weights[m] == 0.0) continue;
    weight_sum += weights[m];
    const auto& shard = shards_[m];
    const double scale = weights[m] / static_cast<double>(shard.size());
    for (std::size_t j = 0; j < shard.size(); ++j) {
      const auto x = shard.row(j);
      const ConstMap xv(x.data(), p);
      const Eigen::MatrixXd outer = xv * xv.transpose();
      if (classes_ == 2) {
        const double s = sigmoid(dot(theta, x));
        H.noalias() += (scale * s * (1.0 - s)) * outer;
        continue;
      }
      double peak = -INFINITY;
      for (int k = 0; k < classes_; ++k) {
        prob[k] = dot(theta.subspan(k * features_, features_), x);
        peak = std::max(peak, prob[k]);
      }
      double sum = 0.0;
      for (double& v : prob) {
        v = std::exp(v - peak);
        sum += v;
      }
      for (double& v : prob) v /= sum;
      for (int k = 0; k < classes_; ++k) {
        for (int l = 0; l < classes_; ++l) {
          const double c = prob[k] * ((k == l ? 1.0 : 0.0) - prob[l]);
          H.block(k * p, l * p, p, p).noalias() += (scale * c) * outer;
        }
      }
    }
  }
  H.diagonal().array() += weight_sum * lambda_;
  return H;
}

ModelVector LogisticProblem::minimize(std::span<const double> weights,
                                      double& grad_norm) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  ModelVector theta(dim_, 0.0);
  ModelVector grad(dim_);

  if (dim_ <= kNewtonMaxDim) {
    for (int iter = 0; iter < 200; ++iter) {
      weighted_gradient(weights, theta, grad);
      grad_norm = std::sqrt(squared_norm(grad));
      if (grad_norm <= kSolveTolerance) return theta;
      const Eigen::MatrixXd H = weighted_hessian(weights, theta);
      const Eigen::VectorXd step = H.ldlt().solve(-ConstMap(grad.data(), n));
      double t = 1.0;
      // Near the optimum loss differences drown in rounding; take full steps.
      if (grad_norm > 1e-6) {
        const double f0 = weighted_loss(weights, theta);
        const double slope = step.dot(ConstMap(grad.data(), n));
        ModelVector trial(dim_);
        for (int k = 0; k < 60; ++k) {
          for (std::size_t i = 0; i < dim_; ++i) trial[i] = theta[i] + t * step(i);
          if (weighted_loss(weights, trial) <= f0 + 1e-4 * t * slope) break;
          t *= 0.5;
        }
      }
      for (std::size_t i = 0; i < dim_; ++i) theta[i] += t * step(i);
    }
    weighted_gradient(weights, theta, grad);
    grad_norm = std::sqrt(squared_norm(grad));
    return theta;
  }

  // Nesterov's method for strongly convex objectives.
  const Smoothness s = estimate_smoothness();
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  const double mu = s.mu * weight_sum;
  const double L = s.L * weight_sum;
  const double momentum = (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu));
  ModelVector look = theta;
  ModelVector next(dim_);
  for (int iter = 0; iter < 20000; ++iter) {
    weighted_gradient(weights, look, grad);
    for (std::size_t i = 0; i < dim_; ++i) next[i] = look[i] - grad[i] / L;
    for (std::size_t i = 0; i < dim_; ++i) {
      look[i] = next[i] + momentum * (next[i] - theta[i]);
    }
    theta.swap(next);
    if (iter % 50 == 0) {
      weighted_gradient(weights, theta, grad);
      if (std::sqrt(squared_norm(grad)) <= kSolveTolerance) break;
    }
  }
  weighted_gradient(weights, theta, grad);
  grad_norm = std::sqrt(squared_norm(grad));
  return theta;
}

OptimalityInfo LogisticProblem::solve_optimum() const {
  OptimalityInfo info;
  info.theta_star = minimize(weights_, info.gradient_norm);
  info.f_star = global_loss(info.theta_star);
  std::vector<double> single(shards_.size(), 0.0);
  double weighted_minima = 0.0;
  for (std::size_t m = 0; m < shards_.size(); ++m) {
    single.assign(shards_.size(), 0.0);
    single[m] = 1.0;
    double norm = 0.0;
    const ModelVector local = minimize(single, norm);
    info.device_f_star.push_back(device_loss(m, local));
    weighted_minima += weights_[m] * info.device_f_star.back();
  }
  // Solver tolerance can push the difference a hair below zero.
  info.gamma = std::max(0.0, info.f_star - weighted_minima);
  return info;
}

Smoothness LogisticProblem::estimate_smoothness() const {
  const double curvature = classes_ == 2 ? 0.25 : 0.5;
  double top = 0.0;
  for (const auto& shard : shards_) {
    top = std::max(top, gram_max_eigenvalue(shard.features, shard.size(), features_));
  }
  return {lambda_, lambda_ + curvature * top};
}

std::optional<double> LogisticProblem::test_accuracy(std::span<const double> theta) const {
  if (!test_ || test_->size() == 0) return std::nullopt;
  std::size_t correct = 0;
  for (std::size_t j = 0; j < test_->size(); ++j) {
    const auto x = test_->row(j);
    int predicted = 0;
    if (classes_ == 2) {
      predicted = dot(theta, x) > 0.0 ? 1 : 0;
    } else {
      double best = -INFINITY;
      for (int k = 0; k < classes_; ++k) {
        const double z = dot(theta.subspan(k * features_, features_), x);
        if (z > best) {
          best = z;
          predicted = k;
        }
      }
    }
    if (predicted == test_->labels[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_->size());
}

LogisticProblem make_logistic(const data::Dataset& train, std::optional<data::Dataset> test,
                              std::size_t num_devices, data::PartitionMode mode,
                              int num_classes, double lambda_reg, std::uint64_t seed) {
  const auto shards_idx = data::partition(train.labels, num_devices, mode, seed);
  std::vector<data::Dataset> shards;
  for (const auto& idx : shards_idx) shards.push_back(train.subset(idx));
  return LogisticProblem(std::move(shards), num_classes, lambda_reg, std::move(test));
}

LogisticProblem make_logistic(const LogisticSpec& spec) {
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t p = spec.num_features;
  std::vector<ModelVector> means(static_cast<std::size_t>(spec.num_classes), ModelVector(p));
  for (auto& mean : means) {
    for (double& v : mean) v = spec.separation * normal(gen);
  }
  auto draw = [&](std::size_t per_class) {
    data::Dataset ds;
    ds.num_features = p + 1;
    ModelVector x(p + 1);
    for (int k = 0; k < spec.num_classes; ++k) {
      for (std::size_t j = 0; j < per_class; ++j) {
        for (std::size_t a = 0; a < p; ++a) x[a] = means[k][a] + normal(gen);
        x[p] = 1.0;
        ds.push_back(x, k);
      }
    }
    return ds;
  };
  data::Dataset train = draw(spec.samples_per_class);
  std::optional<data::Dataset> test;
  if (spec.test_per_class > 0) test = draw(spec.test_per_class);
  return make_logistic(train, std::move(test), spec.num_devices, spec.partition,
                       spec.num_classes, spec.lambda_reg, spec.seed);
}

double gram_max_eigenvalue(std::span<const double> features, std::size_t rows,
                           std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) return 0.0;
  RngStream rng(seed, 0x706f776572ULL);
  std::vector<double> v(cols);
  for (double& x : v) x = rng.uniform() - 0.5;
  std::vector<double> xv(rows);
  std::vector<double> w(cols);
  double estimate = 0.0;
  int stable = 0;
  for (int iter = 0; iter < 200000; ++iter) {
    const double norm = std::sqrt(squared_norm(v));
    if (norm == 0.0) return 0.0;
    for (double& x : v) x /= norm;
    for (std::size_t r = 0; r < rows; ++r) xv[r] = dot(features.subspan(r * cols, cols), v);
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = features.subspan(r * cols, cols);
      for (std::size_t c = 0; c < cols; ++c) w[c] += xv[r] * row[c];
    }
    for (double& x : w) x /= static_cast<double>(rows);
    const double next = dot(v, w);
    if (std::abs(next - estimate) <= 1e-15 * std::abs(next)) {
      if (++stable >= 5) return next;
    } else {
      stable = 0;
    }
    estimate = next;
    v.swap(w);
  }
  return estimate;
}

}  // namespace lfl::losses
