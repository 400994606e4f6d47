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

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "lfl/error.hpp"
#include "lfl/fedcore.hpp"
#include "lfl/losses.hpp"
#include "lfl/quant.hpp"
#include "lfl/rng.hpp"
#include "lfl/transform.hpp"

namespace fed = lfl::fed;
namespace losses = lfl::losses;
using lfl::LinkLevel;
using lfl::ModelVector;
using lfl::QuantLevel;
using lfl::RngStream;

namespace {

// Line-by-line stochastic quantizer: magnitude for entry i given draw u_i.
ModelVector oracle_quantize(const ModelVector& x, std::uint32_t q, const RngStream& rng,
                            std::uint64_t base) {
  double hi = 0.0;
  double lo = INFINITY;
  for (double v : x) {
    hi = std::max(hi, std::abs(v));
    lo = std::min(lo, std::abs(v));
  }
  ModelVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double magnitude = lo;
    if (hi > lo) {
      const double y = (std::abs(x[i]) - lo) / (hi - lo);
      double l = std::floor(y * q);
      if (l == q) l = q - 1;
      const double p_up = y * q - l;
      const double level = rng.uniform_at(base + i) < p_up ? l + 1 : l;
      magnitude = level == q ? hi : std::min(hi, lo + (hi - lo) * (level / q));
    }
    out[i] = x[i] < 0.0 ? -magnitude : magnitude;
  }
  return out;
}

std::vector<fed::DeviceState> make_devices(std::size_t count, const ModelVector& theta_hat) {
  std::vector<fed::DeviceState> devs(count);
  for (std::size_t m = 0; m < count; ++m) {
    devs[m].id = m;
    devs[m].theta_hat = theta_hat;
    devs[m].delta.assign(theta_hat.size(), 0.0);
    devs[m].weight = 1.0 / static_cast<double>(count);
    devs[m].rng = RngStream(9, m + 1);
  }
  return devs;
}

fed::ServerState make_server(ModelVector theta, ModelVector mirror) {
  fed::ServerState s;
  s.theta = std::move(theta);
  s.theta_hat_mirror = std::move(mirror);
  s.lgm_error.assign(s.theta.size(), 0.0);
  s.rng = RngStream(42, 0);
  return s;
}

losses::QuadraticDevice identity_device(std::size_t d, std::vector<ModelVector> samples,
                                        double scale = 1.0) {
  losses::QuadraticDevice dev;
  dev.A = scale * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                            static_cast<Eigen::Index>(d));
  dev.samples = std::move(samples);
  return dev;
}

losses::QuadraticProblem stochastic_quadratic(std::size_t M = 4, std::size_t d = 6) {
  losses::QuadraticSpec spec;
  spec.num_devices = M;
  spec.dim = d;
  spec.samples_per_device = 5;
  spec.sample_noise = 0.4;
  spec.heterogeneity = 0.5;
  spec.seed = 3;
  return losses::make_quadratic(spec);
}

fed::SchemeConfig scheme(fed::Scheme s, LinkLevel q1, LinkLevel q2, int tau = 2,
                         double eta = 0.05, std::size_t batch = 2) {
  fed::SchemeConfig cfg;
  cfg.scheme = s;
  cfg.q1 = q1;
  cfg.q2 = q2;
  cfg.tau = tau;
  cfg.lr = lfl::theory::LearningRate::constant(eta);
  cfg.batch_size = batch;
  return cfg;
}

const LinkLevel kInf = std::nullopt;

// Delegating problem with caller-chosen weights.
class ReweightedProblem final : public losses::Problem {
 public:
  ReweightedProblem(const losses::Problem& inner, std::vector<double> w)
      : inner_(inner), w_(std::move(w)) {}
  std::size_t dim() const override { return inner_.dim(); }
  std::size_t num_devices() const override { return inner_.num_devices(); }
  std::size_t shard_size(std::size_t m) const override { return inner_.shard_size(m); }
  double weight(std::size_t m) const override { return w_[m]; }
  void gradient(std::size_t m, std::span<const double> theta,
                std::span<const std::size_t> batch, std::span<double> out) const override {
    inner_.gradient(m, theta, batch, out);
  }
  double device_loss(std::size_t m, std::span<const double> theta) const override {
    return inner_.device_loss(m, theta);
  }
  losses::OptimalityInfo solve_optimum() const override { return inner_.solve_optimum(); }
  losses::Smoothness estimate_smoothness() const override {
    return inner_.estimate_smoothness();
  }

 private:
  const losses::Problem& inner_;
  std::vector<double> w_;
};

}  // namespace

TEST_CASE("scheme names and level rules") {
  for (auto s : {fed::Scheme::kLfl, fed::Scheme::kLb, fed::Scheme::kLgm, fed::Scheme::kLtgm,
                 fed::Scheme::kLossless}) {
    CHECK(fed::parse_scheme(fed::to_string(s)) == s);
  }
  CHECK_THROWS_AS(fed::parse_scheme("QSGD"), lfl::StructuralError);
  CHECK_THROWS_AS(scheme(fed::Scheme::kLb, QuantLevel(2), kInf).validate(), lfl::StructuralError);
  CHECK_THROWS_AS(scheme(fed::Scheme::kLossless, kInf, QuantLevel(2)).validate(),
                  lfl::StructuralError);
  CHECK_NOTHROW(scheme(fed::Scheme::kLb, kInf, QuantLevel(2)).validate());
  CHECK_THROWS_AS(scheme(fed::Scheme::kLfl, kInf, kInf, 0).validate(), lfl::StructuralError);
}

TEST_CASE("LFL broadcast matches a scalar replay") {
  const ModelVector theta = {1.0, -0.5, 0.2};
  const ModelVector prev = {0.6, -0.1, 0.1};
  auto server = make_server(theta, prev);
  auto devs = make_devices(3, prev);
  const RngStream rng_copy = server.rng;
  const auto cfg = scheme(fed::Scheme::kLfl, QuantLevel(1), kInf);
  const auto out = fed::broadcast_step(server, devs, cfg);

  ModelVector diff(3);
  for (std::size_t i = 0; i < 3; ++i) diff[i] = theta[i] - prev[i];
  const auto rec = oracle_quantize(diff, 1, rng_copy, 0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(server.theta_hat_mirror[i] == prev[i] + rec[i]);
  for (const auto& dev : devs) CHECK(dev.theta_hat == server.theta_hat_mirror);
  CHECK(out.bits == 64.0 + 3.0 * 2.0);
  CHECK(server.rng.counter() == 3);
  const double hi = 0.4;
  const double lo = std::abs(0.2 - 0.1);
  CHECK(out.epsilon == doctest::Approx((hi - lo) * (hi - lo) / (0.16 + 0.16 + lo * lo)));

  // d = 2 case: equal magnitudes are sent exactly.
  auto server2 = make_server({1.0, -0.5}, {0.6, -0.1});
  auto devs2 = make_devices(2, {0.6, -0.1});
  fed::broadcast_step(server2, devs2, cfg);
  CHECK(server2.theta_hat_mirror[0] == 0.6 + (1.0 - 0.6));
  CHECK(server2.theta_hat_mirror[1] == -0.1 + (-0.5 - -0.1));
}

TEST_CASE("first LFL broadcast is a zero update") {
  const ModelVector theta = {0.3, -2.0, 5.0};
  auto server = make_server(theta, theta);
  auto devs = make_devices(2, theta);
  const auto out = fed::broadcast_step(server, devs, scheme(fed::Scheme::kLfl, QuantLevel(2), kInf));
  CHECK(server.theta_hat_mirror == theta);
  CHECK(out.epsilon == 0.0);
  for (auto level : server.message.levels) CHECK(level == 0);
}

TEST_CASE("lossless broadcasts copy the model") {
  for (auto s : {fed::Scheme::kLb, fed::Scheme::kLossless, fed::Scheme::kLfl}) {
    auto server = make_server({1.5, 2.5}, {0.0, 0.0});
    auto devs = make_devices(2, {0.0, 0.0});
    const auto out = fed::broadcast_step(server, devs, scheme(s, kInf, kInf));
    CHECK(server.theta_hat_mirror == server.theta);
    CHECK(devs[1].theta_hat == server.theta);
    CHECK(out.bits == 66.0);
  }
}

TEST_CASE("LGM quantizes the model plus the server error") {
  RngStream data(5, 5);
  ModelVector theta(8);
  for (auto& v : theta) v = data.uniform() - 0.3;
  auto server = make_server(theta, ModelVector(8, 0.0));
  ModelVector old_error(8);
  for (auto& v : old_error) v = 0.01 * (data.uniform() - 0.5);
  server.lgm_error = old_error;
  auto devs = make_devices(2, ModelVector(8, 0.0));
  const RngStream rng_copy = server.rng;
  fed::broadcast_step(server, devs, scheme(fed::Scheme::kLgm, QuantLevel(3), kInf));
  ModelVector target(8);
  for (std::size_t i = 0; i < 8; ++i) target[i] = theta[i] + old_error[i];
  const auto rec = oracle_quantize(target, 3, rng_copy, 0);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(server.theta_hat_mirror[i] == rec[i]);
    CHECK(server.lgm_error[i] == target[i] - rec[i]);
  }
}

TEST_CASE("LTGM broadcasts through the Hadamard transform") {
  RngStream data(6, 6);
  ModelVector theta(5);
  for (auto& v : theta) v = data.uniform() - 0.5;
  auto server = make_server(theta, ModelVector(5, 0.0));
  auto devs = make_devices(2, ModelVector(5, 0.0));
  const RngStream rng_copy = server.rng;
  const lfl::transform::HadamardPlan plan(5);
  const auto cfg = scheme(fed::Scheme::kLtgm, QuantLevel(4), kInf);
  const auto out = fed::broadcast_step(server, devs, cfg, &plan);
  const auto projected = lfl::transform::forward(theta, plan);
  const auto expected = lfl::transform::inverse(oracle_quantize(projected, 4, rng_copy, 0), plan);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(server.theta_hat_mirror[i] - expected[i]) <= 1e-15);
  }
  CHECK(out.bits == doctest::Approx(64.0 + 8.0 * (1.0 + std::log2(5.0))));

  auto server2 = make_server(theta, ModelVector(5, 0.0));
  auto devs2 = make_devices(2, ModelVector(5, 0.0));
  CHECK_THROWS_AS(fed::broadcast_step(server2, devs2, cfg), lfl::StructuralError);
}

TEST_CASE("broadcast refuses out-of-sync devices") {
  auto server = make_server({1.0}, {0.0});
  auto devs = make_devices(2, {0.0});
  devs[1].theta_hat = {0.5};
  CHECK_THROWS_AS(fed::broadcast_step(server, devs, scheme(fed::Scheme::kLb, kInf, kInf)),
                  lfl::StructuralError);
}

TEST_CASE("single full-batch step on a unit quadratic") {
  const ModelVector c = {1.0, -2.0, 0.5};
  const losses::QuadraticProblem prob({identity_device(3, {c})});
  auto devs = make_devices(1, {0.0, 1.0, 1.0});
  const auto cfg = scheme(fed::Scheme::kLb, kInf, kInf, 1, 0.3, 0);
  const auto& update = fed::local_update(devs[0], cfg, prob, 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(update[i] == doctest::Approx(-0.3 * (devs[0].theta_hat[i] - c[i])).epsilon(1e-15));
  }
  devs[0].theta_hat = c;
  for (double v : fed::local_update(devs[0], cfg, prob, 1)) CHECK(v == 0.0);
}

TEST_CASE("three local steps match a hand-rolled loop") {
  std::vector<ModelVector> samples = {{1.0, 0.0}, {0.0, 2.0}, {-1.0, 1.0}, {0.5, -0.5}};
  losses::QuadraticDevice dev;
  dev.A.resize(2, 2);
  dev.A << 2.0, 0.5, 0.5, 1.0;
  dev.samples = samples;
  const losses::QuadraticProblem prob({dev});
  auto devs = make_devices(1, {0.3, -0.7});
  const RngStream rng_copy = devs[0].rng;
  auto cfg = scheme(fed::Scheme::kLb, kInf, kInf, 3, 0.1, 2);
  cfg.lr = lfl::theory::LearningRate::decaying(0.5, 2.0);
  const auto update = fed::local_update(devs[0], cfg, prob, 3);

  RngStream r = rng_copy;
  double x0 = 0.3;
  double x1 = -0.7;
  const double eta = 0.5 / (3.0 + 2.0);
  for (int step = 0; step < 3; ++step) {
    double g0 = 0.0;
    double g1 = 0.0;
    for (int b = 0; b < 2; ++b) {
      const auto j = r.uniform_index(4);
      const double r0 = x0 - samples[j][0];
      const double r1 = x1 - samples[j][1];
      g0 += (2.0 * r0 + 0.5 * r1) / 2.0;
      g1 += (0.5 * r0 + 1.0 * r1) / 2.0;
    }
    x0 -= eta * g0;
    x1 -= eta * g1;
  }
  CHECK(std::abs(update[0] - (x0 - 0.3)) <= 1e-12);
  CHECK(std::abs(update[1] - (x1 + 0.7)) <= 1e-12);
  CHECK(devs[0].rng.counter() == 6);
}

TEST_CASE("lossless uplink averages the local updates") {
  auto server = make_server({0.0, 0.0}, {1.0, 2.0});
  auto devs = make_devices(2, {1.0, 2.0});
  devs[0].update = {0.25, -0.5};
  devs[1].update = {0.75, 0.125};
  const double bits = fed::uplink_step(devs, server, scheme(fed::Scheme::kLb, kInf, kInf));
  CHECK(server.theta[0] == 1.0 + (0.5 * 0.25 + 0.5 * 0.75));
  CHECK(server.theta[1] == 2.0 + (0.5 * -0.5 + 0.5 * 0.125));
  CHECK(bits == 2 * 66.0);
  for (const auto& d : devs) {
    for (double e : d.delta) CHECK(e == 0.0);
  }
}

TEST_CASE("equal-magnitude uplink is exact and clears the residual") {
  auto server = make_server({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
  auto devs = make_devices(1, {0.0, 0.0, 0.0});
  devs[0].weight = 1.0;
  devs[0].update = {0.5, -0.25, 0.0};
  devs[0].delta = {-0.25, 0.0, 0.25};
  fed::uplink_step(devs, server, scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(2)));
  CHECK(server.theta == ModelVector{0.25, -0.25, 0.25});
  CHECK(devs[0].delta == ModelVector{0.0, 0.0, 0.0});
}

TEST_CASE("uplink quantization matches a scalar replay and keeps the residual") {
  RngStream data(8, 8);
  auto server = make_server(ModelVector(6, 0.0), ModelVector(6, 0.1));
  auto devs = make_devices(3, ModelVector(6, 0.1));
  std::vector<RngStream> copies;
  for (auto& d : devs) {
    d.update.resize(6);
    for (auto& v : d.update) v = data.uniform() - 0.5;
    for (auto& v : d.delta) v = 0.05 * (data.uniform() - 0.5);
    copies.push_back(d.rng);
  }
  std::vector<ModelVector> corrected(3, ModelVector(6));
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t i = 0; i < 6; ++i) corrected[m][i] = devs[m].update[i] + devs[m].delta[i];
  }
  fed::uplink_step(devs, server, scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(2)));
  ModelVector expected(6, 0.0);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto rec = oracle_quantize(corrected[m], 2, copies[m], 0);
    for (std::size_t i = 0; i < 6; ++i) {
      expected[i] += devs[m].weight * rec[i];
      CHECK(devs[m].delta[i] == corrected[m][i] - rec[i]);
    }
  }
  for (std::size_t i = 0; i < 6; ++i) CHECK(server.theta[i] == 0.1 + expected[i]);
}

TEST_CASE("single-device lossless run is plain gradient descent") {
  const std::vector<double> diag = {0.5, 1.0, 3.0};
  losses::QuadraticDevice dev;
  dev.A = Eigen::Vector3d(diag[0], diag[1], diag[2]).asDiagonal();
  const ModelVector c = {2.0, -1.0, 0.25};
  dev.samples = {c};
  const losses::QuadraticProblem prob({dev});
  const double eta = 0.2;
  fed::RunOptions opts;
  opts.theta0 = {1.0, 1.0, -1.0};
  const auto r = fed::run(prob, scheme(fed::Scheme::kLfl, kInf, kInf, 1, eta, 0), 60, 1, opts);
  REQUIRE(r.rounds.size() == 60);
  // Re-run step by step to read θ(t) directly.
  fed::Simulation sim(prob, scheme(fed::Scheme::kLfl, kInf, kInf, 1, eta, 0), opts.theta0, 1);
  for (int t = 1; t <= 60; ++t) {
    sim.step();
    for (std::size_t i = 0; i < 3; ++i) {
      const double closed = c[i] + std::pow(1.0 - eta * diag[i], t) * (opts.theta0[i] - c[i]);
      CHECK(std::abs(sim.server().theta[i] - closed) <= 1e-12);
    }
  }
}

TEST_CASE("lossless schemes give bit-identical trajectories") {
  const auto prob = stochastic_quadratic();
  fed::Simulation a(prob, scheme(fed::Scheme::kLfl, kInf, kInf), {}, 17);
  fed::Simulation b(prob, scheme(fed::Scheme::kLb, kInf, kInf), {}, 17);
  fed::Simulation c(prob, scheme(fed::Scheme::kLossless, kInf, kInf), {}, 17);
  for (int t = 0; t < 100; ++t) {
    a.step();
    b.step();
    c.step();
    REQUIRE(a.server().theta == b.server().theta);
    REQUIRE(a.server().theta == c.server().theta);
  }
}

TEST_CASE("parallel and serial execution agree bit for bit") {
  const auto prob = stochastic_quadratic(6, 9);
  for (auto cfg : {scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(2)),
                   scheme(fed::Scheme::kLgm, QuantLevel(3), QuantLevel(2)),
                   scheme(fed::Scheme::kLtgm, QuantLevel(2), QuantLevel(4)),
                   scheme(fed::Scheme::kLb, kInf, QuantLevel(1))}) {
    for (auto opt : {fed::LocalOptimizer::kSgd, fed::LocalOptimizer::kAdam}) {
      cfg.optimizer = opt;
      fed::RunOptions serial;
      serial.policy = lfl::ExecutionPolicy::kSerial;
      fed::RunOptions parallel;
      parallel.policy = lfl::ExecutionPolicy::kParallel;
      const auto rs = fed::run(prob, cfg, 40, 5, serial);
      const auto rp = fed::run(prob, cfg, 40, 5, parallel);
      REQUIRE(rs.rounds.size() == rp.rounds.size());
      for (std::size_t t = 0; t < rs.rounds.size(); ++t) {
        CHECK(rs.rounds[t].global_loss == rp.rounds[t].global_loss);
        CHECK(rs.rounds[t].epsilon_t == rp.rounds[t].epsilon_t);
      }
      CHECK(rs.grad_bound.G == rp.grad_bound.G);
      const auto again = fed::run(prob, cfg, 40, 5, serial);
      CHECK(again.rounds.back().global_loss == rs.rounds.back().global_loss);
    }
  }
}

TEST_CASE("error feedback telescopes per device") {
  const auto prob = stochastic_quadratic();
  fed::Simulation sim(prob, scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(1)), {}, 4);
  const std::size_t d = prob.dim();
  std::vector<ModelVector> sent_sum(prob.num_devices(), ModelVector(d, 0.0));
  std::vector<ModelVector> update_sum(prob.num_devices(), ModelVector(d, 0.0));
  for (int t = 0; t < 150; ++t) {
    sim.step();
    for (const auto& dev : sim.devices()) {
      for (std::size_t i = 0; i < d; ++i) {
        sent_sum[dev.id][i] += dev.sent[i];
        update_sum[dev.id][i] += dev.update[i];
      }
    }
  }
  for (const auto& dev : sim.devices()) {
    double err = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double lhs = sent_sum[dev.id][i] + dev.delta[i];
      err += (lhs - update_sum[dev.id][i]) * (lhs - update_sum[dev.id][i]);
      norm += update_sum[dev.id][i] * update_sum[dev.id][i];
    }
    CHECK(std::sqrt(err) <= 1e-9 * std::sqrt(norm));
  }
}

TEST_CASE("downlink update equals the weighted gradient sum") {
  const auto prob = stochastic_quadratic();
  auto cfg = scheme(fed::Scheme::kLfl, QuantLevel(2), kInf, 3, 0.1, 2);
  cfg.lr = lfl::theory::LearningRate::decaying(0.4, 2.0);
  fed::Simulation sim(prob, cfg, {}, 6);
  for (int t = 0; t < 50; ++t) {
    sim.step();
    const double eta = cfg.lr.at(t);
    const auto& s = sim.server();
    for (std::size_t i = 0; i < prob.dim(); ++i) {
      double expected = 0.0;
      for (const auto& dev : sim.devices()) expected += dev.weight * dev.grad_sum[i];
      expected *= -eta;
      const double actual = s.theta[i] - s.theta_hat_mirror[i];
      CHECK(std::abs(actual - expected) <= 1e-10 * std::max(1e-300, std::abs(expected)) + 1e-15);
    }
    for (const auto& dev : sim.devices()) CHECK(dev.theta_hat == s.theta_hat_mirror);
  }
}

TEST_CASE("cumulative bit counters are exact multiples of the per-round cost") {
  const auto prob = stochastic_quadratic(4, 20);
  struct Case {
    fed::SchemeConfig cfg;
    double down;
    double up;
  };
  const double q2_cost = 64.0 + 20.0 * 3.0;
  const std::vector<Case> cases = {
      {scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(3)), 64.0 + 20.0 * (1.0 + std::log2(3.0)),
       4 * q2_cost},
      {scheme(fed::Scheme::kLb, kInf, QuantLevel(3)), 660.0, 4 * q2_cost},
      {scheme(fed::Scheme::kLgm, QuantLevel(2), QuantLevel(3)), 64.0 + 20.0 * (1.0 + std::log2(3.0)),
       4 * q2_cost},
      {scheme(fed::Scheme::kLtgm, QuantLevel(2), QuantLevel(3)), 64.0 + 32.0 * (1.0 + std::log2(3.0)),
       4 * q2_cost},
      {scheme(fed::Scheme::kLossless, kInf, kInf), 660.0, 4 * 660.0},
  };
  for (const auto& c : cases) {
    const auto costs = fed::per_round_costs(c.cfg, 20, 4);
    CHECK(costs.down_per_round == c.down);
    CHECK(costs.up_per_round == c.up);
    const auto r = fed::run(prob, c.cfg, 37, 2);
    for (const auto& m : r.rounds) {
      CHECK(m.bits_down_cum == static_cast<double>(m.round) * c.down);
      CHECK(m.bits_up_cum == static_cast<double>(m.round) * c.up);
    }
    CHECK(r.initial.bits_down_cum == 0.0);
  }
}

TEST_CASE("device weights must sum to one") {
  const auto prob = stochastic_quadratic(3, 4);
  const ReweightedProblem bad(prob, {0.5, 0.3, 0.3});
  CHECK_THROWS_AS(fed::Simulation(bad, scheme(fed::Scheme::kLb, kInf, kInf), {}, 1),
                  lfl::StructuralError);
  const ReweightedProblem good(prob, {0.5, 0.25, 0.25});
  CHECK_NOTHROW(fed::Simulation(good, scheme(fed::Scheme::kLb, kInf, kInf), {}, 1));
  double sum = 0.0;
  for (std::size_t m = 0; m < prob.num_devices(); ++m) sum += prob.weight(m);
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("learning-rate cap is enforced when requested") {
  const auto prob = stochastic_quadratic();
  auto cfg = scheme(fed::Scheme::kLfl, QuantLevel(2), kInf, 4, 0.5);
  cfg.lr_cap_mu = 1.0;
  fed::Simulation sim(prob, cfg, {}, 1);
  CHECK_THROWS_AS(sim.step(), lfl::DomainError);
  cfg.lr = lfl::theory::LearningRate::constant(0.25);
  fed::Simulation ok(prob, cfg, {}, 1);
  CHECK_NOTHROW(ok.step());
}

TEST_CASE("diverging runs stop with an error record") {
  losses::QuadraticSpec spec;
  spec.num_devices = 2;
  spec.dim = 3;
  const auto prob = losses::make_quadratic(spec);
  const auto r = fed::run(prob, scheme(fed::Scheme::kLb, kInf, kInf, 1, 1.0, 0), 5000, 1);
  REQUIRE(r.error.has_value());
  CHECK(r.rounds.size() < 5000);
  for (const auto& m : r.rounds) CHECK(std::isfinite(m.global_loss));
}

TEST_CASE("convergent schemes approach the optimum") {
  losses::QuadraticSpec spec;
  spec.num_devices = 5;
  spec.dim = 10;
  const auto prob = losses::make_quadratic(spec);
  const auto opt = prob.solve_optimum();
  fed::RunOptions opts;
  opts.theta_star = opt.theta_star;
  for (auto cfg : {scheme(fed::Scheme::kLfl, QuantLevel(2), kInf, 1, 0.2, 0),
                   scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(2), 1, 0.2, 0),
                   scheme(fed::Scheme::kLb, kInf, kInf, 1, 0.2, 0),
                   scheme(fed::Scheme::kLossless, kInf, kInf, 1, 0.2, 0)}) {
    const auto r = fed::run(prob, cfg, 400, 3, opts);
    REQUIRE_FALSE(r.error.has_value());
    CHECK(*r.rounds.back().dist_to_opt_sq <= 1e-3 * *r.initial.dist_to_opt_sq);
  }
}

TEST_CASE("skewness stays in the unit interval") {
  const auto prob = stochastic_quadratic();
  const auto r = fed::run(prob, scheme(fed::Scheme::kLfl, QuantLevel(2), QuantLevel(2)), 60, 3);
  for (double e : r.epsilon.per_round()) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
  CHECK(r.epsilon.per_round().size() == 60);
  CHECK(r.epsilon.per_round()[0] == 0.0);
}
