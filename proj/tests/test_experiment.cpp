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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "lfl/error.hpp"
#include "lfl/experiment.hpp"
#include "lfl/quant.hpp"

namespace fs = std::filesystem;
namespace ex = lfl::experiment;
namespace fed = lfl::fed;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lfl_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

ex::RunConfig config_in(const fs::path& dir, const std::string& body) {
  return ex::parse_config(body + "\noutput_dir = " + dir.string() + "\n");
}

std::string config_error_field(const std::string& text) {
  try {
    ex::parse_config(text);
  } catch (const lfl::ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal run writes one row per round") {
  const auto dir = fresh_dir("minimal");
  const auto cfg = config_in(dir, "schemes = LFL\nseeds = 1\nT = 10\nq1 = 2\nd = 5\nM = 3");
  const auto report = ex::run_experiment(cfg);
  REQUIRE(report.csv_files.size() == 1);
  CHECK(report.errors.empty());
  const auto rows = read_csv(dir / ex::csv_file_name(fed::Scheme::kLfl, 1));
  REQUIRE(rows.size() == 11);
  std::ostringstream header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header << (i ? "," : "") << rows[0][i];
  CHECK(header.str() == ex::kCsvHeader);
  for (std::size_t t = 1; t <= 10; ++t) {
    REQUIRE(rows[t].size() == 10);
    CHECK(std::stoul(rows[t][0]) == t);
    CHECK(rows[t][1] == "LFL");
    CHECK(rows[t][2] == "1");
    CHECK(std::isfinite(std::stod(rows[t][3])));
    CHECK(rows[t][9].empty());
  }
  CHECK(std::stod(rows[1][7]) == 0.0);
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "run_LFL_seed1.meta.json"));
}

TEST_CASE("repeated runs are byte identical") {
  const std::string body =
      "schemes = LFL, LGM, LTGM\nseeds = 1..2\nT = 15\nq1 = 2\nq2 = 2\nd = 7\nM = 4\n"
      "tau = 2\nbatch_size = 1\nsamples_per_device = 3\nsample_noise = 0.5";
  const auto a = fresh_dir("repeat_a");
  const auto b = fresh_dir("repeat_b");
  ex::run_experiment(config_in(a, body));
  ex::run_experiment(config_in(b, body + "\nparallel = true"));
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv" || entry.path().filename() == "summary.csv") continue;
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    ++compared;
  }
  CHECK(compared == 6);
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
}

TEST_CASE("bit counters follow the per-round costs") {
  const auto dir = fresh_dir("bits");
  const std::size_t d = 20;
  const std::size_t T = 25;
  const auto cfg = config_in(
      dir, "schemes = LFL, LB, LGM, LOSSLESS\nseeds = 3\nT = 25\nq1 = 2\nq2 = 2\nd = 20\nM = 4");
  ex::run_experiment(cfg);
  const auto last = [&](fed::Scheme s) { return read_csv(dir / ex::csv_file_name(s, 3)).back(); };
  const double lfl_down = std::stod(last(fed::Scheme::kLfl)[5]);
  const double lb_down = std::stod(last(fed::Scheme::kLb)[5]);
  const double lgm_down = std::stod(last(fed::Scheme::kLgm)[5]);
  CHECK(lfl_down == static_cast<double>(T) * lfl::quant::bit_cost(d, lfl::QuantLevel(2)).formula_bits);
  CHECK(lb_down == static_cast<double>(T) * 33.0 * static_cast<double>(d));
  CHECK(lgm_down == lfl_down);
  CHECK(lb_down / lfl_down == doctest::Approx(lfl::quant::savings_ratio(lfl::QuantLevel(2), d)).epsilon(1e-15));
  CHECK(std::stod(last(fed::Scheme::kLossless)[6]) == static_cast<double>(T) * 4.0 * 660.0);
  CHECK(std::stod(last(fed::Scheme::kLfl)[6]) ==
        static_cast<double>(T) * 4.0 * lfl::quant::bit_cost(d, lfl::QuantLevel(2)).formula_bits);
  CHECK(lfl::quant::savings_ratio_asymptotic(lfl::QuantLevel(2)) == doctest::Approx(12.77).epsilon(1e-3));
}

TEST_CASE("summary aggregates seeds and schemes") {
  const auto dir = fresh_dir("summary");
  ex::run_experiment(config_in(
      dir,
      "schemes = LFL, LB, LOSSLESS\nseeds = 1, 2, 3\nT = 40\nq1 = 2\nd = 6\nM = 3\n"
      "bound_epsilon = measured\nlr = decay\nalpha = 1\nbeta = 2"));
  const auto summary = ex::summarize(dir);
  REQUIRE(summary.size() == 3);
  for (const auto& s : summary) {
    CHECK(s.runs == 3);
    CHECK(s.rounds == 40);
    CHECK(s.bound_rounds == 40);
    CHECK(s.bound_violations == 0);
    CHECK(s.errors.empty());
    CHECK(s.final_dist_mean.has_value());
    CHECK(s.epsilon_max <= 1.0);
  }
  double mean = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    mean += std::stod(read_csv(dir / ex::csv_file_name(fed::Scheme::kLfl, seed)).back()[3]);
  }
  const auto lfl_row = std::find_if(summary.begin(), summary.end(),
                                    [](const auto& s) { return s.scheme == "LFL"; });
  REQUIRE(lfl_row != summary.end());
  CHECK(lfl_row->final_loss_mean == doctest::Approx(mean / 3.0).epsilon(1e-14));
  CHECK(lfl_row->final_loss_std > 0.0);

  const auto json = nlohmann::json::parse(slurp(dir / "summary.json"));
  REQUIRE(json.size() == 3);
  CHECK(json[0]["runs"] == 3);
  CHECK(json[0]["errors"].is_array());
  CHECK(read_csv(dir / "summary.csv").size() == 4);
}

TEST_CASE("single run summary has zero spread") {
  const auto dir = fresh_dir("single");
  ex::run_experiment(config_in(dir, "schemes = LGM\nseeds = 9\nT = 5\nq1 = 4\nd = 3\nM = 2"));
  const auto summary = ex::summarize(dir);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].scheme == "LGM");
  CHECK(summary[0].final_loss_std == 0.0);
  CHECK(summary[0].bound_rounds == 0);
}

TEST_CASE("summarize refuses empty or missing directories") {
  const auto dir = fresh_dir("empty");
  fs::create_directories(dir);
  CHECK_THROWS_AS(ex::summarize(dir), lfl::Error);
  CHECK_THROWS_AS(ex::summarize(dir / "missing"), lfl::Error);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nrounds = 5") == "rounds");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nT = -3") == "T");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\neta = 0") == "eta");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nq1 = two") == "q1");
  CHECK(config_error_field("schemes = QSGD\nseeds = 1") == "schemes");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nseeds = 2") == "seeds");
  CHECK(config_error_field("schemes = LFL") == "seeds");
  CHECK(config_error_field("seeds = 1") == "schemes");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nmu = 2\nL = 1") == "L");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nbound_epsilon = 2") == "bound_epsilon");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nproblem = mnist") == "mnist_images");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\nproblem = logistic\npartition = noniid\n"
                           "M = 15") == "M");
  CHECK(config_error_field("schemes = LFL\nseeds = 1\njust words") == "line 3");
  CHECK(config_error_field("# comment\nschemes = LFL\nseeds = 1  # trailing\n").empty());
}

TEST_CASE("config values and per-scheme level rules") {
  const auto cfg = ex::parse_config(
      "schemes = LFL, LB, LTGM, LOSSLESS\nseeds = 3..6\nq1 = 2\nq2 = inf\nltgm_q1 = 4\n"
      "lr = decay\nalpha = 12.5\nbeta = 50\nbound_epsilon = measured\n");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5, 6});
  CHECK_FALSE(cfg.bound_epsilon.has_value());
  CHECK(cfg.lr_decaying);
  CHECK(cfg.scheme_config(fed::Scheme::kLfl).q1->value() == 2);
  CHECK_FALSE(cfg.scheme_config(fed::Scheme::kLb).q1.has_value());
  CHECK(cfg.scheme_config(fed::Scheme::kLtgm).q1->value() == 4);
  const auto lossless = cfg.scheme_config(fed::Scheme::kLossless);
  CHECK_FALSE(lossless.q1.has_value());
  CHECK_FALSE(lossless.q2.has_value());
  CHECK(cfg.scheme_config(fed::Scheme::kLfl).lr.at(0) == 0.25);
}

TEST_CASE("output root prefixes relative directories") {
  ::setenv("LFL_OUTPUT_ROOT", "/tmp/lfl_root", 1);
  CHECK(ex::resolve_output_dir("runs/a") == fs::path("/tmp/lfl_root/runs/a"));
  CHECK(ex::resolve_output_dir("/abs/dir") == fs::path("/abs/dir"));
  ::unsetenv("LFL_OUTPUT_ROOT");
  CHECK(ex::resolve_output_dir("runs/a") == fs::path("runs/a"));
}

TEST_CASE("numeric failures leave an error record and keep the finished rounds") {
  const auto dir = fresh_dir("diverge");
  const auto report = ex::run_experiment(
      config_in(dir, "schemes = LB\nseeds = 1\nT = 5000\nd = 3\nM = 2\neta = 1"));
  REQUIRE(report.errors.size() == 1);
  const auto error_file = dir / "run_LB_seed1.error";
  REQUIRE(fs::exists(error_file));
  CHECK(slurp(error_file).rfind("round ", 0) == 0);
  const auto rows = read_csv(dir / ex::csv_file_name(fed::Scheme::kLb, 1));
  CHECK(rows.size() > 2);
  CHECK(rows.size() < 5001);
  const auto summary = ex::summarize(dir);
  CHECK(summary[0].errors.size() == 1);

  ex::run_experiment(config_in(dir, "schemes = LB\nseeds = 1\nT = 5\nd = 3\nM = 2\neta = 0.1"));
  CHECK_FALSE(fs::exists(error_file));
}
