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

#include "lfl/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lfl/error.hpp"
#include "lfl/losses.hpp"
#include "lfl/theory.hpp"

namespace lfl::experiment {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a finite number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_positive(const std::string& key, const std::string& v) {
  const double out = parse_double(key, v);
  if (!(out > 0.0)) throw ConfigError(key, "must be positive");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const auto out = parse_uint(key, v);
  if (out == 0) throw ConfigError(key, "must be >= 1");
  return static_cast<std::size_t>(out);
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

LinkLevel parse_level(const std::string& key, const std::string& v) {
  if (lower(v) == "inf") return std::nullopt;
  const auto q = parse_uint(key, v);
  if (q == 0 || q > 0xFFFFFFFFull) throw ConfigError(key, "level must be in [1, 2^32) or inf");
  return QuantLevel(static_cast<std::uint32_t>(q));
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(v, ',')) {
    if (part.empty()) throw ConfigError(key, "empty entry");
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(parse_uint(key, part));
      continue;
    }
    const auto lo = parse_uint(key, trim(part.substr(0, dots)));
    const auto hi = parse_uint(key, trim(part.substr(dots + 2)));
    if (hi < lo) throw ConfigError(key, "range '" + part + "' is reversed");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  return seeds;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void validate(RunConfig& cfg) {
  if (cfg.schemes.empty()) throw ConfigError("schemes", "at least one scheme is required");
  if (cfg.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (cfg.tau < 1) throw ConfigError("tau", "must be >= 1");
  if (cfg.problem == ProblemKind::kQuadratic && !(cfg.L >= cfg.mu)) {
    throw ConfigError("L", "must be >= mu");
  }
  if (cfg.problem == ProblemKind::kLogistic && cfg.classes < 2) {
    throw ConfigError("classes", "must be >= 2");
  }
  if (cfg.problem == ProblemKind::kMnist &&
      (cfg.mnist_images.empty() || cfg.mnist_labels.empty())) {
    throw ConfigError("mnist_images", "mnist problems need mnist_images and mnist_labels");
  }
  if (cfg.problem != ProblemKind::kQuadratic &&
      cfg.partition == data::PartitionMode::kNonIidLabelSorted &&
      cfg.num_devices % static_cast<std::size_t>(cfg.classes) != 0) {
    throw ConfigError("M", "label-sorted partition needs M divisible by the class count");
  }
  for (fed::Scheme s : cfg.schemes) {
    try {
      cfg.scheme_config(s).validate();
    } catch (const Error& e) {
      throw ConfigError("schemes", fed::to_string(s) + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Problem construction

std::unique_ptr<losses::Problem> build_problem(const RunConfig& cfg) {
  switch (cfg.problem) {
    case ProblemKind::kQuadratic: {
      losses::QuadraticSpec spec;
      spec.num_devices = cfg.num_devices;
      spec.dim = cfg.dim;
      spec.mu = cfg.mu;
      spec.L = cfg.L;
      spec.center_scale = cfg.center_scale;
      spec.heterogeneity = cfg.heterogeneity;
      spec.samples_per_device = cfg.samples_per_device;
      spec.sample_noise = cfg.sample_noise;
      spec.seed = cfg.problem_seed;
      return std::make_unique<losses::QuadraticProblem>(losses::make_quadratic(spec));
    }
    case ProblemKind::kLogistic: {
      losses::LogisticSpec spec;
      spec.num_devices = cfg.num_devices;
      spec.num_classes = cfg.classes;
      spec.num_features = cfg.features;
      spec.samples_per_class = cfg.samples_per_class;
      spec.test_per_class = cfg.test_per_class;
      spec.separation = cfg.separation;
      spec.lambda_reg = cfg.lambda_reg;
      spec.partition = cfg.partition;
      spec.seed = cfg.problem_seed;
      return std::make_unique<losses::LogisticProblem>(losses::make_logistic(spec));
    }
    case ProblemKind::kMnist: {
      auto train = data::with_bias_column(
          data::load_mnist(cfg.mnist_images, cfg.mnist_labels, cfg.mnist_limit));
      std::optional<data::Dataset> test;
      if (!cfg.mnist_test_images.empty() && !cfg.mnist_test_labels.empty()) {
        test = data::with_bias_column(data::load_mnist(cfg.mnist_test_images,
                                                       cfg.mnist_test_labels));
      }
      return std::make_unique<losses::LogisticProblem>(
          losses::make_logistic(train, std::move(test), cfg.num_devices, cfg.partition,
                                cfg.classes, cfg.lambda_reg, cfg.problem_seed));
    }
  }
  throw StructuralError("unknown problem kind");
}

// ---------------------------------------------------------------------------
// Bound overlay

struct BoundOverlay {
  std::vector<double> values;  // bound[0..T]
  std::string label;
  double G = 0.0;
  double epsilon = 0.0;
  std::vector<double> measured_eps_values;
};

bool overlay_applies(fed::Scheme s) {
  return s == fed::Scheme::kLfl || s == fed::Scheme::kLb || s == fed::Scheme::kLossless;
}

std::optional<BoundOverlay> make_overlay(const RunConfig& cfg, const fed::SchemeConfig& sc,
                                         const losses::OptimalityInfo& opt,
                                         const losses::Smoothness& smooth,
                                         const losses::Problem& problem,
                                         const std::vector<fed::RunResult>& results,
                                         double theta0_dist_sq, std::size_t T) {
  if (!overlay_applies(sc.scheme)) return std::nullopt;
  losses::GradBound g;
  double measured_eps = 0.0;
  for (const auto& r : results) {
    g.merge(r.grad_bound);
    measured_eps = std::max(measured_eps, r.epsilon.running_max());
  }
  theory::BoundParams p;
  p.mu = smooth.mu;
  p.L = smooth.L;
  p.G = g.G;
  p.gamma = opt.gamma;
  p.tau = sc.tau;
  p.q1 = sc.scheme == fed::Scheme::kLfl ? sc.q1 : std::nullopt;
  p.d = problem.dim();
  p.epsilon = cfg.bound_epsilon.value_or(measured_eps);
  p.lr = sc.lr;
  p.theta0_dist_sq = theta0_dist_sq;
  BoundOverlay overlay;
  try {
    for (std::size_t t = 0; t < T; ++t) theory::check_step(static_cast<std::int64_t>(t), p);
    overlay.values = theory::bound_trajectory(p, T);
  } catch (const DomainError&) {
    return std::nullopt;  // step-size hypothesis unmet
  }
  for (double v : overlay.values) {
    if (!std::isfinite(v)) return std::nullopt;
  }
  std::vector<std::string> tags;
  if (cfg.problem != ProblemKind::kQuadratic) tags.emplace_back("empirical-G");
  if (sc.q2) tags.emplace_back("exploratory");
  for (const auto& t : tags) overlay.label += (overlay.label.empty() ? "" : ",") + t;
  if (overlay.label.empty()) overlay.label = "theorem";
  overlay.G = p.G;
  overlay.epsilon = p.epsilon;
  // Alternate ε variant for reporting.
  theory::BoundParams alt = p;
  alt.epsilon = cfg.bound_epsilon ? measured_eps : 1e-3;
  overlay.measured_eps_values = theory::bound_trajectory(alt, T);
  return overlay;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string render_csv(fed::Scheme scheme, std::uint64_t seed, const fed::RunResult& r,
                       const std::optional<BoundOverlay>& overlay) {
  std::string out = kCsvHeader;
  out += '\n';
  const std::string name = fed::to_string(scheme);
  for (const auto& m : r.rounds) {
    std::optional<double> bound;
    if (overlay && m.round < overlay->values.size()) bound = overlay->values[m.round];
    out += std::to_string(m.round) + ',' + name + ',' + std::to_string(seed) + ',' +
           format_double(m.global_loss) + ',' + format_optional(m.dist_to_opt_sq) + ',' +
           format_double(m.bits_down_cum) + ',' + format_double(m.bits_up_cum) + ',' +
           format_double(m.epsilon_t) + ',' + format_optional(bound) + ',' +
           format_optional(m.test_accuracy) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary

struct CsvRow {
  std::uint64_t round = 0;
  double global_loss = 0.0;
  std::optional<double> dist;
  double bits_down = 0.0;
  double bits_up = 0.0;
  double epsilon = 0.0;
  std::optional<double> bound;
};

std::optional<double> optional_field(const std::string& key, const std::string& v) {
  if (v.empty()) return std::nullopt;
  return parse_double(key, v);
}

std::vector<CsvRow> read_run_csv(const fs::path& path, std::string& scheme) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw Error(path.string() + ": unexpected header");
  }
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 10) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected 10 fields");
    }
    try {
      CsvRow row;
      row.round = parse_uint("round", f[0]);
      if (scheme.empty()) scheme = f[1];
      if (f[1] != scheme) throw ConfigError("scheme", "mixed schemes in one file");
      row.global_loss = parse_double("global_loss", f[3]);
      row.dist = optional_field("dist_to_opt_sq", f[4]);
      row.bits_down = parse_double("bits_down_cum", f[5]);
      row.bits_up = parse_double("bits_up_cum", f[6]);
      row.epsilon = parse_double("epsilon_t", f[7]);
      row.bound = optional_field("bound_value", f[8]);
      rows.push_back(row);
    } catch (const ConfigError& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

bool is_run_csv(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.rfind("run_", 0) == 0 && p.extension() == ".csv";
}

}  // namespace

// ---------------------------------------------------------------------------

fed::SchemeConfig RunConfig::scheme_config(fed::Scheme scheme) const {
  fed::SchemeConfig sc;
  sc.scheme = scheme;
  sc.q1 = q1;
  sc.q2 = q2;
  if (scheme == fed::Scheme::kLtgm && ltgm_q1) sc.q1 = ltgm_q1;
  if (scheme == fed::Scheme::kLb) sc.q1 = std::nullopt;
  if (scheme == fed::Scheme::kLossless) {
    sc.q1 = std::nullopt;
    sc.q2 = std::nullopt;
  }
  sc.tau = tau;
  sc.lr = lr_decaying ? theory::LearningRate::decaying(alpha, beta)
                      : theory::LearningRate::constant(eta);
  sc.optimizer = optimizer;
  sc.batch_size = batch_size;
  sc.ltgm_randomize_signs = ltgm_randomize_signs;
  sc.ltgm_sign_seed = ltgm_sign_seed;
  return sc;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"schemes",
       [&](const auto& k, const auto& v) {
         cfg.schemes.clear();
         for (const auto& name : split(v, ',')) {
           try {
             cfg.schemes.push_back(fed::parse_scheme(name));
           } catch (const Error&) {
             throw ConfigError(k, "unknown scheme '" + name + "'");
           }
         }
       }},
      {"problem",
       [&](const auto& k, const auto& v) {
         const auto s = lower(v);
         if (s == "quadratic") cfg.problem = ProblemKind::kQuadratic;
         else if (s == "logistic") cfg.problem = ProblemKind::kLogistic;
         else if (s == "mnist") cfg.problem = ProblemKind::kMnist;
         else throw ConfigError(k, "expected quadratic, logistic or mnist");
       }},
      {"M", [&](const auto& k, const auto& v) { cfg.num_devices = parse_count(k, v); }},
      {"d", [&](const auto& k, const auto& v) { cfg.dim = parse_count(k, v); }},
      {"tau",
       [&](const auto& k, const auto& v) {
         const auto t = parse_count(k, v);
         if (t > 1000000) throw ConfigError(k, "too large");
         cfg.tau = static_cast<int>(t);
       }},
      {"T", [&](const auto& k, const auto& v) { cfg.rounds = parse_count(k, v); }},
      {"q1", [&](const auto& k, const auto& v) { cfg.q1 = parse_level(k, v); }},
      {"q2", [&](const auto& k, const auto& v) { cfg.q2 = parse_level(k, v); }},
      {"ltgm_q1", [&](const auto& k, const auto& v) { cfg.ltgm_q1 = parse_level(k, v); }},
      {"lr",
       [&](const auto& k, const auto& v) {
         const auto s = lower(v);
         if (s == "constant") cfg.lr_decaying = false;
         else if (s == "decay") cfg.lr_decaying = true;
         else throw ConfigError(k, "expected constant or decay");
       }},
      {"eta", [&](const auto& k, const auto& v) { cfg.eta = parse_positive(k, v); }},
      {"alpha", [&](const auto& k, const auto& v) { cfg.alpha = parse_positive(k, v); }},
      {"beta", [&](const auto& k, const auto& v) { cfg.beta = parse_positive(k, v); }},
      {"lr_cap", [&](const auto& k, const auto& v) { cfg.lr_cap = parse_bool(k, v); }},
      {"seeds", [&](const auto& k, const auto& v) { cfg.seeds = parse_seeds(k, v); }},
      {"partition",
       [&](const auto& k, const auto& v) {
         const auto s = lower(v);
         if (s == "iid") cfg.partition = data::PartitionMode::kIid;
         else if (s == "noniid") cfg.partition = data::PartitionMode::kNonIidLabelSorted;
         else throw ConfigError(k, "expected iid or noniid");
       }},
      {"output_dir",
       [&](const auto& k, const auto& v) {
         if (v.empty()) throw ConfigError(k, "must not be empty");
         cfg.output_dir = v;
       }},
      {"batch_size",
       [&](const auto& k, const auto& v) { cfg.batch_size = parse_uint(k, v); }},
      {"optimizer",
       [&](const auto& k, const auto& v) {
         const auto s = lower(v);
         if (s == "sgd") cfg.optimizer = fed::LocalOptimizer::kSgd;
         else if (s == "adam") cfg.optimizer = fed::LocalOptimizer::kAdam;
         else throw ConfigError(k, "expected sgd or adam");
       }},
      {"parallel", [&](const auto& k, const auto& v) { cfg.parallel = parse_bool(k, v); }},
      {"ltgm_randomize_signs",
       [&](const auto& k, const auto& v) { cfg.ltgm_randomize_signs = parse_bool(k, v); }},
      {"ltgm_sign_seed",
       [&](const auto& k, const auto& v) { cfg.ltgm_sign_seed = parse_uint(k, v); }},
      {"bound_epsilon",
       [&](const auto& k, const auto& v) {
         if (lower(v) == "measured") {
           cfg.bound_epsilon = std::nullopt;
           return;
         }
         const double e = parse_double(k, v);
         if (e < 0.0 || e > 1.0) throw ConfigError(k, "must be in [0, 1] or measured");
         cfg.bound_epsilon = e;
       }},
      {"problem_seed",
       [&](const auto& k, const auto& v) { cfg.problem_seed = parse_uint(k, v); }},
      {"mu", [&](const auto& k, const auto& v) { cfg.mu = parse_positive(k, v); }},
      {"L", [&](const auto& k, const auto& v) { cfg.L = parse_positive(k, v); }},
      {"center_scale",
       [&](const auto& k, const auto& v) {
         cfg.center_scale = parse_double(k, v);
         if (cfg.center_scale < 0.0) throw ConfigError(k, "must be >= 0");
       }},
      {"heterogeneity",
       [&](const auto& k, const auto& v) {
         cfg.heterogeneity = parse_double(k, v);
         if (cfg.heterogeneity < 0.0) throw ConfigError(k, "must be >= 0");
       }},
      {"samples_per_device",
       [&](const auto& k, const auto& v) { cfg.samples_per_device = parse_count(k, v); }},
      {"sample_noise",
       [&](const auto& k, const auto& v) {
         cfg.sample_noise = parse_double(k, v);
         if (cfg.sample_noise < 0.0) throw ConfigError(k, "must be >= 0");
       }},
      {"classes",
       [&](const auto& k, const auto& v) {
         const auto c = parse_count(k, v);
         if (c < 2 || c > 1000000) throw ConfigError(k, "must be >= 2");
         cfg.classes = static_cast<int>(c);
       }},
      {"features", [&](const auto& k, const auto& v) { cfg.features = parse_count(k, v); }},
      {"samples_per_class",
       [&](const auto& k, const auto& v) { cfg.samples_per_class = parse_count(k, v); }},
      {"test_per_class",
       [&](const auto& k, const auto& v) { cfg.test_per_class = parse_uint(k, v); }},
      {"separation",
       [&](const auto& k, const auto& v) { cfg.separation = parse_double(k, v); }},
      {"lambda_reg",
       [&](const auto& k, const auto& v) { cfg.lambda_reg = parse_positive(k, v); }},
      {"mnist_images", [&](const auto&, const auto& v) { cfg.mnist_images = v; }},
      {"mnist_labels", [&](const auto&, const auto& v) { cfg.mnist_labels = v; }},
      {"mnist_test_images", [&](const auto&, const auto& v) { cfg.mnist_test_images = v; }},
      {"mnist_test_labels", [&](const auto&, const auto& v) { cfg.mnist_test_labels = v; }},
      {"mnist_limit",
       [&](const auto& k, const auto& v) { cfg.mnist_limit = parse_uint(k, v); }},
      {"solve_optimum",
       [&](const auto& k, const auto& v) { cfg.solve_optimum = parse_bool(k, v); }},
  };

  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
    it->second(key, value);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

fs::path resolve_output_dir(const fs::path& dir) {
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv("LFL_OUTPUT_ROOT"); root && *root) {
    return fs::path(root) / dir;
  }
  return dir;
}

std::string csv_file_name(fed::Scheme scheme, std::uint64_t seed) {
  return "run_" + fed::to_string(scheme) + "_seed" + std::to_string(seed) + ".csv";
}

ExperimentReport run_experiment(const RunConfig& config) {
  ExperimentReport report;
  report.output_dir = resolve_output_dir(config.output_dir);
  fs::create_directories(report.output_dir);

  const auto problem = build_problem(config);
  const losses::Smoothness smooth = problem->estimate_smoothness();
  std::optional<losses::OptimalityInfo> opt;
  if (config.solve_optimum) opt = problem->solve_optimum();

  fed::RunOptions options;
  options.theta0.assign(problem->dim(), 0.0);
  if (opt) options.theta_star = opt->theta_star;
  options.policy = config.parallel ? ExecutionPolicy::kParallel : ExecutionPolicy::kSerial;
  const double theta0_dist_sq = opt ? squared_distance(options.theta0, opt->theta_star) : 0.0;

  for (fed::Scheme scheme : config.schemes) {
    fed::SchemeConfig sc = config.scheme_config(scheme);
    if (config.lr_cap) sc.lr_cap_mu = smooth.mu;

    std::vector<fed::RunResult> results;
    results.reserve(config.seeds.size());
    for (std::uint64_t seed : config.seeds) {
      results.push_back(fed::run(*problem, sc, config.rounds, seed, options));
    }

    std::optional<BoundOverlay> overlay;
    if (opt) {
      overlay = make_overlay(config, sc, *opt, smooth, *problem, results, theta0_dist_sq,
                             config.rounds);
    }

    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto seed = config.seeds[i];
      const auto& r = results[i];
      const fs::path csv = report.output_dir / csv_file_name(scheme, seed);
      write_text(csv, render_csv(scheme, seed, r, overlay));
      report.csv_files.push_back(csv);

      nlohmann::ordered_json meta;
      meta["scheme"] = fed::to_string(scheme);
      meta["seed"] = seed;
      meta["q1"] = to_string(sc.q1);
      meta["q2"] = to_string(sc.q2);
      meta["tau"] = sc.tau;
      meta["rounds_completed"] = r.rounds.size();
      meta["mu"] = smooth.mu;
      meta["L"] = smooth.L;
      meta["gamma"] = opt ? nlohmann::ordered_json(opt->gamma) : nlohmann::ordered_json();
      meta["G_run"] = r.grad_bound.G;
      meta["epsilon_running_mean"] = r.epsilon.running_mean();
      meta["epsilon_running_max"] = r.epsilon.running_max();
      if (overlay) {
        meta["bound_label"] = overlay->label;
        meta["bound_G"] = overlay->G;
        meta["bound_epsilon"] = overlay->epsilon;
        meta["bound_final"] = overlay->values.back();
        meta["bound_final_alternate_epsilon"] = overlay->measured_eps_values.back();
      } else {
        meta["bound_label"] = "";
      }
      fs::path meta_path = csv;
      meta_path.replace_extension(".meta.json");
      write_text(meta_path, meta.dump(2) + "\n");

      fs::path err_path = csv;
      err_path.replace_extension(".error");
      if (r.error) {
        write_text(err_path, "round " + std::to_string(r.rounds.size() + 1) + ": " +
                                 *r.error + "\n");
        report.errors.push_back(csv.filename().string() + ": " + *r.error);
      } else if (fs::exists(err_path)) {
        fs::remove(err_path);
      }
    }
  }
  summarize(report.output_dir);
  return report;
}

std::vector<SchemeSummary> summarize(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_run_csv(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw Error("no run CSVs in " + dir.string());
  std::sort(files.begin(), files.end());

  struct Accum {
    std::vector<double> final_loss;
    std::vector<double> final_dist;
    bool all_dist = true;
    double bits_down = 0.0;
    double bits_up = 0.0;
    double eps_sum = 0.0;
    double eps_max = 0.0;
    std::size_t eps_count = 0;
    std::size_t rounds = 0;
    // per round: sum of dist, count, bound
    std::map<std::uint64_t, std::pair<double, std::size_t>> dist_by_round;
    std::map<std::uint64_t, double> bound_by_round;
    std::vector<std::string> errors;
  };
  std::map<std::string, Accum> by_scheme;

  for (const auto& file : files) {
    std::string scheme;
    const auto rows = read_run_csv(file, scheme);
    if (scheme.empty()) {
      // Header-only file: run failed before the first round.
      const std::string stem = file.stem().string();
      scheme = stem.substr(4, stem.rfind("_seed") - 4);
    }
    Accum& acc = by_scheme[scheme];
    fs::path err = file;
    err.replace_extension(".error");
    if (fs::exists(err)) {
      std::ifstream in(err);
      std::string msg;
      std::getline(in, msg);
      acc.errors.push_back(file.filename().string() + ": " + msg);
    }
    if (rows.empty()) continue;
    const CsvRow& last = rows.back();
    acc.final_loss.push_back(last.global_loss);
    if (last.dist) acc.final_dist.push_back(*last.dist);
    else acc.all_dist = false;
    acc.bits_down = std::max(acc.bits_down, last.bits_down);
    acc.bits_up = std::max(acc.bits_up, last.bits_up);
    acc.rounds = std::max<std::size_t>(acc.rounds, rows.size());
    for (const auto& row : rows) {
      acc.eps_sum += row.epsilon;
      acc.eps_max = std::max(acc.eps_max, row.epsilon);
      ++acc.eps_count;
      if (row.dist) {
        auto& [sum, n] = acc.dist_by_round[row.round];
        sum += *row.dist;
        ++n;
      }
      if (row.bound) acc.bound_by_round[row.round] = *row.bound;
    }
  }

  std::vector<SchemeSummary> out;
  for (auto& [scheme, acc] : by_scheme) {
    SchemeSummary s;
    s.scheme = scheme;
    s.runs = acc.final_loss.size();
    s.rounds = acc.rounds;
    if (!acc.final_loss.empty()) {
      double mean = 0.0;
      for (double v : acc.final_loss) mean += v;
      mean /= static_cast<double>(acc.final_loss.size());
      double var = 0.0;
      for (double v : acc.final_loss) var += (v - mean) * (v - mean);
      s.final_loss_mean = mean;
      s.final_loss_std = acc.final_loss.size() > 1
                             ? std::sqrt(var / static_cast<double>(acc.final_loss.size() - 1))
                             : 0.0;
    }
    if (acc.all_dist && !acc.final_dist.empty()) {
      double mean = 0.0;
      for (double v : acc.final_dist) mean += v;
      s.final_dist_mean = mean / static_cast<double>(acc.final_dist.size());
    }
    s.bits_down_cum = acc.bits_down;
    s.bits_up_cum = acc.bits_up;
    s.epsilon_mean = acc.eps_count ? acc.eps_sum / static_cast<double>(acc.eps_count) : 0.0;
    s.epsilon_max = acc.eps_max;
    for (const auto& [round, bound] : acc.bound_by_round) {
      const auto it = acc.dist_by_round.find(round);
      if (it == acc.dist_by_round.end()) continue;
      ++s.bound_rounds;
      const double mean = it->second.first / static_cast<double>(it->second.second);
      if (mean > bound) ++s.bound_violations;
    }
    s.errors = acc.errors;
    out.push_back(std::move(s));
  }

  std::string csv =
      "scheme,runs,rounds,final_loss_mean,final_loss_std,final_dist_mean,bits_down_cum,"
      "bits_up_cum,epsilon_mean,epsilon_max,bound_rounds,bound_violations,errors\n";
  nlohmann::ordered_json json = nlohmann::ordered_json::array();
  for (const auto& s : out) {
    csv += s.scheme + ',' + std::to_string(s.runs) + ',' + std::to_string(s.rounds) + ',' +
           format_double(s.final_loss_mean) + ',' + format_double(s.final_loss_std) + ',' +
           format_optional(s.final_dist_mean) + ',' + format_double(s.bits_down_cum) + ',' +
           format_double(s.bits_up_cum) + ',' + format_double(s.epsilon_mean) + ',' +
           format_double(s.epsilon_max) + ',' + std::to_string(s.bound_rounds) + ',' +
           std::to_string(s.bound_violations) + ',' + std::to_string(s.errors.size()) + '\n';
    nlohmann::ordered_json j;
    j["scheme"] = s.scheme;
    j["runs"] = s.runs;
    j["rounds"] = s.rounds;
    j["final_loss_mean"] = s.final_loss_mean;
    j["final_loss_std"] = s.final_loss_std;
    j["final_dist_mean"] = s.final_dist_mean ? nlohmann::ordered_json(*s.final_dist_mean)
                                             : nlohmann::ordered_json();
    j["bits_down_cum"] = s.bits_down_cum;
    j["bits_up_cum"] = s.bits_up_cum;
    j["epsilon_mean"] = s.epsilon_mean;
    j["epsilon_max"] = s.epsilon_max;
    j["bound_rounds"] = s.bound_rounds;
    j["bound_violations"] = s.bound_violations;
    j["errors"] = s.errors;
    json.push_back(std::move(j));
  }
  write_text(dir / "summary.csv", csv);
  write_text(dir / "summary.json", json.dump(2) + "\n");
  return out;
}

}  // namespace lfl::experiment
