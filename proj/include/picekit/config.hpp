// Copyright 2026 The picekit authors
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

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "picekit/benchmarks.hpp"
#include "picekit/csv.hpp"
#include "picekit/errors.hpp"
#include "picekit/pice.hpp"
#include "picekit/smoother.hpp"

namespace picekit {

// ---------------------------------------------------------------------------
// Minimal TOML-style reader: [section] headers, key = value pairs, # comments.
// Values are strings ("..."), booleans, integers or floats. Keys are reported
// with their dotted path so schema errors name the offending entry.
// ---------------------------------------------------------------------------

struct ConfigValue {
  enum class Kind { kString, kBool, kInt, kFloat };
  Kind kind = Kind::kString;
  std::string text;
  bool boolean = false;
  std::int64_t integer = 0;
  double number = 0.0;
  int line = 0;
};

using ConfigMap = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool valid_key(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

inline ConfigValue parse_value(const std::string& raw, int line, const std::string& key) {
  ConfigValue v;
  v.line = line;
  const std::string t = trim(raw);
  if (t.empty()) throw ConfigError("config line " + std::to_string(line) + ": empty value for '" + key + "'");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') {
      throw ConfigError("config line " + std::to_string(line) + ": unterminated string for '" +
                        key + "'");
    }
    v.kind = ConfigValue::Kind::kString;
    v.text = t.substr(1, t.size() - 2);
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = ConfigValue::Kind::kBool;
    v.boolean = (t == "true");
    v.text = t;
    return v;
  }
  // Numbers: integer when it parses fully without '.', 'e' or 'E'.
  try {
    std::size_t used = 0;
    if (t.find_first_of(".eE") == std::string::npos) {
      const std::int64_t i = std::stoll(t, &used);
      if (used == t.size()) {
        v.kind = ConfigValue::Kind::kInt;
        v.integer = i;
        v.number = static_cast<double>(i);
        v.text = t;
        return v;
      }
    }
    const double d = std::stod(t, &used);
    if (used == t.size()) {
      v.kind = ConfigValue::Kind::kFloat;
      v.number = d;
      v.text = t;
      return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config line " + std::to_string(line) + ": cannot parse value '" + t +
                    "' for '" + key + "'");
}

}  // namespace detail

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!detail::valid_key(section)) {
        throw ConfigError("config line " + std::to_string(line_no) + ": invalid section name '" +
                          section + "'");
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (!detail::valid_key(key)) {
      throw ConfigError("config line " + std::to_string(line_no) + ": invalid key '" + key + "'");
    }
    const std::string dotted = section.empty() ? key : section + "." + key;
    if (map.count(dotted) != 0) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + dotted +
                        "'");
    }
    map[dotted] = detail::parse_value(line.substr(eq + 1), line_no, dotted);
  }
  return map;
}

inline ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

/// Applies one `--set section.key=value` override on top of a parsed file.
inline void apply_override(ConfigMap& map, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = detail::trim(assignment.substr(0, eq));
  if (!detail::valid_key(key)) throw ConfigError("--set: invalid key '" + key + "'");
  const std::string raw = detail::trim(assignment.substr(eq + 1));
  ConfigValue value;
  try {
    value = detail::parse_value(raw, 0, key);
  } catch (const ConfigError&) {
    value.kind = ConfigValue::Kind::kString;  // bare words act as strings
    value.text = raw;
  }
  map[key] = value;
}

// ---------------------------------------------------------------------------
// Schema: pulls typed fields out of the map, records the fully resolved
// configuration for the result file, and flags unknown or ill-typed keys.
// ---------------------------------------------------------------------------

class SchemaReader {
 public:
  explicit SchemaReader(ConfigMap map) : map_(std::move(map)) {}

  double number(const std::string& key, double fallback) {
    const ConfigValue* v = consume(key);
    if (v == nullptr) return record(key, fallback);
    if (v->kind != ConfigValue::Kind::kFloat && v->kind != ConfigValue::Kind::kInt) {
      fail(key, "expected a number");
      return record(key, fallback);
    }
    return record(key, v->number);
  }

  std::optional<double> optional_number(const std::string& key) {
    const ConfigValue* v = consume(key);
    if (v == nullptr) return std::nullopt;
    if (v->kind != ConfigValue::Kind::kFloat && v->kind != ConfigValue::Kind::kInt) {
      fail(key, "expected a number");
      return std::nullopt;
    }
    return record(key, v->number);
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const ConfigValue* v = consume(key);
    if (v == nullptr) {
      echo_[json_path(key)] = fallback;
      return fallback;
    }
    if (v->kind != ConfigValue::Kind::kInt) {
      fail(key, "expected an integer");
      echo_[json_path(key)] = fallback;
      return fallback;
    }
    echo_[json_path(key)] = v->integer;
    return v->integer;
  }

  bool boolean(const std::string& key, bool fallback) {
    const ConfigValue* v = consume(key);
    if (v == nullptr) {
      echo_[json_path(key)] = fallback;
      return fallback;
    }
    if (v->kind != ConfigValue::Kind::kBool) {
      fail(key, "expected true or false");
      echo_[json_path(key)] = fallback;
      return fallback;
    }
    echo_[json_path(key)] = v->boolean;
    return v->boolean;
  }

  std::string text(const std::string& key, const std::string& fallback, bool required = false) {
    const ConfigValue* v = consume(key);
    if (v == nullptr) {
      if (required) fail(key, "missing required key");
      echo_[json_path(key)] = fallback;
      return fallback;
    }
    if (v->kind != ConfigValue::Kind::kString) {
      fail(key, "expected a string");
      echo_[json_path(key)] = fallback;
      return fallback;
    }
    echo_[json_path(key)] = v->text;
    return v->text;
  }

  void check(bool condition, const std::string& key, const std::string& message) {
    if (!condition) fail(key, message);
  }

  /// Flags every key that no schema rule consumed.
  void finish() {
    for (const auto& [key, value] : map_) {
      if (used_.count(key) == 0) {
        violations_.push_back("unknown key '" + key + "' (line " + std::to_string(value.line) +
                              ")");
      }
    }
  }

  const std::vector<std::string>& violations() const { return violations_; }
  const nlohmann::json& echo() const { return echo_; }

 private:
  const ConfigValue* consume(const std::string& key) {
    used_.insert(key);
    const auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }

  double record(const std::string& key, double value) {
    echo_[json_path(key)] = value;
    return value;
  }

  nlohmann::json::json_pointer json_path(const std::string& key) const {
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    return nlohmann::json::json_pointer(pointer);
  }

  void fail(const std::string& key, const std::string& message) {
    violations_.push_back("key '" + key + "': " + message);
  }

  ConfigMap map_;
  std::set<std::string> used_;
  std::vector<std::string> violations_;
  nlohmann::json echo_;
};

// ---------------------------------------------------------------------------
// Resolved experiment configuration.
// ---------------------------------------------------------------------------

struct SmootherSetup {
  double sigma_dyn_sq = 0.2;
  double sigma_obs = 0.2;
  double horizon = 1.0;
  std::int64_t num_observations = 12;
  std::uint64_t model_seed = 1;
  double coupling_std = 25.0;
  double bias_std = 0.75;
  std::string observations_path;  // empty: simulate from the seeded model
  SmootherConfig config;
};

struct ExperimentConfig {
  std::string experiment;  // lqg | pendulum | smoother
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  double t0 = 0.0;
  double dt = 0.0;
  double divergence_bound = 1e6;

  LqgSpec lqg;
  PendulumSpec pendulum;
  SmootherSetup smoother;
  PiceConfig pice;
  std::optional<double> declared_lambda;

  nlohmann::json echo;  // fully resolved key/value view
};

/// Builds the resolved configuration, collecting schema violations instead of
/// stopping at the first problem. `run` must only proceed when the returned
/// violation list is empty.
inline ExperimentConfig resolve_config(const ConfigMap& map, std::vector<std::string>& violations) {
  SchemaReader reader(map);
  ExperimentConfig cfg;

  cfg.experiment = reader.text("experiment", "", true);
  reader.check(cfg.experiment == "lqg" || cfg.experiment == "pendulum" ||
                   cfg.experiment == "smoother" || cfg.experiment.empty(),
               "experiment", "must be one of lqg, pendulum, smoother");
  cfg.seed = static_cast<std::uint64_t>(reader.integer("seed", 0));
  cfg.out_dir = reader.text("out", "out");

  cfg.t0 = reader.number("time.t0", 0.0);
  cfg.dt = reader.number("time.dt", 0.01);
  reader.check(cfg.dt > 0.0 && std::isfinite(cfg.dt), "time.dt", "must be positive");

  cfg.divergence_bound = reader.number("rollout.divergence_bound", 1e6);
  reader.check(cfg.divergence_bound > 0.0, "rollout.divergence_bound", "must be positive");

  if (cfg.experiment == "lqg") {
    cfg.lqg.q = reader.number("lqg.Q", 2.0);
    cfg.lqg.r = reader.number("lqg.R", 1.0);
    cfg.lqg.nu = reader.number("lqg.nu", 0.1);
    cfg.lqg.horizon = reader.number("lqg.T", 5.0);
    cfg.lqg.x0 = reader.number("lqg.x0", 2.0);
    cfg.lqg.dt = cfg.dt;
    cfg.declared_lambda = reader.optional_number("lqg.lambda");
    reader.check(cfg.lqg.q > 0.0, "lqg.Q", "must be positive");
    reader.check(cfg.lqg.r > 0.0, "lqg.R", "must be positive");
    reader.check(cfg.lqg.nu > 0.0, "lqg.nu", "must be positive");
    reader.check(cfg.lqg.horizon > 0.0, "lqg.T", "must be positive");
  } else if (cfg.experiment == "pendulum") {
    cfg.pendulum.q1 = reader.number("pendulum.Q1", 2.0);
    cfg.pendulum.q2 = reader.number("pendulum.Q2", 0.02);
    cfg.pendulum.r = reader.number("pendulum.R", 1.0);
    cfg.pendulum.nu = reader.number("pendulum.nu", 0.3);
    cfg.pendulum.horizon = reader.number("pendulum.T", 5.0);
    cfg.pendulum.bins_angle = static_cast<int>(reader.integer("pendulum.k1", 20));
    cfg.pendulum.bins_velocity = static_cast<int>(reader.integer("pendulum.k2", 40));
    cfg.pendulum.velocity_min = reader.number("pendulum.v_min", -2.0);
    cfg.pendulum.velocity_max = reader.number("pendulum.v_max", 2.0);
    cfg.pendulum.jitter = reader.number("pendulum.jitter", 0.02);
    cfg.pendulum.dt = cfg.dt;
    cfg.declared_lambda = reader.optional_number("pendulum.lambda");
    reader.check(cfg.pendulum.q1 > 0.0, "pendulum.Q1", "must be positive");
    reader.check(cfg.pendulum.q2 > 0.0, "pendulum.Q2", "must be positive");
    reader.check(cfg.pendulum.r > 0.0, "pendulum.R", "must be positive");
    reader.check(cfg.pendulum.nu > 0.0, "pendulum.nu", "must be positive");
    reader.check(cfg.pendulum.horizon > 0.0, "pendulum.T", "must be positive");
    reader.check(cfg.pendulum.bins_angle >= 1, "pendulum.k1", "must be at least 1");
    reader.check(cfg.pendulum.bins_velocity >= 1, "pendulum.k2", "must be at least 1");
    reader.check(cfg.pendulum.velocity_max > cfg.pendulum.velocity_min, "pendulum.v_max",
                 "velocity box is empty");
    reader.check(cfg.pendulum.jitter >= 0.0, "pendulum.jitter", "must be non-negative");
  } else if (cfg.experiment == "smoother") {
    cfg.smoother.sigma_dyn_sq = reader.number("smoother.sigma_dyn_sq", 0.2);
    cfg.smoother.sigma_obs = reader.number("smoother.sigma_obs", 0.2);
    cfg.smoother.horizon = reader.number("smoother.T", 1.0);
    cfg.smoother.num_observations =
        reader.integer("smoother.num_observations", 12);
    cfg.smoother.model_seed = static_cast<std::uint64_t>(reader.integer("smoother.model_seed", 1));
    cfg.smoother.coupling_std = reader.number("smoother.coupling_std", 25.0);
    cfg.smoother.bias_std = reader.number("smoother.bias_std", 0.75);
    cfg.smoother.observations_path = reader.text("smoother.observations", "");
    cfg.smoother.config.iterations = reader.integer("smoother.iterations", 22);
    cfg.smoother.config.particles = reader.integer("smoother.particles", 6000);
    cfg.smoother.config.open_loop = reader.boolean("smoother.open_loop", false);
    cfg.smoother.config.ridge = reader.number("smoother.ridge", 0.5);
    cfg.smoother.config.defensive_mix = reader.number("smoother.defensive_mix", 0.2);
    reader.check(cfg.smoother.config.defensive_mix >= 0.0 && cfg.smoother.config.defensive_mix < 1.0,
                 "smoother.defensive_mix", "must lie in [0, 1)");
    reader.check(cfg.smoother.sigma_dyn_sq > 0.0, "smoother.sigma_dyn_sq", "must be positive");
    reader.check(cfg.smoother.sigma_obs > 0.0, "smoother.sigma_obs", "must be positive");
    reader.check(cfg.smoother.horizon > 0.0, "smoother.T", "must be positive");
    reader.check(cfg.smoother.num_observations >= 0, "smoother.num_observations",
                 "must be non-negative");
    reader.check(cfg.smoother.config.iterations >= 1, "smoother.iterations",
                 "must be at least 1");
    reader.check(cfg.smoother.config.particles >= 2, "smoother.particles",
                 "need at least 2 particles");
  }

  if (cfg.experiment == "lqg" || cfg.experiment == "pendulum") {
    const std::string mode = reader.text("pice.mode", "gradient_static");
    try {
      cfg.pice.mode = pice_mode_from_string(mode);
    } catch (const ConfigError& e) {
      violations.push_back(e.what());
    }
    cfg.pice.iterations = reader.integer("pice.iterations", 500);
    cfg.pice.samples = reader.integer("pice.samples", 50);
    cfg.pice.learning_rate = reader.number("pice.eta", 0.1);
    cfg.pice.ridge = reader.number("pice.ridge", -1.0);
    cfg.pice.seed = cfg.seed;
    reader.check(cfg.pice.iterations >= 0, "pice.iterations", "must be non-negative");
    reader.check(cfg.pice.samples >= 2, "pice.samples", "need at least 2 rollouts");
    reader.check(cfg.pice.learning_rate > 0.0, "pice.eta", "must be positive");
  }

  reader.finish();
  for (const std::string& v : reader.violations()) violations.push_back(v);
  cfg.echo = reader.echo();
  return cfg;
}

/// The lambda = R nu consistency result for `validate`, phrased as a message.
inline std::optional<std::string> lambda_coupling_violation(const ExperimentConfig& cfg) {
  double r = 0.0, nu = 0.0;
  if (cfg.experiment == "lqg") {
    r = cfg.lqg.r;
    nu = cfg.lqg.nu;
  } else if (cfg.experiment == "pendulum") {
    r = cfg.pendulum.r;
    nu = cfg.pendulum.nu;
  } else {
    return std::nullopt;  // smoother derives lambda, nothing declared
  }
  const double implied = r * nu;
  if (cfg.declared_lambda.has_value()) {
    const double declared = *cfg.declared_lambda;
    if (std::abs(declared - implied) > 1e-10 * std::max(std::abs(declared), implied)) {
      return "lambda coupling violated: declared lambda = " + format_number(declared) +
             " but R * nu = " + format_number(implied);
    }
  }
  return std::nullopt;
}

}  // namespace picekit
