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

#include <catch2/catch.hpp>
#include <string>
#include <vector>

#include "picekit/config.hpp"

namespace {

std::string base_lqg_config() {
  return R"(# scalar linear-quadratic run
experiment = "lqg"
seed = 7

[time]
dt = 0.01

[lqg]
Q = 2.0
R = 1.0
nu = 0.1
T = 5.0
x0 = 2.0

[pice]
mode = "gradient_static"
iterations = 500
samples = 50
eta = 0.1
)";
}

picekit::ExperimentConfig resolve(const std::string& text, std::vector<std::string>& problems) {
  return picekit::resolve_config(picekit::parse_config_text(text), problems);
}

}  // namespace

TEST_CASE("the reader understands sections, comments and value types", "[config]") {
  const auto map = picekit::parse_config_text(R"(
top = 3            # trailing comment
flag = true
name = "hello world"

[a.b]
x = -1.5e2
count = 12
)");
  REQUIRE(map.at("top").integer == 3);
  REQUIRE(map.at("flag").boolean == true);
  REQUIRE(map.at("name").text == "hello world");
  REQUIRE(map.at("a.b.x").number == Approx(-150.0));
  REQUIRE(map.at("a.b.count").kind == picekit::ConfigValue::Kind::kInt);
}

TEST_CASE("syntax problems are reported with line numbers", "[config]") {
  REQUIRE_THROWS_WITH(picekit::parse_config_text("x == 1\n"),
                      Catch::Contains("line 1"));
  REQUIRE_THROWS_WITH(picekit::parse_config_text("a = 1\na = 2\n"),
                      Catch::Contains("duplicate"));
  REQUIRE_THROWS_WITH(picekit::parse_config_text("[broken\n"),
                      Catch::Contains("section"));
  REQUIRE_THROWS_WITH(picekit::parse_config_text("k = \"open\n"),
                      Catch::Contains("unterminated"));
}

TEST_CASE("a complete configuration resolves cleanly", "[config]") {
  std::vector<std::string> problems;
  const auto cfg = resolve(base_lqg_config(), problems);
  REQUIRE(problems.empty());
  REQUIRE(cfg.experiment == "lqg");
  REQUIRE(cfg.seed == 7);
  REQUIRE(cfg.lqg.q == 2.0);
  REQUIRE(cfg.pice.iterations == 500);
  REQUIRE(cfg.pice.mode == picekit::PiceMode::kGradientStatic);
  // Defaults are materialized into the echo.
  REQUIRE(cfg.echo.at("out") == "out");
  REQUIRE(cfg.echo.at("time").at("t0") == 0.0);
  REQUIRE(cfg.echo.at("pice").at("ridge") == -1.0);
}

TEST_CASE("unknown keys are rejected by name", "[config]") {
  std::vector<std::string> problems;
  resolve(base_lqg_config() + "\n[pice]\n", problems);  // duplicate section header is fine
  REQUIRE(problems.empty());

  problems.clear();
  resolve(base_lqg_config() + "typo_key = 1\n", problems);
  REQUIRE(problems.size() == 1);
  REQUIRE(problems[0].find("typo_key") != std::string::npos);
}

TEST_CASE("schema violations name the offending key", "[config]") {
  std::vector<std::string> problems;
  std::string text = base_lqg_config();
  text.replace(text.find("dt = 0.01"), 9, "dt = -0.5");
  resolve(text, problems);
  REQUIRE_FALSE(problems.empty());
  REQUIRE(problems[0].find("time.dt") != std::string::npos);
}

TEST_CASE("a declared temperature must match R nu", "[config]") {
  std::vector<std::string> problems;
  const auto good = resolve(base_lqg_config() + "\n[lqg]\nlambda = 0.1\n", problems);
  REQUIRE(problems.empty());
  REQUIRE_FALSE(picekit::lambda_coupling_violation(good).has_value());

  problems.clear();
  std::string text = base_lqg_config();
  text += "\n[lqg]\nlambda = 0.2\n";
  const auto bad = resolve(text, problems);
  REQUIRE(problems.empty());
  const auto violation = picekit::lambda_coupling_violation(bad);
  REQUIRE(violation.has_value());
  REQUIRE(violation->find("lambda") != std::string::npos);
}

TEST_CASE("overrides rewrite values with dotted paths", "[config]") {
  auto map = picekit::parse_config_text(base_lqg_config());
  picekit::apply_override(map, "pice.iterations=0");
  picekit::apply_override(map, "seed=99");
  picekit::apply_override(map, "pice.mode=closed_form_static");  // bare word as string
  std::vector<std::string> problems;
  const auto cfg = picekit::resolve_config(map, problems);
  REQUIRE(problems.empty());
  REQUIRE(cfg.pice.iterations == 0);
  REQUIRE(cfg.seed == 99);
  REQUIRE(cfg.pice.mode == picekit::PiceMode::kClosedFormStatic);

  REQUIRE_THROWS_AS(picekit::apply_override(map, "no_equals"), picekit::ConfigError);
}

TEST_CASE("unknown modes and experiments are violations", "[config]") {
  std::vector<std::string> problems;
  std::string text = base_lqg_config();
  text.replace(text.find("gradient_static"), 15, "gradient_sttic!");
  resolve(text, problems);
  REQUIRE_FALSE(problems.empty());

  problems.clear();
  resolve("experiment = \"quantum\"\n[time]\ndt = 0.1\n", problems);
  REQUIRE_FALSE(problems.empty());
}

TEST_CASE("smoother configuration resolves with its own section", "[config]") {
  std::vector<std::string> problems;
  const auto cfg = resolve(R"(
experiment = "smoother"
seed = 3

[time]
dt = 0.01

[smoother]
T = 1.0
iterations = 22
particles = 6000
model_seed = 12
)",
                           problems);
  REQUIRE(problems.empty());
  REQUIRE(cfg.smoother.config.iterations == 22);
  REQUIRE(cfg.smoother.config.particles == 6000);
  REQUIRE(cfg.smoother.model_seed == 12);
  REQUIRE(cfg.smoother.sigma_dyn_sq == 0.2);
  REQUIRE(cfg.smoother.observations_path.empty());
}
