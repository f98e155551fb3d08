#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "ekfglm/config.hpp"

using namespace ekfglm;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in, "test.ini");
}

const char* kValid = R"(
# full experiment
[experiment]
horizon = 1000
replications = 4
master_seed = 99
grid_points_per_decade = 10

[process]
kind = logistic_switchmix
d = 11
theta_star = setting2
theta2 = misspec_theta2
label = misspec

[algorithm]
name = ekf
kind = ekf
p1_scale = 2.0

[algorithm]
name = trunc
kind = ekf_truncated
beta = 0.3
threshold_scale = 1e-10

[algorithm]
name = ons_s
kind = ons_averaged
exp_concavity = sampled
ball_radius = 2.5

[algorithm]
name = asgd_o
kind = asgd_oracle
)";

} // namespace

TEST_CASE("valid config parses with defaults and named thetas") {
    const ExperimentConfig cfg = parse(kValid);
    CHECK(cfg.horizon == 1000);
    CHECK(cfg.replications == 4);
    CHECK(cfg.master_seed == 99);
    CHECK(cfg.grid_points_per_decade == 10);
    CHECK(cfg.density_samples == 1'000'000);  // default
    CHECK(cfg.label == "misspec");
    CHECK(cfg.process.kind == ProcessKind::LogisticSwitchMix);
    CHECK(cfg.process.theta_star == named_theta("setting2"));
    CHECK(cfg.process.theta2 == named_theta("misspec_theta2"));
    REQUIRE(cfg.algorithms.size() == 4);
    CHECK(cfg.algorithms[0].p1_scale == 2.0);
    CHECK(cfg.algorithms[1].kind == AlgorithmKind::EkfTruncated);
    CHECK(cfg.algorithms[1].beta == 0.3);
    CHECK(cfg.algorithms[1].threshold_scale == 1e-10);
    CHECK(cfg.algorithms[2].exp_concavity == ExpConcavityRule::Sampled);
    CHECK(cfg.algorithms[2].ball_radius == 2.5);
    CHECK(cfg.algorithms[3].kind == AlgorithmKind::AsgdOracle);
}

TEST_CASE("explicit eval grid parses, sorts and validates") {
    const ExperimentConfig cfg = parse(R"(
[experiment]
horizon = 100
replications = 1
eval_grid = 50, 10, 100, 10
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = ekf
)");
    CHECK(cfg.eval_grid == std::vector<std::size_t>{10, 50, 100});

    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 100
replications = 1
eval_grid = 200
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = ekf
)"),
                      Catch::Matchers::ContainsSubstring("eval_grid entries"));
}

TEST_CASE("explicit theta lists parse") {
    const ExperimentConfig cfg = parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = linear_subgaussian
d = 3
theta_star = 1.5, -2, 0.25
sigma = 0.5
d_app_bias = 0.1
[algorithm]
name = ekf
kind = ekf
)");
    CHECK(cfg.process.theta_star == Vec{1.5, -2.0, 0.25});
    CHECK(cfg.process.sigma == 0.5);
    CHECK(cfg.process.d_app_bias == 0.1);
}

TEST_CASE("unknown keys, sections and kinds are errors") {
    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
typo_key = 3
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = ekf
)"),
                      Catch::Matchers::ContainsSubstring("unknown key 'typo_key'"));

    CHECK_THROWS_WITH(parse("[nonsense]\nx = 1\n"), Catch::Matchers::ContainsSubstring("unknown section"));
    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = quantile_regression
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = ekf
)"),
                      Catch::Matchers::ContainsSubstring("unknown process kind"));
}

TEST_CASE("missing required keys and sections are field-level errors") {
    CHECK_THROWS_WITH(parse("[experiment]\nhorizon = 10\n"),
                      Catch::Matchers::ContainsSubstring("missing required key 'replications'"));
    CHECK_THROWS_WITH(parse("[experiment]\nhorizon = 10\nreplications = 1\n"),
                      Catch::Matchers::ContainsSubstring("missing [process]"));
}

TEST_CASE("kind-restricted keys are rejected elsewhere") {
    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
sigma = 1.0
[algorithm]
name = a
kind = ekf
)"),
                      Catch::Matchers::ContainsSubstring("only apply to linear_subgaussian"));

    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = ekf
beta = 0.3
)"),
                      Catch::Matchers::ContainsSubstring("truncation keys"));

    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = asgd
gamma = 0.5
)"),
                      Catch::Matchers::ContainsSubstring("ONS keys"));
}

TEST_CASE("duplicate algorithm names and invalid truncation are rejected") {
    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = a
kind = ekf
[algorithm]
name = a
kind = asgd
)"),
                      Catch::Matchers::ContainsSubstring("duplicate algorithm name"));

    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = logistic_wellspec
d = 2
theta_star = 0,0
[algorithm]
name = t
kind = ekf_truncated
beta = 0.6
)"),
                      Catch::Matchers::ContainsSubstring("beta must lie in (0, 1/2)"));

    // Truncation needs a logistic process.
    CHECK_THROWS_WITH(parse(R"(
[experiment]
horizon = 10
replications = 1
[process]
kind = linear_subgaussian
d = 2
theta_star = 0,0
[algorithm]
name = t
kind = ekf_truncated
)"),
                      Catch::Matchers::ContainsSubstring("logistic process"));
}

TEST_CASE("malformed lines carry the line number") {
    CHECK_THROWS_WITH(parse("[experiment\n"), Catch::Matchers::ContainsSubstring("test.ini:1"));
    CHECK_THROWS_WITH(parse("[experiment]\nhorizon 10\n"), Catch::Matchers::ContainsSubstring("test.ini:2"));
    CHECK_THROWS_WITH(parse("key = 1\n"), Catch::Matchers::ContainsSubstring("outside of any [section]"));
    CHECK_THROWS_WITH(parse("[experiment]\nhorizon = ten\n"),
                      Catch::Matchers::ContainsSubstring("cannot parse integer"));
}

TEST_CASE("shipped example configs stay valid") {
    for (const char* name :
         {"benchmark_moderate.ini", "benchmark_degenerate.ini", "misspec.ini"}) {
        const std::string path = std::string(EKFGLM_SOURCE_ROOT) + "/docs/examples/" + name;
        INFO(path);
        const ExperimentConfig cfg = load_experiment_config(path);
        CHECK(cfg.horizon >= 1);
        CHECK(!cfg.algorithms.empty());
    }
    const std::string smoke = std::string(EKFGLM_SOURCE_ROOT) + "/tests/data/smoke.ini";
    CHECK(load_experiment_config(smoke).replications == 2);
}

TEST_CASE("params file parsing") {
    const std::string path = "/tmp/ekfglm_test_params.ini";
    {
        std::ofstream out(path);
        out << "# tau inputs\n";
        out << "d_x = 1.5\n";
        out << "delta = 0.1   # trailing comment\n";
    }
    const auto params = load_params_file(path);
    CHECK(params.at("d_x") == 1.5);
    CHECK(params.at("delta") == 0.1);
    CHECK_THROWS_AS(load_params_file("/nonexistent/file.ini"), ConfigError);
}
