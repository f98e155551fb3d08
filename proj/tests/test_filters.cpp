#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ekfglm/filters.hpp"
#include "ekfglm/linalg.hpp"
#include "ekfglm/models.hpp"
#include "ekfglm/rng.hpp"

using namespace ekfglm;

namespace {

EkfConfig gaussian_cfg(std::size_t d, double p1 = 1.0) {
    EkfConfig cfg{GlmModel::gaussian(), p1, Vec(d, 0.0), std::nullopt};
    return cfg;
}

EkfConfig logistic_cfg(std::size_t d, double p1 = 1.0) {
    EkfConfig cfg{GlmModel::logistic(), p1, Vec(d, 0.0), std::nullopt};
    return cfg;
}

std::vector<Observation> random_gaussian_stream(std::size_t d, std::size_t n, Rng& rng) {
    std::vector<Observation> stream;
    stream.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec x(d);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        stream.push_back({x, rng.uniform(-2.0, 2.0) + rng.normal()});
    }
    return stream;
}

std::vector<Observation> random_logistic_stream(std::size_t d, std::size_t n, Rng& rng) {
    std::vector<Observation> stream;
    stream.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec x(d);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        stream.push_back({x, rng.bernoulli(0.5) ? 1.0 : -1.0});
    }
    return stream;
}

} // namespace

TEST_CASE("single gaussian step matches the rank-one ridge solution") {
    // argmin (1-theta)^2/2 + theta^2/2 = 1/2, and P_2 = 1/2.
    FilterState s = make_initial_state(gaussian_cfg(1));
    s = ekf_step(std::move(s), {1.0}, 1.0, gaussian_cfg(1));
    CHECK(s.P(0, 0) == Catch::Approx(0.5));
    CHECK(s.theta[0] == Catch::Approx(0.5));
    CHECK(s.t == 2);
}

TEST_CASE("single logistic step from the origin") {
    // alpha_1 = sigmoid'(0)/1 = 1/4, P_2 = 1 - (1/4)/(5/4) = 4/5,
    // theta_2 = P_2 * 1/2 = 2/5.
    const EkfConfig cfg = logistic_cfg(1);
    FilterState s = make_initial_state(cfg);
    s = ekf_step(std::move(s), {1.0}, 1.0, cfg);
    CHECK(s.P(0, 0) == Catch::Approx(0.8));
    CHECK(s.theta[0] == Catch::Approx(0.4));
}

TEST_CASE("zero regressor is a no-op apart from the counter") {
    Rng rng(5);
    const EkfConfig cfg = logistic_cfg(3);
    FilterState s = make_initial_state(cfg);
    s = ekf_step(std::move(s), {0.5, -0.2, 0.1}, 1.0, cfg);
    const FilterState before = s;
    s = ekf_step(std::move(s), Vec(3, 0.0), -1.0, cfg);
    CHECK(s.t == before.t + 1);
    CHECK(s.theta == before.theta);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(s.P(i, j) == before.P(i, j));
}

TEST_CASE("step validation") {
    const EkfConfig cfg = gaussian_cfg(2);
    FilterState s = make_initial_state(cfg);
    CHECK_THROWS_AS(ekf_step(s, {1.0}, 1.0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(ekf_step(s, {1.0, std::nan("")}, 1.0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(ekf_step(s, {1.0, 1.0}, std::nan(""), cfg), std::invalid_argument);

    EkfConfig bad = gaussian_cfg(2);
    bad.truncation = Truncation{0.49, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(ekf_step(s, {1.0, 1.0}, 1.0, bad), std::invalid_argument);

    EkfConfig bad_beta = logistic_cfg(2);
    bad_beta.truncation = Truncation{0.5, 1.0};
    CHECK_THROWS_AS(bad_beta.validate(), std::invalid_argument);
}

TEST_CASE("averaged estimate is the running mean of iterates") {
    const EkfConfig cfg = gaussian_cfg(1);
    FilterState s = make_initial_state(cfg);
    CHECK(averaged_estimate(s)[0] == 0.0);  // t = 1: the initial point itself

    // theta_2 = 1/2 after the unit observation, so the mean of (0, 1/2) is 1/4.
    s = ekf_step(std::move(s), {1.0}, 1.0, cfg);
    CHECK(averaged_estimate(s)[0] == Catch::Approx(0.25));

    // Feed x = 0 so theta stays constant; the mean creeps toward theta.
    s = ekf_step(std::move(s), {0.0}, 0.0, cfg);
    CHECK(averaged_estimate(s)[0] == Catch::Approx((0.0 + 0.5 + 0.5) / 3.0));

    Rng rng(3);
    FilterState t = make_initial_state(gaussian_cfg(2));
    Vec manual_sum = t.theta;
    for (int i = 0; i < 50; ++i) {
        t = ekf_step(std::move(t), {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}, rng.normal(), gaussian_cfg(2));
        manual_sum = manual_sum + t.theta;
    }
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(averaged_estimate(t)[i] == Catch::Approx(manual_sum[i] / 51.0).margin(1e-12));
}

TEST_CASE("empty stream records only the initial state") {
    const TrajectoryRecord rec = run_trajectory(gaussian_cfg(2), {});
    CHECK(rec.entries.empty());
    CHECK(rec.final_state.t == 1);
    CHECK(rec.final_state.theta == Vec(2, 0.0));
}

TEST_CASE("gaussian trajectory matches the regularized least-squares closed form") {
    Rng rng(11);
    const EkfConfig cfg = gaussian_cfg(3, 2.0);
    const auto stream = random_gaussian_stream(3, 10, rng);
    const TrajectoryRecord rec = run_trajectory(cfg, stream);

    SymMatrix gram = SymMatrix::identity(3, 1.0 / cfg.p1_scale);
    Vec rhs(3, 0.0);
    for (const Observation& obs : stream) {
        gram.add_outer(obs.x, 1.0);
        for (std::size_t i = 0; i < 3; ++i) rhs[i] += obs.y * obs.x[i];
    }
    const Vec direct = solve_pd(gram, rhs);
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE(rec.final_state.theta[i] == Catch::Approx(direct[i]).margin(1e-10));
}

TEST_CASE("gaussian update identity (I - P_{t+1} x x^T) P_t = P_{t+1}") {
    Rng rng(17);
    const EkfConfig cfg = gaussian_cfg(4);
    FilterState s = make_initial_state(cfg);
    for (int step = 0; step < 25; ++step) {
        Vec x(4);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        const SymMatrix p_t = s.P;
        s = ekf_step(std::move(s), x, rng.normal(), cfg);
        const SymMatrix& p_next = s.P;

        // (I - P_{t+1} x x^T) P_t, built column by column.
        const Vec px_next = p_next.apply(x);
        double dev = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double xp_t = 0.0;
                for (std::size_t k = 0; k < 4; ++k) xp_t += x[k] * p_t(k, j);
                const double lhs = p_t(i, j) - px_next[i] * xp_t;
                dev += (lhs - p_next(i, j)) * (lhs - p_next(i, j));
            }
        REQUIRE(std::sqrt(dev) <= 1e-10 * p_t.frobenius_norm());
    }
}

TEST_CASE("P stays positive definite and below P_1 in the Loewner order") {
    Rng rng(23);
    const EkfConfig cfg = logistic_cfg(5, 3.0);
    const auto stream = random_logistic_stream(5, 200, rng);
    const TrajectoryRecord rec = run_trajectory(cfg, stream, {1, true, false});
    for (const TrajectoryEntry& e : rec.entries) {
        REQUIRE(e.lambda_min_p > 0.0);
        REQUIRE(e.lambda_max_p <= cfg.p1_scale * (1.0 + 1e-12));
    }
    const SymMatrix gap = SymMatrix::identity(5, cfg.p1_scale) - rec.final_state.P;
    REQUIRE(eigen_extremes(gap).lambda_min >= -1e-12 * cfg.p1_scale);
}

TEST_CASE("truncation floor binds exactly when it exceeds the curvature") {
    // With c = 1 and beta = 0.49 the floor t^{-0.49} exceeds the logistic
    // curvature bound 1/4 for all t <= 16, so those steps are truncated no
    // matter the data; past t = 4^{1/0.49} ~ 16.9 the flag follows the
    // pointwise comparison.
    Rng rng(29);
    EkfConfig cfg = logistic_cfg(2);
    cfg.truncation = Truncation{0.49, 1.0};
    const auto stream = random_logistic_stream(2, 200, rng);
    const TrajectoryRecord rec = run_trajectory(cfg, stream, {1, false, false});
    for (const TrajectoryEntry& e : rec.entries) {
        const double floor = 1.0 / std::pow(static_cast<double>(e.t), 0.49);
        const double curv = evaluate(cfg.model, e.y, dot(e.theta, e.x)).curv_scalar;
        REQUIRE(e.truncated == (floor > curv));
        if (e.t <= 16) REQUIRE(e.truncated);
    }
}

TEST_CASE("truncated and plain updates coincide where the curvature clears the floor") {
    Rng rng(31);
    EkfConfig trunc_cfg = logistic_cfg(2);
    trunc_cfg.truncation = Truncation{0.2, 1e-10};  // floor never binds at this scale
    const EkfConfig plain_cfg = logistic_cfg(2);
    const auto stream = random_logistic_stream(2, 100, rng);

    FilterState a = make_initial_state(trunc_cfg);
    FilterState b = make_initial_state(plain_cfg);
    for (const Observation& obs : stream) {
        a = ekf_step(std::move(a), obs.x, obs.y, trunc_cfg);
        b = ekf_step(std::move(b), obs.x, obs.y, plain_cfg);
        REQUIRE_FALSE(a.truncated_last);
        REQUIRE(a.theta == b.theta);  // bitwise
    }
}

TEST_CASE("trajectories are bit-for-bit reproducible") {
    Rng rng(37);
    const auto stream = random_logistic_stream(3, 150, rng);
    const EkfConfig cfg = logistic_cfg(3);
    const TrajectoryRecord a = run_trajectory(cfg, stream);
    const TrajectoryRecord b = run_trajectory(cfg, stream);
    REQUIRE(a.final_state.theta == b.final_state.theta);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) REQUIRE(a.final_state.P(i, j) == b.final_state.P(i, j));
}

TEST_CASE("thinned recording keeps the first, strided and final steps") {
    Rng rng(41);
    const auto stream = random_gaussian_stream(2, 10, rng);
    const TrajectoryRecord rec = run_trajectory(gaussian_cfg(2), stream, {4, false, false});
    std::vector<std::size_t> ts;
    for (const auto& e : rec.entries) ts.push_back(e.t);
    REQUIRE(ts == std::vector<std::size_t>{1, 5, 9, 10});
}

TEST_CASE("step errors carry the offending step index") {
    std::vector<Observation> stream = {{Vec{1.0, 0.0}, 1.0}, {Vec{1.0}, -1.0}};
    try {
        run_trajectory(logistic_cfg(2), stream);
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
}
