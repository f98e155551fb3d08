#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "ekfglm/linalg.hpp"
#include "ekfglm/rng.hpp"

using namespace ekfglm;

namespace {

Eigen::MatrixXd to_eigen(const SymMatrix& m) {
    Eigen::MatrixXd out(m.dim(), m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i)
        for (std::size_t j = 0; j < m.dim(); ++j) out(i, j) = m(i, j);
    return out;
}

SymMatrix random_pd(std::size_t d, Rng& rng, double diag_boost = 0.5) {
    SymMatrix m(d, diag_boost);
    for (int k = 0; k < static_cast<int>(2 * d); ++k) {
        Vec v(d);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        m.add_outer(v, rng.uniform(0.05, 1.0));
    }
    return m;
}

Vec random_vec(std::size_t d, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Vec v(d);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

} // namespace

TEST_CASE("quad_form basic values") {
    SymMatrix id2 = SymMatrix::identity(2);
    CHECK(quad_form(id2, {3.0, 4.0}) == Catch::Approx(25.0));

    SymMatrix diag(2);
    diag.set(0, 0, 2.0);
    diag.set(1, 1, 1.0);
    CHECK(quad_form(diag, {1.0, 1.0}) == Catch::Approx(3.0));

    CHECK(quad_form(diag, {0.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(quad_form(diag, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("sherman_morrison_shrink on the identity") {
    SymMatrix p = SymMatrix::identity(2);
    SymMatrix p2 = sherman_morrison_shrink(p, {1.0, 0.0}, 1.0);
    // Oracle: invert, add xx^T, invert back -> diag(1/2, 1).
    CHECK(p2(0, 0) == Catch::Approx(0.5));
    CHECK(p2(1, 1) == Catch::Approx(1.0));
    CHECK(p2(0, 1) == Catch::Approx(0.0));
}

TEST_CASE("sherman_morrison_shrink degenerate cases leave P unchanged") {
    Rng rng(7);
    SymMatrix p = random_pd(4, rng);
    const Vec x = random_vec(4, rng);

    SymMatrix same_alpha0 = sherman_morrison_shrink(p, x, 0.0);
    SymMatrix same_x0 = sherman_morrison_shrink(p, Vec(4, 0.0), 1.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(same_alpha0(i, j) == p(i, j));
            CHECK(same_x0(i, j) == p(i, j));
        }
}

TEST_CASE("sherman_morrison_shrink input validation") {
    SymMatrix p = SymMatrix::identity(3);
    CHECK_THROWS_AS(sherman_morrison_shrink(p, {1.0, 2.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(sherman_morrison_shrink(p, {1.0, 2.0, 3.0}, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(sherman_morrison_shrink(p, {1.0, std::nan(""), 3.0}, 1.0), std::invalid_argument);
}

TEST_CASE("sherman_morrison_shrink inverse consistency and Loewner order") {
    Rng rng(42);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform01() * 19);
        SymMatrix p = random_pd(d, rng);
        const Vec x = random_vec(d, rng);
        const double alpha = rng.uniform(0.0, 3.0);
        SymMatrix p2 = sherman_morrison_shrink(p, x, alpha);

        // (P')^{-1} == P^{-1} + alpha x x^T within 1e-8 relative Frobenius.
        Eigen::MatrixXd ep = to_eigen(p);
        Eigen::MatrixXd expected_inv = ep.inverse();
        Eigen::VectorXd ex = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
        expected_inv += alpha * ex * ex.transpose();
        Eigen::MatrixXd actual_inv = to_eigen(p2).inverse();
        REQUIRE((actual_inv - expected_inv).norm() <= 1e-8 * expected_inv.norm());

        // Loewner order: P' <= P.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ep - to_eigen(p2));
        REQUIRE(es.eigenvalues().minCoeff() >= -1e-12 * to_eigen(p).operatorNorm());

        // Result stays PD and exactly symmetric.
        REQUIRE(is_positive_definite(p2));
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) REQUIRE(p2(i, j) == p2(j, i));
    }
}

TEST_CASE("eigen_extremes diagonal and scaled identity") {
    SymMatrix diag(2);
    diag.set(0, 0, 0.5);
    diag.set(1, 1, 1.0);
    auto [lo, hi] = eigen_extremes(diag);
    CHECK(lo == Catch::Approx(0.5));
    CHECK(hi == Catch::Approx(1.0));

    auto [clo, chi] = eigen_extremes(SymMatrix::identity(5, 3.25));
    CHECK(clo == Catch::Approx(3.25));
    CHECK(chi == Catch::Approx(3.25));
}

TEST_CASE("eigen_sym matches a reference eigensolver on random symmetric matrices") {
    Rng rng(123);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t d = 2 + static_cast<std::size_t>(rng.uniform01() * 10);
        SymMatrix m(d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) m.set(i, j, rng.uniform(-2.0, 2.0));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m));
        const EigenSystem mine = eigen_sym(m);
        for (std::size_t k = 0; k < d; ++k)
            REQUIRE(mine.values[k] == Catch::Approx(es.eigenvalues()(static_cast<long>(k))).margin(1e-8));

        // Eigenpairs satisfy A v = lambda v.
        for (std::size_t k = 0; k < d; ++k) {
            const Vec av = m.apply(mine.vectors[k]);
            for (std::size_t i = 0; i < d; ++i)
                REQUIRE(av[i] == Catch::Approx(mine.values[k] * mine.vectors[k][i]).margin(1e-9));
        }
    }
}

TEST_CASE("eigen_extremes rejects non-finite input") {
    SymMatrix m(2);
    m.set(0, 1, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(eigen_extremes(m), std::invalid_argument);
}

TEST_CASE("solve_pd identity and diagonal") {
    const Vec b = {2.0, 4.0};
    CHECK(solve_pd(SymMatrix::identity(2), b) == b);

    SymMatrix diag(2);
    diag.set(0, 0, 2.0);
    diag.set(1, 1, 4.0);
    const Vec x = solve_pd(diag, b);
    CHECK(x[0] == Catch::Approx(1.0));
    CHECK(x[1] == Catch::Approx(1.0));
}

TEST_CASE("solve_pd residual on random PD systems") {
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        SymMatrix p = random_pd(6, rng);
        const Vec b = random_vec(6, rng);
        const Vec x = solve_pd(p, b);
        const Vec px = p.apply(x);
        double resid = 0.0;
        for (std::size_t i = 0; i < 6; ++i) resid += (px[i] - b[i]) * (px[i] - b[i]);
        resid = std::sqrt(resid);
        REQUIRE(resid <= 1e-10 * (p.frobenius_norm() * norm2(x) + norm2(b)));
    }
}

TEST_CASE("solve_pd rejects singular matrices") {
    SymMatrix sing(2);
    sing.set(0, 0, 1.0);
    sing.set(0, 1, 1.0);
    sing.set(1, 1, 1.0);  // rank one
    CHECK_THROWS_AS(solve_pd(sing, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("invert_pd round trip") {
    Rng rng(31);
    SymMatrix p = random_pd(5, rng);
    const SymMatrix inv = invert_pd(p);
    Eigen::MatrixXd prod = to_eigen(p) * to_eigen(inv);
    REQUIRE((prod - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-10);
}
