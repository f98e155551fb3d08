// Named verification suites behind the `verify` subcommand. Each check
// reduces to (statistic, threshold, pass) so results can be printed and
// written to a machine-readable CSV. The acceptance suite reuses these
// drivers with the reference parameters pinned.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ekfglm/datagen.hpp"
#include "ekfglm/evaluation.hpp"
#include "ekfglm/experiment.hpp"
#include "ekfglm/filters.hpp"
#include "ekfglm/properties.hpp"
#include "ekfglm/rng.hpp"

namespace ekfglm {

struct CheckResult {
    std::string name;
    double statistic;
    double threshold;
    bool pass;
    std::string note;
};

inline CheckResult check_leq(std::string name, double statistic, double threshold, std::string note = {}) {
    return {std::move(name), statistic, threshold, statistic <= threshold, std::move(note)};
}

struct VerifyParams {
    std::uint64_t seed = 20240601;
    std::size_t d = 11;
    std::size_t trajectory_len = 1000;
    std::size_t ridge_streams = 20;
    std::size_t pathwise_trajectories = 100;
    std::size_t martingale_reps = 10000;
    std::size_t martingale_nmax = 10000;
    std::size_t concentration_reps = 200;
    std::size_t concentration_horizon = 10000;
};

namespace detail {

inline Vec sample_ball(std::size_t d, double radius, Rng& rng) {
    Vec v(d);
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& x : v) {
            x = rng.normal();
            n2 += x * x;
        }
    } while (n2 == 0.0);
    const double scale = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d)) / std::sqrt(n2);
    for (double& x : v) x *= scale;
    return v;
}

inline DataProcess verify_process(bool logistic, std::size_t d, Rng& rng) {
    DataProcess proc;
    proc.d = d;
    proc.theta_star = sample_ball(d, 5.0, rng);
    if (logistic) {
        proc.kind = ProcessKind::LogisticWellSpec;
    } else {
        proc.kind = ProcessKind::LinearSubGaussian;
        proc.sigma = 1.0;
    }
    return proc;
}

} // namespace detail

inline std::vector<CheckResult> verify_linalg(const VerifyParams& params) {
    Rng rng = Rng::substream(params.seed, "verify-linalg");
    double worst_inverse = 0.0, worst_loewner = 0.0, worst_solve = 0.0, worst_eigen = 0.0;
    bool symmetric = true;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform01() * 19);
        SymMatrix p(d, 0.4);
        for (std::size_t k = 0; k < 2 * d; ++k) {
            Vec v(d);
            for (double& x : v) x = rng.uniform(-1.0, 1.0);
            p.add_outer(v, rng.uniform(0.05, 1.0));
        }
        Vec x(d);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const double alpha = rng.uniform(0.0, 3.0);
        const SymMatrix p2 = sherman_morrison_shrink(p, x, alpha);

        // Inverse consistency through the factorization path.
        SymMatrix expected = invert_pd(p);
        expected.add_outer(x, alpha);
        const SymMatrix actual = invert_pd(p2);
        worst_inverse = std::max(worst_inverse, (actual - expected).frobenius_norm() / expected.frobenius_norm());

        const SymMatrix gap = p - p2;
        worst_loewner = std::max(worst_loewner, -eigen_extremes(gap).lambda_min / eigen_extremes(p).lambda_max);

        for (std::size_t i = 0; i < d && symmetric; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (p2(i, j) != p2(j, i)) symmetric = false;

        Vec b(d);
        for (double& v : b) v = rng.uniform(-2.0, 2.0);
        const Vec sol = solve_pd(p, b);
        const Vec resid = p.apply(sol) - b;
        worst_solve = std::max(worst_solve, norm2(resid) / (p.frobenius_norm() * norm2(sol) + norm2(b)));

        const EigenSystem es = eigen_sym(p);
        for (std::size_t k = 0; k < d; ++k) {
            const Vec av = p.apply(es.vectors[k]);
            double r2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double diff = av[i] - es.values[k] * es.vectors[k][i];
                r2 += diff * diff;
            }
            worst_eigen = std::max(worst_eigen, std::sqrt(r2) / std::max(1e-300, std::abs(es.values.back())));
        }
    }
    return {
        check_leq("linalg.rank_one_inverse_consistency", worst_inverse, 1e-8),
        check_leq("linalg.loewner_monotonicity", worst_loewner, 1e-12),
        {"linalg.bitwise_symmetry", symmetric ? 0.0 : 1.0, 0.0, symmetric, ""},
        check_leq("linalg.pd_solve_residual", worst_solve, 1e-10),
        check_leq("linalg.eigen_residual", worst_eigen, 1e-10),
    };
}

inline std::vector<CheckResult> verify_ridge(const VerifyParams& params) {
    Rng rng = Rng::substream(params.seed, "verify-ridge");
    double worst = 0.0;
    for (std::size_t s = 0; s < params.ridge_streams; ++s) {
        const DataProcess proc = detail::verify_process(false, params.d, rng);
        Rng stream(rng.next_u64());
        const EkfConfig cfg{GlmModel::gaussian(), 1.0, Vec(params.d, 0.0), std::nullopt};
        const TrajectoryRecord rec =
            run_trajectory(cfg, draw_stream(proc, params.trajectory_len, stream), {1, false, false});
        worst = std::max(worst, check_ridge_equivalence(rec));
    }
    return {check_leq("ridge.max_relative_deviation", worst, 1e-8)};
}

inline std::vector<CheckResult> verify_pathwise(const VerifyParams& params) {
    Rng rng = Rng::substream(params.seed, "verify-pathwise");
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_sumtrace = -std::numeric_limits<double>::infinity();
    double worst_precision = 0.0;
    for (std::size_t rep = 0; rep < 2 * params.pathwise_trajectories; ++rep) {
        const bool logistic = rep < params.pathwise_trajectories;
        const DataProcess proc = detail::verify_process(logistic, params.d, rng);
        Rng stream(rng.next_u64());
        const EkfConfig cfg{proc.model(), 1.0, Vec(params.d, 0.0), std::nullopt};
        const TrajectoryRecord rec =
            run_trajectory(cfg, draw_stream(proc, params.trajectory_len, stream), {1, false, false});

        // The inequality is anytime and holds for ANY comparator point:
        // check both the data parameter and an independent random point.
        worst_margin = std::min(worst_margin, check_lemma2_pathwise(rec, proc.theta_star).min_scaled_margin);
        worst_margin = std::min(worst_margin, check_lemma2_pathwise(rec, detail::sample_ball(params.d, 5.0, rng)).min_scaled_margin);

        const SumTraceCheck st = check_sumtrace(rec, logistic ? 0.25 : 1.0, analytic_geometry(proc));
        worst_sumtrace = std::max(worst_sumtrace, st.lhs - st.rhs);
    }
    // Precision recursion on shorter stored-P runs, both models.
    for (int rep = 0; rep < 4; ++rep) {
        const bool logistic = rep % 2 == 0;
        const DataProcess proc = detail::verify_process(logistic, params.d, rng);
        Rng stream(rng.next_u64());
        const EkfConfig cfg{proc.model(), 1.0, Vec(params.d, 0.0), std::nullopt};
        const TrajectoryRecord rec =
            run_trajectory(cfg, draw_stream(proc, params.trajectory_len, stream), {1, false, true});
        worst_precision = std::max(worst_precision, check_precision_recursion(rec));
    }
    // Informational: the observed enter-and-stay time of a unit ball on one
    // logistic run. This is a horizon-limited proxy of the convergence time,
    // not the theoretical quantity; it is reported, never asserted.
    const DataProcess proxy_proc = detail::verify_process(true, params.d, rng);
    Rng proxy_stream(rng.next_u64());
    const EkfConfig proxy_cfg{GlmModel::logistic(), 1.0, Vec(params.d, 0.0), std::nullopt};
    const TrajectoryRecord proxy_rec =
        run_trajectory(proxy_cfg, draw_stream(proxy_proc, params.trajectory_len, proxy_stream), {1, false, false});
    const StayTime st = empirical_stay_time(proxy_rec, proxy_proc.theta_star, 1.0);

    return {
        {"pathwise.lemma_margin_scaled", worst_margin, -1e-8, worst_margin >= -1e-8, "min over prefixes"},
        check_leq("pathwise.trace_log_slack", worst_sumtrace, 0.0, "lhs - rhs"),
        check_leq("pathwise.precision_recursion", worst_precision, 1e-7),
        {"pathwise.stay_time_proxy", st.entered ? static_cast<double>(st.t) : -1.0,
         std::numeric_limits<double>::infinity(), true,
         "observed enter-and-stay step, horizon-limited proxy (informational)"},
    };
}

inline std::vector<CheckResult> verify_martingale(const VerifyParams& params) {
    Rng rng = Rng::substream(params.seed, "verify-martingale");
    std::vector<CheckResult> results;
    for (const auto gen : {MartingaleGenerator::Rademacher, MartingaleGenerator::CenteredUniform}) {
        for (const double lambda : {0.05, 0.1, 0.5}) {
            for (const double delta : {0.01, 0.05}) {
                const double rate =
                    check_lemma1_frequency(gen, lambda, delta, params.martingale_nmax, params.martingale_reps, rng);
                const std::string name = std::string("martingale.") +
                                         (gen == MartingaleGenerator::Rademacher ? "rademacher" : "uniform") +
                                         ".lambda" + std::to_string(lambda).substr(0, 4) + ".delta" +
                                         std::to_string(delta).substr(0, 4);
                results.push_back(
                    check_leq(name, rate, frequency_pass_threshold(delta, params.martingale_reps)));
            }
        }
    }
    return results;
}

inline std::vector<CheckResult> verify_concentration(const VerifyParams& params) {
    Rng rng = Rng::substream(params.seed, "verify-concentration");
    std::vector<CheckResult> results;

    // Reference design at d = 11 with beta = 0.49: the threshold exceeds any
    // desk horizon, which the checker must flag as vacuous.
    DataProcess setting2;
    setting2.kind = ProcessKind::LogisticWellSpec;
    setting2.d = 11;
    setting2.theta_star = named_theta("setting2");
    EkfConfig cfg49{GlmModel::logistic(), 1.0, Vec(11, 0.0), Truncation{0.49, 1.0}};
    const ConcentrationCheck vac =
        check_prop4_concentration(cfg49, setting2, 0.1, params.concentration_horizon, params.concentration_reps, rng);
    results.push_back({"concentration.reference_d11_beta049", vac.violation_rate,
                       frequency_pass_threshold(0.1, params.concentration_reps),
                       vac.violation_rate <= frequency_pass_threshold(0.1, params.concentration_reps),
                       vac.vacuous ? "vacuous: threshold beyond horizon" : ""});

    // Isotropic d = 2 design with beta = 0.2 lands the threshold inside the
    // horizon, making the envelope check effective.
    DataProcess iso;
    iso.kind = ProcessKind::LogisticIsotropic;
    iso.d = 2;
    iso.theta_star = {1.0, -1.0};
    EkfConfig cfg2{GlmModel::logistic(), 1.0, Vec(2, 0.0), Truncation{0.2, 1.0}};
    const ConcentrationCheck eff =
        check_prop4_concentration(cfg2, iso, 0.1, params.concentration_horizon, params.concentration_reps, rng);
    std::string note = "threshold " + std::to_string(eff.t_threshold);
    if (eff.vacuous) note += " (unexpectedly vacuous)";
    results.push_back({"concentration.isotropic_d2_beta02", eff.violation_rate,
                       frequency_pass_threshold(0.1, params.concentration_reps),
                       !eff.vacuous && eff.violation_rate <= frequency_pass_threshold(0.1, params.concentration_reps),
                       note});
    return results;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite, const VerifyParams& params) {
    std::vector<CheckResult> results;
    const auto append = [&](std::vector<CheckResult> more) {
        for (CheckResult& r : more) results.push_back(std::move(r));
    };
    if (suite == "linalg" || suite == "all") append(verify_linalg(params));
    if (suite == "pathwise" || suite == "all") append(verify_pathwise(params));
    if (suite == "ridge" || suite == "all") append(verify_ridge(params));
    if (suite == "martingale" || suite == "all") append(verify_martingale(params));
    if (suite == "concentration" || suite == "all") append(verify_concentration(params));
    if (results.empty()) throw std::invalid_argument("unknown verify suite '" + suite + "'");
    return results;
}

inline void write_check_results_csv(const std::string& path, const std::vector<CheckResult>& results) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "name,statistic,threshold,pass,note\n";
    for (const CheckResult& r : results)
        out << r.name << ',' << format_real(r.statistic) << ',' << format_real(r.threshold) << ','
            << (r.pass ? "true" : "false") << ',' << '"' << r.note << '"' << '\n';
}

} // namespace ekfglm
