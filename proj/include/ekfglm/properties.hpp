// Executable verifiers for the deterministic pathwise inequalities and the
// high-probability claims. Checkers never mutate records, are deterministic
// given their rng, and recompute per-step gradients/curvatures from the
// logged (x, theta, y) rather than trusting the logged scalars.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ekfglm/datagen.hpp"
#include "ekfglm/evaluation.hpp"
#include "ekfglm/filters.hpp"
#include "ekfglm/linalg.hpp"
#include "ekfglm/models.hpp"
#include "ekfglm/rng.hpp"

namespace ekfglm {

namespace detail {

inline void require_per_step(const TrajectoryRecord& rec) {
    for (std::size_t i = 0; i < rec.entries.size(); ++i)
        if (rec.entries[i].t != i + 1)
            throw std::invalid_argument("checker requires a per-step record (record_every = 1)");
}

inline void require_untruncated(const TrajectoryRecord& rec) {
    if (rec.config.truncation)
        throw std::invalid_argument("checker requires a record from an untruncated run");
}

} // namespace detail

struct PathwiseCheck {
    double lhs;              // full-horizon left-hand side
    double rhs;              // full-horizon right-hand side
    double margin;           // min over prefixes of rhs_n - lhs_n
    double min_scaled_margin;  // min over prefixes of (rhs_n - lhs_n)/max(1, |rhs_n|)
};

// Pathwise second-order inequality:
//   sum_t [ grad_t^T (theta_t - theta*) - 1/2 (theta_t-theta*)^T l'' x x^T (theta_t-theta*) ]
//     <= 1/2 sum_t x_t^T P_{t+1} x_t l'_t^2  +  ||theta_1 - theta*||^2 / lambda_min(P_1),
// holding at every prefix, for any theta*. Stated for the plain filter;
// truncated records are rejected.
inline PathwiseCheck check_lemma2_pathwise(const TrajectoryRecord& rec, const Vec& theta_star) {
    detail::require_per_step(rec);
    detail::require_untruncated(rec);
    if (!rec.entries.empty() && theta_star.size() != rec.entries.front().theta.size())
        throw std::invalid_argument("check_lemma2_pathwise: theta_star dimension mismatch");

    const Vec init_diff = rec.config.theta1 - theta_star;
    const double init_term = dot(init_diff, init_diff) / rec.config.p1_scale;

    double lhs = 0.0;
    double rhs_sum = 0.0;
    double margin = init_term;  // empty prefix: 0 <= init_term
    double scaled_margin = init_term / std::max(1.0, std::abs(init_term));
    for (const TrajectoryEntry& e : rec.entries) {
        const LossEval ev = evaluate(rec.config.model, e.y, dot(e.theta, e.x));
        const Vec diff = e.theta - theta_star;
        const double xd = dot(e.x, diff);
        lhs += ev.grad_scalar * xd - 0.5 * ev.curv_scalar * xd * xd;
        rhs_sum += 0.5 * e.x_pnext_x * ev.grad_scalar * ev.grad_scalar;
        const double rhs_n = rhs_sum + init_term;
        margin = std::min(margin, rhs_n - lhs);
        scaled_margin = std::min(scaled_margin, (rhs_n - lhs) / std::max(1.0, std::abs(rhs_n)));
    }
    return {lhs, rhs_sum + init_term, margin, scaled_margin};
}

// Quadratic-loss equivalence with regularized least squares: at every step,
// theta_t solves
//   argmin 1/2 sum_{s<t} (y_s - theta^T x_s)^2
//        + 1/2 (theta - theta_1)^T P_1^{-1} (theta - theta_1),
// here verified by a direct PD solve of the normal equations. Returns the
// max over t of ||theta_t - solve_t|| / max(1, ||solve_t||).
inline double check_ridge_equivalence(const TrajectoryRecord& rec) {
    detail::require_per_step(rec);
    if (rec.config.model.kind != GlmKind::Gaussian)
        throw std::invalid_argument("check_ridge_equivalence: quadratic model required");
    const std::size_t d = rec.config.theta1.size();
    const double p1_inv = 1.0 / rec.config.p1_scale;

    SymMatrix gram = SymMatrix::identity(d, p1_inv);
    Vec rhs = scaled(rec.config.theta1, p1_inv);
    double max_dev = 0.0;

    const auto deviation = [&](const Vec& theta_hat) {
        const Vec sol = solve_pd(gram, rhs);
        return norm2(theta_hat - sol) / std::max(1.0, norm2(sol));
    };

    for (const TrajectoryEntry& e : rec.entries) {
        max_dev = std::max(max_dev, deviation(e.theta));
        gram.add_outer(e.x, 1.0);
        for (std::size_t i = 0; i < d; ++i) rhs[i] += e.y * e.x[i];
    }
    max_dev = std::max(max_dev, deviation(rec.final_state.theta));
    return max_dev;
}

struct SumTraceCheck {
    double lhs;
    double rhs;
};

// Trace-log bound over the steps k+1 .. k+n of the record, using the
// identity Tr(P_{t+1}(P_{t+1}^{-1} - P_t^{-1})) = alpha_t x_t^T P_{t+1} x_t:
//   sum_t alpha_t x_t^T P_{t+1} x_t
//     <= d ln(1 + n h_eps lambda_max(P_{k+1}) D_X^2 / d).
// Requires l''(y_t, theta_t^T x_t) <= h_eps on the segment (h = 1 covers any
// quadratic run, h = 1/4 any logistic run).
inline SumTraceCheck check_sumtrace(const TrajectoryRecord& rec, double h_eps, const DataGeometry& geom,
                                    std::size_t k = 0, std::size_t n = static_cast<std::size_t>(-1)) {
    detail::require_per_step(rec);
    detail::require_untruncated(rec);
    if (k > rec.entries.size()) throw std::invalid_argument("check_sumtrace: segment start beyond record");
    const std::size_t n_eff = std::min(n, rec.entries.size() - k);
    const double d = static_cast<double>(rec.config.theta1.size());

    double lhs = 0.0;
    for (std::size_t i = k; i < k + n_eff; ++i) {
        const TrajectoryEntry& e = rec.entries[i];
        const double curv = evaluate(rec.config.model, e.y, dot(e.theta, e.x)).curv_scalar;
        if (curv > h_eps * (1.0 + 1e-12))
            throw std::invalid_argument("check_sumtrace: l'' exceeds h_eps at step " + std::to_string(e.t));
        lhs += curv * e.x_pnext_x;
    }
    const double lmax_pk1 = (k == 0) ? rec.config.p1_scale : rec.entries[k - 1].lambda_max_p;
    if (k > 0 && lmax_pk1 <= 0.0)
        throw std::invalid_argument("check_sumtrace: record lacks eigenvalue logging for segment start");
    const double rhs =
        d * std::log1p(static_cast<double>(n_eff) * h_eps * lmax_pk1 * geom.d_x * geom.d_x / d);
    return {lhs, rhs};
}

// Precision recursion P_{t+1}^{-1} = P_t^{-1} + alpha_t x_t x_t^T, verified
// by accumulating the right-hand side and inverting the recorded P_{t+1}.
// Returns the max relative Frobenius deviation. Needs stored P snapshots.
inline double check_precision_recursion(const TrajectoryRecord& rec) {
    detail::require_per_step(rec);
    if (rec.p_snapshots.size() != rec.entries.size())
        throw std::invalid_argument("check_precision_recursion: record lacks P snapshots (store_p)");
    const std::size_t d = rec.config.theta1.size();
    SymMatrix acc = SymMatrix::identity(d, 1.0 / rec.config.p1_scale);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < rec.entries.size(); ++i) {
        const TrajectoryEntry& e = rec.entries[i];
        acc.add_outer(e.x, e.alpha);
        const SymMatrix inv = invert_pd(rec.p_snapshots[i]);
        max_dev = std::max(max_dev, (inv - acc).frobenius_norm() / acc.frobenius_norm());
    }
    return max_dev;
}

enum class MartingaleGenerator {
    Rademacher,            // dN = +-1
    CenteredUniform,       // dN ~ U[-1, 1]
    BoundedStateDependent, // dN = scale(history) * (+-1), scale in [1/4, 1]
    Zero,                  // dN = 0, degenerate sanity case
};

// Monte-Carlo frequency check of the simultaneous martingale inequality:
// the event  sup_n sum_{t<=n} (dN_t - lambda/2 (dN_t^2 + E[dN_t^2|F_{t-1}]))
//            > ln(1/delta)/lambda
// has probability at most delta. Returns the observed violation fraction
// over n_reps independent streams of length n_max.
inline double check_lemma1_frequency(MartingaleGenerator gen, double lambda, double delta, std::size_t n_max,
                                     std::size_t n_reps, Rng& rng) {
    const double threshold = lemma1_threshold(lambda, delta);
    std::size_t violations = 0;
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
        Rng stream = Rng::substream(rng.next_u64(), "lemma1-rep", rep);
        double total = 0.0;
        double running_sum = 0.0;
        bool violated = false;
        for (std::size_t t = 0; t < n_max; ++t) {
            double dn = 0.0, cond_var = 0.0;
            switch (gen) {
                case MartingaleGenerator::Rademacher:
                    dn = stream.rademacher();
                    cond_var = 1.0;
                    break;
                case MartingaleGenerator::CenteredUniform:
                    dn = stream.uniform(-1.0, 1.0);
                    cond_var = 1.0 / 3.0;
                    break;
                case MartingaleGenerator::BoundedStateDependent: {
                    const double scale = 0.25 + 0.75 * (running_sum * running_sum) / (1.0 + running_sum * running_sum);
                    dn = scale * stream.rademacher();
                    cond_var = scale * scale;
                    break;
                }
                case MartingaleGenerator::Zero:
                    break;
            }
            total += dn - 0.5 * lambda * (dn * dn + cond_var);
            running_sum += dn;
            if (total > threshold) {
                violated = true;
                break;
            }
        }
        if (violated) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(n_reps);
}

struct ConcentrationCheck {
    double violation_rate;
    bool vacuous;          // threshold beyond the horizon: nothing was checked
    double t_threshold;
    std::vector<double> per_rep_max_ratio;  // max_t lambda_max(P_t)/envelope(t) past threshold
};

// Envelope check for the truncated filter: a replication violates if
// lambda_max(P_t) exceeds 4/(Lambda_min t^{1-beta}) at any t past the
// computed threshold (clipped to the horizon).
inline ConcentrationCheck check_prop4_concentration(const EkfConfig& cfg, const DataProcess& proc, double delta,
                                                    std::size_t horizon, std::size_t n_reps, Rng& rng) {
    if (!cfg.truncation) throw std::invalid_argument("check_prop4_concentration: truncated config required");
    proc.validate();
    const DataGeometry geom = analytic_geometry(proc);
    const ConcentrationBound cb =
        bound_prop4_concentration(geom, static_cast<double>(proc.d), cfg.truncation->beta, delta);

    ConcentrationCheck result;
    result.t_threshold = cb.t_threshold;
    result.vacuous = !(cb.t_threshold < static_cast<double>(horizon));
    if (result.vacuous) {
        result.violation_rate = 0.0;
        return result;
    }

    std::size_t violations = 0;
    result.per_rep_max_ratio.reserve(n_reps);
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
        Rng stream = Rng::substream(rng.next_u64(), "prop4-rep", rep);
        FilterState state = make_initial_state(cfg);
        double max_ratio = 0.0;
        for (std::size_t t = 1; t <= horizon; ++t) {
            if (static_cast<double>(state.t) > cb.t_threshold) {
                const double lmax = eigen_extremes(state.P).lambda_max;
                max_ratio = std::max(max_ratio, lmax / cb.envelope(static_cast<double>(state.t)));
            }
            const auto [x, y] = next_observation(proc, stream);
            state = ekf_step(std::move(state), x, y, cfg);
        }
        result.per_rep_max_ratio.push_back(max_ratio);
        if (max_ratio > 1.0) ++violations;
    }
    result.violation_rate = static_cast<double>(violations) / static_cast<double>(n_reps);
    return result;
}

// One-sided binomial acceptance band for frequency checks: a bound that
// claims probability <= delta passes when the observed rate is below
// delta + 3 sqrt(delta(1-delta)/n_reps).
inline double frequency_pass_threshold(double delta, std::size_t n_reps) {
    return delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(n_reps));
}

struct StayTime {
    std::size_t t = 0;    // first step from which the estimate never leaves the ball
    bool entered = false; // false: the estimate was still outside at the end
};

// Observed first enter-and-stay time of the epsilon-ball around theta_star.
// This is a horizon-limited, single-trajectory proxy for the theoretical
// convergence time, and must be reported as such, never in its place.
inline StayTime empirical_stay_time(const TrajectoryRecord& rec, const Vec& theta_star, double epsilon) {
    detail::require_per_step(rec);
    StayTime st;
    bool inside = false;
    for (const TrajectoryEntry& e : rec.entries) {
        if (norm2(e.theta - theta_star) <= epsilon) {
            if (!inside) {
                st.t = e.t;
                inside = true;
            }
        } else {
            inside = false;
        }
    }
    if (inside && norm2(rec.final_state.theta - theta_star) > epsilon) inside = false;
    st.entered = inside;
    return st;
}

} // namespace ekfglm
