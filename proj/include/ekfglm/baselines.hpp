// Comparison algorithms: Online Newton Step with projection onto a centered
// ball in the P^{-1} metric, and fixed-horizon averaged SGD in two step-size
// variants.
//
// ONS recursion, with grad = l'(y, w^T x) x:
//   P^{-1} <- P^{-1} + l'^2 x x^T     (squared gradient, not curvature)
//   w      <- proj_{||.|| <= D, P^{-1} metric}( w - (1/gamma) P grad )
// Both P and P^{-1} are maintained; P via the covariance-form rank-one
// update, P^{-1} by direct accumulation for the projection metric.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ekfglm/linalg.hpp"
#include "ekfglm/models.hpp"

namespace ekfglm {

struct OnsConfig {
    GlmModel model;
    double gamma;     // step size; the candidate move is (1/gamma) P grad
    double radius;    // D, radius of the centered search ball
    double p1_scale;  // lambda, P_1 = lambda I

    void validate() const {
        if (!(gamma > 0.0) || !(radius > 0.0) || !(p1_scale > 0.0))
            throw std::invalid_argument("OnsConfig: gamma, radius and p1_scale must be > 0");
    }
};

// Theorem-style step size: gamma = min(1/(4GD), alpha) / 2, where G bounds
// the gradient norms and alpha is the exp-concavity constant in force.
inline double ons_stepsize(double grad_bound, double radius, double alpha_exp) {
    if (!(grad_bound > 0.0) || !(radius > 0.0) || !(alpha_exp > 0.0))
        throw std::invalid_argument("ons_stepsize: all inputs must be > 0");
    return 0.5 * std::min(1.0 / (4.0 * grad_bound * radius), alpha_exp);
}

// argmin_{||w|| <= D} (w-u)^T Pinv (w-u).
//
// With Pinv = Q diag(s) Q^T, the KKT solution is w(l) = Q diag(s/(s+l)) Q^T u
// for the multiplier l >= 0, and ||w(l)|| decreases monotonically in l, so a
// bisection on ||w(l)|| - D pins l. Interior u is returned unchanged (l = 0).
inline Vec project_ball_metric(const Vec& u, double radius, const SymMatrix& pinv) {
    if (!(radius > 0.0)) throw std::invalid_argument("project_ball_metric: radius must be > 0");
    if (u.size() != pinv.dim()) throw std::invalid_argument("project_ball_metric: dimension mismatch");
    if (!all_finite(u)) throw std::invalid_argument("project_ball_metric: non-finite candidate");
    if (norm2(u) <= radius) return u;

    const EigenSystem es = eigen_sym(pinv, /*want_vectors=*/true);
    if (!(es.values.front() > 0.0))
        throw std::invalid_argument("project_ball_metric: metric matrix is not positive definite");

    const std::size_t d = u.size();
    Vec ut(d);  // Q^T u
    for (std::size_t k = 0; k < d; ++k) ut[k] = dot(es.vectors[k], u);

    const auto radius_at = [&](double l) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double w = es.values[k] / (es.values[k] + l) * ut[k];
            s += w * w;
        }
        return std::sqrt(s);
    };

    double lo = 0.0;          // ||w(lo)|| > D
    double hi = es.values.back() * (norm2(u) / radius);
    while (radius_at(hi) > radius) {
        hi *= 2.0;
        if (!std::isfinite(hi)) throw std::invalid_argument("project_ball_metric: bisection failed to bracket");
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (radius_at(mid) > radius ? lo : hi) = mid;
    }

    // Return the feasible endpoint of the bracket, so ||w|| <= D always.
    Vec w(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        const double coeff = es.values[k] / (es.values[k] + hi) * ut[k];
        for (std::size_t i = 0; i < d; ++i) w[i] += coeff * es.vectors[k][i];
    }
    return w;
}

struct OnsState {
    Vec w;
    SymMatrix P;
    SymMatrix Pinv;
    std::size_t t = 1;
    Vec avg_w;
};

inline OnsState make_ons_state(const OnsConfig& cfg, const Vec& w1) {
    cfg.validate();
    if (norm2(w1) > cfg.radius * (1.0 + 1e-12))
        throw std::invalid_argument("make_ons_state: initial point outside the search ball");
    OnsState s;
    s.w = w1;
    s.P = SymMatrix::identity(w1.size(), cfg.p1_scale);
    s.Pinv = SymMatrix::identity(w1.size(), 1.0 / cfg.p1_scale);
    s.t = 1;
    s.avg_w = w1;
    return s;
}

inline OnsState ons_step(OnsState state, const Vec& x, double y, const OnsConfig& cfg) {
    if (x.size() != state.w.size()) throw std::invalid_argument("ons_step: regressor dimension mismatch");
    if (!all_finite(x) || !std::isfinite(y)) throw std::invalid_argument("ons_step: non-finite observation");

    const double u = dot(state.w, x);
    const double lp = evaluate(cfg.model, y, u).grad_scalar;
    const double lp2 = lp * lp;

    state.P = sherman_morrison_shrink(std::move(state.P), x, lp2);
    state.Pinv.add_outer(x, lp2);

    const Vec pg = state.P.apply(x);
    Vec cand(state.w.size());
    for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = state.w[i] - (lp / cfg.gamma) * pg[i];
    if (!all_finite(cand)) throw std::invalid_argument("ons_step: non-finite candidate");

    state.w = project_ball_metric(cand, cfg.radius, state.Pinv);

    state.t += 1;
    const double inv_t = 1.0 / static_cast<double>(state.t);
    for (std::size_t i = 0; i < state.avg_w.size(); ++i) state.avg_w[i] += (state.w[i] - state.avg_w[i]) * inv_t;
    return state;
}

struct AsgdConfig {
    GlmModel model;
    double gamma;        // constant step size, chosen for the fixed horizon
    std::size_t horizon; // N

    void validate() const {
        if (!(gamma >= 0.0)) throw std::invalid_argument("AsgdConfig: gamma must be >= 0");
        if (horizon < 1) throw std::invalid_argument("AsgdConfig: horizon must be >= 1");
    }
};

inline double asgd_stepsize(std::size_t d, std::size_t horizon) {
    return 1.0 / (2.0 * static_cast<double>(d) * std::sqrt(static_cast<double>(horizon)));
}

inline double asgd_oracle_stepsize(double theta_star_norm, std::size_t d, std::size_t horizon) {
    return theta_star_norm / std::sqrt(static_cast<double>(d) * static_cast<double>(horizon));
}

// Constant-step SGD over exactly N observations; returns the average of the
// N pre-update iterates (Polyak-Ruppert with fixed horizon).
inline Vec asgd_run(const AsgdConfig& cfg, const std::vector<Observation>& stream, const Vec& theta1) {
    cfg.validate();
    if (stream.size() != cfg.horizon) throw std::invalid_argument("asgd_run: stream length must equal the horizon");
    Vec theta = theta1;
    Vec sum(theta.size(), 0.0);
    for (const Observation& obs : stream) {
        for (std::size_t i = 0; i < theta.size(); ++i) sum[i] += theta[i];
        const double lp = evaluate(cfg.model, obs.y, dot(theta, obs.x)).grad_scalar;
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.gamma * lp * obs.x[i];
    }
    const double inv_n = 1.0 / static_cast<double>(cfg.horizon);
    for (double& v : sum) v *= inv_n;
    return sum;
}

} // namespace ekfglm
