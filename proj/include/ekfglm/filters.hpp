// Static extended Kalman filter for GLM losses, in covariance form, plus the
// truncated variant for logistic regression and a running-average wrapper.
//
// One step, given the current estimate theta and companion matrix P:
//   alpha = l''(y, theta^T x)            (floored at c/t^beta when truncated)
//   P'    = P - alpha (P x)(P x)^T / (1 + alpha x^T P x)
//   theta'= theta - P' l'(y, theta^T x) x
// The filter stores P only; P^{-1} appears exclusively in test oracles. Every
// step is O(d^2).
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ekfglm/linalg.hpp"
#include "ekfglm/models.hpp"

namespace ekfglm {

struct Truncation {
    double beta;             // exponent in (0, 1/2)
    double threshold_scale;  // c in the floor c / t^beta
};

struct EkfConfig {
    GlmModel model;
    double p1_scale = 1.0;  // P_1 = p1_scale * I
    Vec theta1;             // initial estimate
    std::optional<Truncation> truncation;

    void validate() const {
        if (!(p1_scale > 0.0)) throw std::invalid_argument("EkfConfig: p1_scale must be > 0");
        if (theta1.empty() || !all_finite(theta1)) throw std::invalid_argument("EkfConfig: theta1 must be finite and non-empty");
        if (truncation) {
            if (model.kind == GlmKind::Gaussian)
                throw std::invalid_argument("EkfConfig: truncation is defined for the logistic model only");
            if (!(truncation->beta > 0.0 && truncation->beta < 0.5))
                throw std::invalid_argument("EkfConfig: truncation beta must lie in (0, 1/2)");
            if (!(truncation->threshold_scale > 0.0))
                throw std::invalid_argument("EkfConfig: truncation threshold_scale must be > 0");
        }
    }
};

struct FilterState {
    Vec theta;
    SymMatrix P;
    std::size_t t = 1;       // step counter; the state at t holds theta_t, P_t
    Vec avg_theta;           // running mean of theta_1 .. theta_t
    bool truncated_last = false;
};

inline FilterState make_initial_state(const EkfConfig& cfg) {
    cfg.validate();
    FilterState s;
    s.theta = cfg.theta1;
    s.P = SymMatrix::identity(cfg.theta1.size(), cfg.p1_scale);
    s.t = 1;
    s.avg_theta = cfg.theta1;
    s.truncated_last = false;
    return s;
}

inline FilterState ekf_step(FilterState state, const Vec& x, double y, const EkfConfig& cfg) {
    if (x.size() != state.theta.size()) throw std::invalid_argument("ekf_step: regressor dimension mismatch");
    if (!all_finite(x) || !std::isfinite(y)) throw std::invalid_argument("ekf_step: non-finite observation");
    if (cfg.truncation && cfg.model.kind == GlmKind::Gaussian)
        throw std::invalid_argument("ekf_step: truncation is defined for the logistic model only");

    const double u = dot(state.theta, x);
    const LossEval ev = evaluate(cfg.model, y, u);

    double alpha = ev.curv_scalar;
    bool truncated = false;
    if (cfg.truncation) {
        const double floor = cfg.truncation->threshold_scale / std::pow(static_cast<double>(state.t), cfg.truncation->beta);
        if (floor > alpha) {
            alpha = floor;
            truncated = true;
        }
    }

    state.P = sherman_morrison_shrink(std::move(state.P), x, alpha);

    // theta_{t+1} = theta_t - P_{t+1} grad, grad = l'(y, u) x.
    const Vec px = state.P.apply(x);
    for (std::size_t i = 0; i < state.theta.size(); ++i) state.theta[i] -= ev.grad_scalar * px[i];

    state.t += 1;
    const double inv_t = 1.0 / static_cast<double>(state.t);
    for (std::size_t i = 0; i < state.avg_theta.size(); ++i)
        state.avg_theta[i] += (state.theta[i] - state.avg_theta[i]) * inv_t;
    state.truncated_last = truncated;
    return state;
}

inline Vec averaged_estimate(const FilterState& state) { return state.avg_theta; }

struct TrajectoryEntry {
    std::size_t t = 0;      // step index; fields describe the step from t to t+1
    Vec theta;              // theta_t, before the update
    Vec x;
    double y = 0.0;
    double loss = 0.0;      // l(y_t, theta_t^T x_t)
    double grad_scalar = 0.0;
    double curv_scalar = 0.0;
    double alpha = 0.0;     // curvature actually used in the P update
    bool truncated = false;
    double x_pnext_x = 0.0; // x_t^T P_{t+1} x_t
    double lambda_min_p = 0.0;  // extremes of P_{t+1}, when eigenvalue logging is on
    double lambda_max_p = 0.0;
};

struct TrajectoryOptions {
    std::size_t record_every = 1;
    bool log_eigenvalues = true;
    bool store_p = false;   // keep a P_{t+1} snapshot per recorded entry
};

struct TrajectoryRecord {
    EkfConfig config;
    std::vector<TrajectoryEntry> entries;
    std::vector<SymMatrix> p_snapshots;  // aligned with entries when store_p
    FilterState final_state;
};

// Drives the filter over a finite stream, logging a per-step (or thinned)
// diagnostic record. The final state is reproducible bit-for-bit from the
// same stream.
inline TrajectoryRecord run_trajectory(const EkfConfig& cfg, const std::vector<Observation>& stream,
                                       const TrajectoryOptions& opt = {}) {
    if (opt.record_every < 1) throw std::invalid_argument("run_trajectory: record_every must be >= 1");
    TrajectoryRecord rec;
    rec.config = cfg;
    FilterState state = make_initial_state(cfg);

    for (std::size_t i = 0; i < stream.size(); ++i) {
        const Observation& obs = stream[i];
        const std::size_t t = state.t;
        const bool record = ((t - 1) % opt.record_every == 0) || (i + 1 == stream.size());

        TrajectoryEntry entry;
        try {
            if (record) {
                entry.t = t;
                entry.theta = state.theta;
                entry.x = obs.x;
                entry.y = obs.y;
                const LossEval ev = evaluate(cfg.model, obs.y, dot(state.theta, obs.x));
                entry.loss = ev.loss;
                entry.grad_scalar = ev.grad_scalar;
                entry.curv_scalar = ev.curv_scalar;
            }
            state = ekf_step(std::move(state), obs.x, obs.y, cfg);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("run_trajectory: step " + std::to_string(t) + ": " + e.what());
        }

        if (record) {
            entry.truncated = state.truncated_last;
            entry.alpha = state.truncated_last
                              ? cfg.truncation->threshold_scale / std::pow(static_cast<double>(t), cfg.truncation->beta)
                              : entry.curv_scalar;
            entry.x_pnext_x = quad_form(state.P, obs.x);
            if (opt.log_eigenvalues) {
                const EigenExtremes ee = eigen_extremes(state.P);
                entry.lambda_min_p = ee.lambda_min;
                entry.lambda_max_p = ee.lambda_max;
            }
            rec.entries.push_back(std::move(entry));
            if (opt.store_p) rec.p_snapshots.push_back(state.P);
        }
    }

    rec.final_state = std::move(state);
    return rec;
}

} // namespace ekfglm
