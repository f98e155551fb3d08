// Risk/MSE estimators and calculators for the closed-form bound and
// threshold expressions. The tau calculators work in natural-log space with
// an overflow flag: for realistic logistic inputs the convergence time
// exceeds double range by hundreds of orders of magnitude.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ekfglm/datagen.hpp"
#include "ekfglm/linalg.hpp"
#include "ekfglm/models.hpp"
#include "ekfglm/rng.hpp"

namespace ekfglm {

struct BoundedConstants {
    double kappa_eps;
    double h_eps;
    double rho_eps;
    double epsilon;

    void validate() const {
        if (!(kappa_eps > 0.0) || !(h_eps > 0.0) || !(rho_eps > 0.0) || rho_eps > 1.0 || epsilon < 0.0)
            throw std::invalid_argument("BoundedConstants: expect kappa,h > 0, rho in (0,1], epsilon >= 0");
    }
};

// The logistic instantiation: kappa = e^{D_X (||theta*|| + eps)}, h = 1/4,
// rho = e^{-eps D_X}.
inline BoundedConstants logistic_constants(double d_x, double theta_star_norm, double epsilon) {
    return {std::exp(d_x * (theta_star_norm + epsilon)), 0.25, std::exp(-epsilon * d_x), epsilon};
}

struct SubGaussianParams {
    double sigma2 = 0.0;
    double d_app = 0.0;

    void validate() const {
        if (sigma2 < 0.0 || d_app < 0.0) throw std::invalid_argument("SubGaussianParams: must be >= 0");
    }
};

struct BoundReport {
    std::string name;
    std::vector<std::pair<std::string, double>> inputs;
    std::vector<std::pair<std::string, double>> components;

    double value() const {
        double s = 0.0;
        for (const auto& [k, v] : components) s += v;
        return s;
    }
};

// A positive quantity carried as its natural logarithm. `overflow` marks
// values beyond double range; `log_value` stays meaningful regardless.
struct LogValue {
    double log_value;
    bool overflow;

    double value() const { return overflow ? std::numeric_limits<double>::infinity() : std::exp(log_value); }
    double log10_value() const { return log_value / std::log(10.0); }
};

inline LogValue make_log_value(double log_value) {
    return {log_value, log_value > 709.78};  // ln(1.8e308)
}

inline double mse(const Vec& theta_hat, const Vec& theta_star) {
    const Vec diff = theta_hat - theta_star;
    return dot(diff, diff);
}

struct RiskEstimate {
    double mean;
    double std_err;
};

// Monte-Carlo estimate of L(theta) - L(theta_star) with common random
// numbers: both losses are evaluated on the same draws, so the estimate is
// exactly 0 at theta = theta_star and the variance stays proportional to the
// gap. The Gaussian well-specified case short-circuits to the closed form
// (theta-theta*)^T E[XX^T] (theta-theta*) / 2 with the analytic moments.
inline RiskEstimate estimate_excess_risk(const GlmModel& model, const DataProcess& proc, const Vec& theta,
                                         const Vec& theta_star, std::size_t n_mc, Rng& rng) {
    if (theta.size() != theta_star.size() || theta.size() != proc.d)
        throw std::invalid_argument("estimate_excess_risk: dimension mismatch");
    if (n_mc < 100) throw std::invalid_argument("estimate_excess_risk: n_mc must be >= 100");

    if (model.kind == GlmKind::Gaussian && proc.kind == ProcessKind::LinearSubGaussian && proc.d_app_bias == 0.0) {
        const SymMatrix m = analytic_second_moment(proc);
        const Vec diff = theta - theta_star;
        return {0.5 * quad_form(m, diff), 0.0};
    }

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const auto [x, y] = next_observation(proc, rng);
        const double u = dot(theta, x);
        const double u_star = dot(theta_star, x);
        const double diff = evaluate(model, y, u).loss - evaluate(model, y, u_star).loss;
        sum += diff;
        sum_sq += diff * diff;
    }
    const double n = static_cast<double>(n_mc);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

// Cumulative-risk bound, bounded (locally exp-concave) setting. Hypothesis:
// rho_eps > 0.95.
inline BoundReport bound_theorem1(const BoundedConstants& consts, const DataGeometry& geom, double n, double d,
                                  double lambda_max_p1, double lambda_max_ptau_inv, double delta) {
    consts.validate();
    if (!(consts.rho_eps > 0.95))
        throw std::invalid_argument("bound_theorem1: hypothesis violation, requires rho_eps > 0.95");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("bound_theorem1: delta must lie in (0,1]");
    const double dx2 = geom.d_x * geom.d_x;
    BoundReport r;
    r.name = "theorem1_bounded";
    r.inputs = {{"kappa_eps", consts.kappa_eps}, {"h_eps", consts.h_eps},      {"rho_eps", consts.rho_eps},
                {"epsilon", consts.epsilon},     {"d_x", geom.d_x},            {"n", n},
                {"d", d},                        {"lambda_max_p1", lambda_max_p1},
                {"lambda_max_ptau_inv", lambda_max_ptau_inv},                  {"delta", delta}};
    r.components = {
        {"log_term", 2.5 * d * consts.kappa_eps * std::log1p(n * consts.h_eps * lambda_max_p1 * dx2 / d)},
        {"initialization_term", 5.0 * lambda_max_ptau_inv * consts.epsilon * consts.epsilon},
        {"confidence_term",
         30.0 * (2.0 * consts.kappa_eps + consts.h_eps * consts.epsilon * consts.epsilon * dx2) * std::log(1.0 / delta)},
    };
    return r;
}

// Cumulative-risk bound, sub-gaussian quadratic setting.
inline BoundReport bound_theorem2(const SubGaussianParams& params, const DataGeometry& geom, double n, double d,
                                  double lambda_max_p1, double lambda_max_ptau_inv, double epsilon, double delta) {
    params.validate();
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("bound_theorem2: delta must lie in (0,1]");
    const double dx2 = geom.d_x * geom.d_x;
    const double eps2dx2 = epsilon * epsilon * dx2;
    BoundReport r;
    r.name = "theorem2_quadratic";
    r.inputs = {{"sigma2", params.sigma2}, {"d_app", params.d_app}, {"d_x", geom.d_x},
                {"n", n},                  {"d", d},                {"lambda_max_p1", lambda_max_p1},
                {"lambda_max_ptau_inv", lambda_max_ptau_inv},       {"epsilon", epsilon},
                {"delta", delta}};
    r.components = {
        {"log_term", 7.5 * d * (8.0 * params.sigma2 + params.d_app * params.d_app + eps2dx2) *
                         std::log1p(n * lambda_max_p1 * dx2 / d)},
        {"initialization_term", 5.0 * lambda_max_ptau_inv * epsilon * epsilon},
        {"confidence_term", 115.0 *
                                (params.sigma2 * (4.0 + lambda_max_p1 * dx2 / 4.0) + params.d_app * params.d_app +
                                 2.0 * eps2dx2) *
                                std::log(1.0 / delta)},
    };
    return r;
}

// ONS cumulative-risk bound at the theorem step size.
inline BoundReport bound_theorem3_ons(double grad_bound, double radius, double lambda, double gamma, double n,
                                      double d, double delta) {
    if (!(grad_bound > 0.0 && radius > 0.0 && lambda > 0.0 && gamma > 0.0))
        throw std::invalid_argument("bound_theorem3_ons: G, D, lambda, gamma must be > 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("bound_theorem3_ons: delta must lie in (0,1]");
    BoundReport r;
    r.name = "theorem3_ons";
    r.inputs = {{"grad_bound", grad_bound}, {"radius", radius}, {"lambda", lambda},
                {"gamma", gamma},           {"n", n},           {"d", d},
                {"delta", delta}};
    r.components = {
        {"log_term", 1.5 / gamma * d * std::log1p(n * grad_bound * grad_bound / (lambda * d))},
        {"regularization_term", lambda * gamma / 6.0 * radius * radius},
        {"confidence_term",
         (12.0 / gamma + 4.0 * gamma * grad_bound * grad_bound * radius * radius / 3.0) * std::log(1.0 / delta)},
    };
    return r;
}

// Global logistic bound; tau is the convergence time tau(1/(20 D_X), delta)
// supplied by the caller (it overflows doubles for realistic inputs, in
// which case the convergence-phase components are infinite).
inline BoundReport bound_theorem5_logistic(const DataGeometry& geom, double theta_star_norm, double theta1_dist,
                                           double n, double d, double lambda_max_p1, double lambda_max_p1_inv,
                                           double tau, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("bound_theorem5_logistic: delta must lie in (0,1]");
    if (tau < 0.0) throw std::invalid_argument("bound_theorem5_logistic: tau must be >= 0");
    const double dx2 = geom.d_x * geom.d_x;
    const double kappa0 = std::exp(geom.d_x * theta_star_norm);
    BoundReport r;
    r.name = "theorem5_logistic";
    r.inputs = {{"d_x", geom.d_x},
                {"theta_star_norm", theta_star_norm},
                {"theta1_dist", theta1_dist},
                {"n", n},
                {"d", d},
                {"lambda_max_p1", lambda_max_p1},
                {"lambda_max_p1_inv", lambda_max_p1_inv},
                {"tau", tau},
                {"delta", delta}};
    r.components = {
        {"log_term", 3.0 * d * kappa0 * std::log1p(n * lambda_max_p1 * dx2 / (4.0 * d))},
        {"initialization_term", lambda_max_p1_inv / (75.0 * dx2)},
        {"confidence_term", 64.0 * kappa0 * std::log(1.0 / delta)},
        {"convergence_linear_term", tau * (1.0 / 300.0 + geom.d_x * theta1_dist)},
        {"convergence_quadratic_term", tau * tau * lambda_max_p1 * dx2 / 2.0},
    };
    return r;
}

struct ConcentrationBound {
    double t_threshold;  // envelope valid for t strictly beyond this
    double lambda_min;
    double beta;

    double envelope(double t) const { return 4.0 / (lambda_min * std::pow(t, 1.0 - beta)); }
};

// High-probability envelope on lambda_max(P_t) for the truncated filter:
// past t > (20 D_X^4/Lambda^2 ln(625 d D_X^8/(Lambda^4 delta)))^{1/(1-beta)},
// lambda_max(P_t) <= 4 / (Lambda t^{1-beta}).
inline ConcentrationBound bound_prop4_concentration(const DataGeometry& geom, double d, double beta, double delta) {
    geom.validate();
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("bound_prop4_concentration: beta must lie in [0,1)");
    if (!(delta > 0.0)) throw std::invalid_argument("bound_prop4_concentration: delta must be > 0");
    const double dx4 = std::pow(geom.d_x, 4.0);
    const double lam = geom.lambda_min;
    const double log_arg = 625.0 * d * std::pow(geom.d_x, 8.0) / (std::pow(lam, 4.0) * delta);
    const double base = std::max(0.0, 20.0 * dx4 / (lam * lam) * std::log(log_arg));
    return {std::pow(base, 1.0 / (1.0 - beta)), lam, beta};
}

// C_delta = max(4/Lambda, lambda_max(P_1) * 20 D_X^4/Lambda^2 * ln(625 d D_X^8 / (Lambda^4 delta))).
inline double concentration_constant(const DataGeometry& geom, double d, double delta, double lambda_max_p1) {
    const double lam = geom.lambda_min;
    const double ln_arg = std::log(625.0) + std::log(d) + 8.0 * std::log(geom.d_x) - 4.0 * std::log(lam) -
                          std::log(delta);
    return std::max(4.0 / lam, lambda_max_p1 * (20.0 * std::pow(geom.d_x, 4.0) / (lam * lam)) * ln_arg);
}

// Logistic convergence time: the max of three terms,
//   (2 (1 + e^{D_X(||theta*||+eps)}))^{1/beta},
//   exp(3*2^15 D_X^12 C_{delta/2}^2 (1+e^{D_X(||theta*||+eps)})^6
//       / (Lambda^6 (1-2 beta)^{3/2} eps^4)),
//   6/delta,
// carried in log space; the exp term dominates astronomically for realistic
// parameters.
struct TauLogisticTerms {
    double log_t1;  // ln of (2(1+e^z))^{1/beta}
    double log_t2;  // the exponential term's exponent
    double log_t3;  // ln(6/delta)

    double log_max() const { return std::max({log_t1, log_t2, log_t3}); }
};

inline TauLogisticTerms tau_logistic_terms(const DataGeometry& geom, double d, double theta_star_norm, double epsilon,
                                           double beta, double delta, double lambda_max_p1) {
    geom.validate();
    if (!(beta > 0.0 && beta < 0.5)) throw std::invalid_argument("tau_logistic: beta must lie in (0, 1/2)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("tau_logistic: epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("tau_logistic: delta must lie in (0,1)");
    const double z = geom.d_x * (theta_star_norm + epsilon);
    const double log_t1 = (std::log(2.0) + softplus(z)) / beta;
    const double c_half = concentration_constant(geom, d, delta / 2.0, lambda_max_p1);
    const double log_t2_exponent_log = std::log(3.0) + 15.0 * std::log(2.0) + 12.0 * std::log(geom.d_x) +
                                       2.0 * std::log(c_half) + 6.0 * softplus(z) -
                                       6.0 * std::log(geom.lambda_min) - 1.5 * std::log1p(-2.0 * beta) -
                                       4.0 * std::log(epsilon);
    const double log_t2 = std::exp(log_t2_exponent_log);
    const double log_t3 = std::log(6.0 / delta);
    return {log_t1, log_t2, log_t3};
}

inline LogValue tau_logistic(const DataGeometry& geom, double d, double theta_star_norm, double epsilon, double beta,
                             double delta, double lambda_max_p1) {
    return make_log_value(tau_logistic_terms(geom, d, theta_star_norm, epsilon, beta, delta, lambda_max_p1).log_max());
}

struct QuadraticInit {
    double theta1_dist;  // ||theta_1 - theta*||
    double p1;           // P_1 = p1 I
};

// Quadratic-setting convergence time tau = max(tau1, tau2, tau3), with the
// printed 0.07 / 0.035 constants.
inline LogValue tau_quadratic(const SubGaussianParams& params, const DataGeometry& geom, const QuadraticInit& init,
                              double theta_star_norm, double epsilon, double delta, double d) {
    params.validate();
    geom.validate();
    if (!(epsilon > 0.0)) throw std::invalid_argument("tau_quadratic: epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("tau_quadratic: delta must lie in (0,1)");
    if (!(init.p1 > 0.0)) throw std::invalid_argument("tau_quadratic: p1 must be > 0");

    const double lam = geom.lambda_min;
    const double dx2 = geom.d_x * geom.d_x;
    const double ln_dinv = std::log(1.0 / delta);
    const double root8ln = std::sqrt(8.0 * ln_dinv);

    const double tau1 = std::max(12.0 * dx2 / lam * (std::log(d) + ln_dinv),
                                 48.0 * dx2 / lam * std::log(24.0 * dx2 / lam));

    const double a_term = init.theta1_dist * init.theta1_dist / (2.0 * init.p1) +
                          dx2 / lam * params.d_app * params.d_app * 4.0 * (1.0 + root8ln) / (0.07 * 0.07) +
                          3.0 * params.sigma2 * (d / 0.035 + ln_dinv) / 0.07;
    const double log_tau2 = std::log(24.0 / (epsilon * lam)) + std::log(a_term) +
                            std::log(std::log(12.0 / (epsilon * lam) * a_term));

    const double bracket = geom.d_x / std::sqrt(lam) * (params.d_app + geom.d_x * theta_star_norm) +
                           init.theta1_dist / std::sqrt(2.0 * init.p1);
    const double b_sqrt_term = init.theta1_dist * init.theta1_dist / init.p1 * dx2 / lam * (1.0 + root8ln) +
                               bracket * bracket * ln_dinv * ln_dinv;
    const double b_log_term = init.theta1_dist * init.theta1_dist / (2.0 * init.p1) * (1.0 + dx2 / lam) *
                                  (1.0 + root8ln) +
                              bracket * bracket * ln_dinv * ln_dinv;
    const double c96 = 96.0 / (0.07 * 0.07 * epsilon * lam);
    const double log_tau3 = 0.5 * std::log(c96) + 0.5 * std::log(b_sqrt_term) +
                            std::log(std::log(c96 * b_log_term));

    const double log_tau = std::max({std::log(tau1), log_tau2, log_tau3});
    return make_log_value(log_tau);
}

// Worst-case drift bound on the early quadratic-filter iterates:
// ||theta_t - theta*|| <= ||theta_1 - theta*||
//                        + lambda_max(P_1) D_X ((3 sigma + D_app)(t-1) + 3 sigma ln(1/delta)).
inline double bound_lemma9_early(const SubGaussianParams& params, const DataGeometry& geom, double lambda_max_p1,
                                 double theta1_dist, double t, double delta) {
    params.validate();
    if (!(t >= 1.0)) throw std::invalid_argument("bound_lemma9_early: t must be >= 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("bound_lemma9_early: delta must lie in (0,1]");
    const double sigma = std::sqrt(params.sigma2);
    return theta1_dist +
           lambda_max_p1 * geom.d_x * ((3.0 * sigma + params.d_app) * (t - 1.0) + 3.0 * sigma * std::log(1.0 / delta));
}

// Simultaneous martingale threshold for a free multiplier lambda:
// sum (dN - lambda/2 (dN^2 + E[dN^2 | F])) stays below ln(1/delta)/lambda.
inline double lemma1_threshold(double lambda, double delta) {
    if (!(lambda > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("lemma1_threshold: lambda > 0 and delta in (0,1) required");
    return std::log(1.0 / delta) / lambda;
}

// The multiplier values the proofs pin lambda to, exposed alongside the
// free-lambda threshold.
inline double pinned_lambda_bounded(double kappa_eps) {
    const double e01 = std::exp(0.1) - 1.0;
    return (0.75 - 5.0 * e01) / ((10.0 * e01 + 1.5) * kappa_eps);
}

inline double pinned_lambda_quadratic(double sigma2, double d_app, double eps2dx2) {
    const double e01 = std::exp(0.1) - 1.0;
    const double s = 8.0 * sigma2 + d_app * d_app + eps2dx2;
    const double s1 = sigma2 + d_app * d_app + eps2dx2;
    return (0.8 - 5.0 * e01) / (30.0 * e01 * s + 4.5 * s1);
}

} // namespace ekfglm
