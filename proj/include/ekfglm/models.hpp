// Generalized linear model family: per-observation loss, scalar gradient and
// scalar curvature, and conditional sampling for well-specified data.
//
// A member is the negative log-likelihood of h(y) exp((y u - b(u)) / a) with
// u = theta^T x. Losses are reported without the y-only -ln h(y) constant;
// every excess-risk quantity is a difference so the constant cancels.
//   Logistic: a = 2, b(u) = 2 ln(1+e^u) - u, y in {-1,+1}.
//   Gaussian: a = 1, b(u) = u^2/2, y real.
// All logistic evaluations use softplus / log-sum-exp forms: the experiments
// drive |theta^T x| into the tens, where naive exp overflows.
#pragma once

#include <cmath>
#include <stdexcept>

#include "ekfglm/linalg.hpp"
#include "ekfglm/rng.hpp"

namespace ekfglm {

// One (x, y) pair of a data stream.
struct Observation {
    Vec x;
    double y;
};

enum class GlmKind { Logistic, Gaussian };

struct GlmModel {
    GlmKind kind;

    static GlmModel logistic() { return {GlmKind::Logistic}; }
    static GlmModel gaussian() { return {GlmKind::Gaussian}; }

    double dispersion() const { return kind == GlmKind::Logistic ? 2.0 : 1.0; }
};

struct LossEval {
    double loss;         // l(y, u), up to the y-only constant
    double grad_scalar;  // l'(y, u) = (b'(u) - y) / a
    double curv_scalar;  // l''(y, u) = b''(u) / a, always >= 0
};

// ln(1 + e^z) without overflow.
inline double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

// 1 / (1 + e^-z) without overflow.
inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// sigmoid(u) * sigmoid(-u) = 1 / ((1+e^u)(1+e^-u)), the logistic curvature.
inline double sigmoid_product(double u) {
    const double e = std::exp(-std::abs(u));
    const double onep = 1.0 + e;
    return e / (onep * onep);
}

inline LossEval evaluate(const GlmModel& model, double y, double u) {
    if (!std::isfinite(y) || !std::isfinite(u)) throw std::invalid_argument("evaluate: non-finite input");
    if (model.kind == GlmKind::Logistic) {
        if (y != 1.0 && y != -1.0) throw std::invalid_argument("evaluate: logistic y must be -1 or +1");
        const double yu = y * u;
        return {softplus(-yu), -y * sigmoid(-yu), sigmoid_product(u)};
    }
    const double r = u - y;
    return {0.5 * r * r, r, 1.0};
}

// Draws y ~ p_theta(. | x) given u = theta^T x. Logistic ignores noise_sigma;
// Gaussian uses it as the conditional standard deviation.
inline double sample_y(const GlmModel& model, double u, double noise_sigma, Rng& rng) {
    if (noise_sigma < 0.0) throw std::invalid_argument("sample_y: noise_sigma must be >= 0");
    if (model.kind == GlmKind::Logistic) return rng.bernoulli(sigmoid(u)) ? 1.0 : -1.0;
    return noise_sigma == 0.0 ? u : u + noise_sigma * rng.normal();
}

} // namespace ekfglm
