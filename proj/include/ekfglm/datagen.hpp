// Simulation processes: the well-specified logistic design, the switching
// logistic mixture, sub-gaussian linear data, and an isotropic logistic
// design used where concentration thresholds must land inside a desk-scale
// horizon.
//
// The default design is X = (1, Z^T)^T with Z uniform on [0,1]^{d-1}, so
// ||X|| <= sqrt(d) and E[XX^T] has entries {1, 1/2, 1/3, 1/4}. The isotropic
// design draws X uniformly on the unit sphere, so ||X|| = 1 and
// E[XX^T] = I/d.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ekfglm/linalg.hpp"
#include "ekfglm/models.hpp"
#include "ekfglm/rng.hpp"

namespace ekfglm {

enum class ProcessKind {
    LogisticWellSpec,   // y = +-1 Bernoulli(sigmoid(theta_star . x)), box design
    LogisticSwitchMix,  // component theta_star or theta2 picked uniformly per step
    LinearSubGaussian,  // y = theta_star . x + bounded deterministic bias + sigma Z
    LogisticIsotropic,  // well-specified logistic on the unit-sphere design
};

struct DataProcess {
    ProcessKind kind;
    std::size_t d = 0;
    Vec theta_star;
    Vec theta2;           // second mixture component, switch-mix only
    double sigma = 0.0;   // conditional noise s.d., linear only
    double d_app_bias = 0.0;  // magnitude of the deterministic bias, linear only
    std::uint64_t seed = 0;   // carried for config echo; streams come from caller rng

    void validate() const {
        if (d < 1) throw std::invalid_argument("DataProcess: d must be >= 1");
        if (theta_star.size() != d) throw std::invalid_argument("DataProcess: theta_star must have dimension d");
        if (kind == ProcessKind::LogisticSwitchMix && theta2.size() != d)
            throw std::invalid_argument("DataProcess: theta2 must have dimension d");
        if (sigma < 0.0) throw std::invalid_argument("DataProcess: sigma must be >= 0");
        if (d_app_bias < 0.0) throw std::invalid_argument("DataProcess: d_app_bias must be >= 0");
    }

    bool is_logistic() const { return kind != ProcessKind::LinearSubGaussian; }
    GlmModel model() const { return is_logistic() ? GlmModel::logistic() : GlmModel::gaussian(); }
};

// The parameter vectors of the reference experiments, exactly as printed.
struct NamedTheta {
    std::string name;
    Vec theta;
};

inline std::vector<NamedTheta> default_theta_stars() {
    const Vec setting1 = {-9, 0, 3, -9, 4, -9, 15, 0, -7, 1, 0};
    Vec setting2(setting1.size());
    for (std::size_t i = 0; i < setting1.size(); ++i) setting2[i] = setting1[i] / 10.0;
    Vec misspec2 = setting2;
    misspec2[0] = 15.0 / 10.0;
    return {{"setting1", setting1}, {"setting2", setting2}, {"misspec_theta2", misspec2}};
}

inline Vec named_theta(const std::string& name) {
    for (const NamedTheta& nt : default_theta_stars())
        if (nt.name == name) return nt.theta;
    throw std::invalid_argument("named_theta: unknown name '" + name + "'");
}

inline Vec draw_x(const DataProcess& proc, Rng& rng) {
    Vec x(proc.d);
    if (proc.kind == ProcessKind::LogisticIsotropic) {
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (double& v : x) {
                v = rng.normal();
                n2 += v * v;
            }
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (double& v : x) v *= inv;
        return x;
    }
    x[0] = 1.0;
    for (std::size_t i = 1; i < proc.d; ++i) x[i] = rng.uniform01();
    return x;
}

inline std::pair<Vec, double> next_observation(const DataProcess& proc, Rng& rng) {
    Vec x = draw_x(proc, rng);
    double y = 0.0;
    switch (proc.kind) {
        case ProcessKind::LogisticWellSpec:
        case ProcessKind::LogisticIsotropic:
            y = rng.bernoulli(sigmoid(dot(proc.theta_star, x))) ? 1.0 : -1.0;
            break;
        case ProcessKind::LogisticSwitchMix: {
            const Vec& component = rng.bernoulli(0.5) ? proc.theta_star : proc.theta2;
            y = rng.bernoulli(sigmoid(dot(component, x))) ? 1.0 : -1.0;
            break;
        }
        case ProcessKind::LinearSubGaussian: {
            // Deterministic bias of magnitude d_app_bias: the sign of a fixed
            // zero-mean linear form of x.
            double form = 0.0;
            for (std::size_t i = 1; i < proc.d; ++i) form += x[i] - 0.5;
            const double bias = proc.d_app_bias * (form >= 0.0 ? 1.0 : -1.0);
            y = dot(proc.theta_star, x) + bias + (proc.sigma > 0.0 ? proc.sigma * rng.normal() : 0.0);
            break;
        }
    }
    return {std::move(x), y};
}

inline std::vector<Observation> draw_stream(const DataProcess& proc, std::size_t n, Rng& rng) {
    std::vector<Observation> stream;
    stream.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [x, y] = next_observation(proc, rng);
        stream.push_back({std::move(x), y});
    }
    return stream;
}

// Closed-form E[XX^T] of the design.
inline SymMatrix analytic_second_moment(const DataProcess& proc) {
    SymMatrix m(proc.d);
    if (proc.kind == ProcessKind::LogisticIsotropic) {
        for (std::size_t i = 0; i < proc.d; ++i) m.set(i, i, 1.0 / static_cast<double>(proc.d));
        return m;
    }
    m.set(0, 0, 1.0);
    for (std::size_t i = 1; i < proc.d; ++i) {
        m.set(0, i, 0.5);
        m.set(i, i, 1.0 / 3.0);
        for (std::size_t j = 1; j < i; ++j) m.set(i, j, 0.25);
    }
    return m;
}

// sup over the design's support of |theta . x|; exact for both designs.
inline double sup_abs_dot(const DataProcess& proc, const Vec& theta) {
    if (theta.size() != proc.d) throw std::invalid_argument("sup_abs_dot: dimension mismatch");
    if (proc.kind == ProcessKind::LogisticIsotropic) return norm2(theta);
    double lo = theta[0], hi = theta[0];
    for (std::size_t i = 1; i < proc.d; ++i) {
        lo += std::min(theta[i], 0.0);
        hi += std::max(theta[i], 0.0);
    }
    return std::max(std::abs(lo), std::abs(hi));
}

struct DataGeometry {
    double d_x;         // norm bound on the regressors
    double lambda_min;  // smallest eigenvalue of E[XX^T]

    void validate() const {
        if (!(lambda_min > 0.0) || !(lambda_min <= d_x * d_x * (1.0 + 1e-12)))
            throw std::invalid_argument("DataGeometry: requires 0 < lambda_min <= D_X^2");
    }
};

inline double analytic_d_x(const DataProcess& proc) {
    return proc.kind == ProcessKind::LogisticIsotropic ? 1.0 : std::sqrt(static_cast<double>(proc.d));
}

inline DataGeometry analytic_geometry(const DataProcess& proc) {
    const EigenExtremes ee = eigen_extremes(analytic_second_moment(proc));
    DataGeometry g{analytic_d_x(proc), ee.lambda_min};
    g.validate();
    return g;
}

struct GeometryEstimate {
    DataGeometry geometry;
    double lambda_min_stderr;  // from 10 batch repeats
};

// D_X analytically, Lambda_min from the empirical second moment over n_probe
// draws, with a standard error from 10 batch repeats.
inline GeometryEstimate data_geometry(const DataProcess& proc, std::size_t n_probe, Rng& rng) {
    proc.validate();
    if (n_probe < 10 * proc.d * proc.d)
        throw std::invalid_argument("data_geometry: n_probe must be at least 10*d^2");

    constexpr std::size_t n_batches = 10;
    const std::size_t batch = n_probe / n_batches;
    SymMatrix total(proc.d);
    Vec batch_lambda;
    batch_lambda.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        SymMatrix acc(proc.d);
        for (std::size_t i = 0; i < batch; ++i) {
            const Vec x = draw_x(proc, rng);
            acc.add_outer(x, 1.0);
        }
        batch_lambda.push_back(eigen_extremes(acc).lambda_min / static_cast<double>(batch));
        total = total + acc;
    }
    const double n_total = static_cast<double>(batch * n_batches);
    SymMatrix mean(proc.d);
    for (std::size_t i = 0; i < proc.d; ++i)
        for (std::size_t j = 0; j <= i; ++j) mean.set(i, j, total(i, j) / n_total);

    double mu = 0.0;
    for (double v : batch_lambda) mu += v;
    mu /= static_cast<double>(n_batches);
    double var = 0.0;
    for (double v : batch_lambda) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n_batches - 1);

    GeometryEstimate est;
    est.geometry = DataGeometry{analytic_d_x(proc), eigen_extremes(mean).lambda_min};
    est.lambda_min_stderr = std::sqrt(var / static_cast<double>(n_batches));
    est.geometry.validate();
    return est;
}

} // namespace ekfglm
