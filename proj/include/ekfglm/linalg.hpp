// Small dense symmetric-matrix kernel: rank-one precision updates in
// covariance form, PD solves, extreme eigenvalues, quadratic forms.
// Everything is value-semantic and sized for d up to a few hundred.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ekfglm {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator-(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector subtraction: dimension mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec operator+(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector addition: dimension mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scaled(const Vec& a, double c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

// Dense symmetric matrix, full storage, symmetrized on every write path.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(std::size_t dim, double diag = 0.0) : dim_(dim), a_(dim * dim, 0.0) {
        if (dim == 0) throw std::invalid_argument("SymMatrix: dimension must be >= 1");
        for (std::size_t i = 0; i < dim; ++i) a_[i * dim + i] = diag;
    }

    static SymMatrix identity(std::size_t dim, double scale = 1.0) { return SymMatrix(dim, scale); }

    std::size_t dim() const { return dim_; }

    double operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

    // Writes both triangles so symmetry holds bitwise.
    void set(std::size_t i, std::size_t j, double v) {
        a_[i * dim_ + j] = v;
        a_[j * dim_ + i] = v;
    }

    void add(std::size_t i, std::size_t j, double v) { set(i, j, (*this)(i, j) + v); }

    const double* data() const { return a_.data(); }

    bool is_finite() const {
        for (double x : a_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) t += a_[i * dim_ + i];
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double x : a_) s += x * x;
        return std::sqrt(s);
    }

    Vec apply(const Vec& x) const {
        if (x.size() != dim_) throw std::invalid_argument("SymMatrix::apply: dimension mismatch");
        Vec y(dim_, 0.0);
        for (std::size_t i = 0; i < dim_; ++i) {
            const double* row = a_.data() + i * dim_;
            double s = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
        return y;
    }

    // this += c * x x^T, written symmetrically.
    void add_outer(const Vec& x, double c) {
        if (x.size() != dim_) throw std::invalid_argument("SymMatrix::add_outer: dimension mismatch");
        for (std::size_t i = 0; i < dim_; ++i) {
            const double cxi = c * x[i];
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = a_[i * dim_ + j] + cxi * x[j];
                a_[i * dim_ + j] = v;
                a_[j * dim_ + i] = v;
            }
        }
    }

    SymMatrix operator-(const SymMatrix& other) const {
        if (other.dim_ != dim_) throw std::invalid_argument("SymMatrix subtraction: dimension mismatch");
        SymMatrix r = *this;
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] -= other.a_[k];
        return r;
    }

    SymMatrix operator+(const SymMatrix& other) const {
        if (other.dim_ != dim_) throw std::invalid_argument("SymMatrix addition: dimension mismatch");
        SymMatrix r = *this;
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] += other.a_[k];
        return r;
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> a_;
};

// x^T P x.
inline double quad_form(const SymMatrix& P, const Vec& x) {
    if (x.size() != P.dim()) throw std::invalid_argument("quad_form: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < P.dim(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < P.dim(); ++j) row += P(i, j) * x[j];
        s += x[i] * row;
    }
    return s;
}

// Covariance-form rank-one shrink:
//   P' = P - alpha * (P x)(P x)^T / (1 + alpha * x^T P x),
// equivalent to (P')^{-1} = P^{-1} + alpha x x^T in exact arithmetic.
// The result is written symmetrically so symmetry never drifts over long runs.
inline SymMatrix sherman_morrison_shrink(SymMatrix P, const Vec& x, double alpha) {
    if (x.size() != P.dim()) throw std::invalid_argument("sherman_morrison_shrink: dimension mismatch");
    if (alpha < 0.0 || !std::isfinite(alpha)) throw std::invalid_argument("sherman_morrison_shrink: alpha must be finite and >= 0");
    if (!all_finite(x) || !P.is_finite()) throw std::invalid_argument("sherman_morrison_shrink: non-finite input");
    if (alpha == 0.0) return P;
    const Vec px = P.apply(x);
    const double denom = 1.0 + alpha * dot(x, px);
    P.add_outer(px, -alpha / denom);
    return P;
}

// Cholesky factorization of a PD matrix; throws if a pivot falls below
// 1e-14 * trace/d (numerically singular per the kernel contract).
class Cholesky {
public:
    explicit Cholesky(const SymMatrix& A) : dim_(A.dim()), l_(dim_ * dim_, 0.0) {
        if (!A.is_finite()) throw std::invalid_argument("Cholesky: non-finite entries");
        const double pivot_floor = 1e-14 * A.trace() / static_cast<double>(dim_);
        for (std::size_t j = 0; j < dim_; ++j) {
            double d = A(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_[j * dim_ + k] * l_[j * dim_ + k];
            if (!(d > pivot_floor))
                throw std::invalid_argument("Cholesky: matrix is numerically singular or not positive definite (pivot " +
                                            std::to_string(d) + " at column " + std::to_string(j) + ")");
            const double lj = std::sqrt(d);
            l_[j * dim_ + j] = lj;
            for (std::size_t i = j + 1; i < dim_; ++i) {
                double s = A(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_[i * dim_ + k] * l_[j * dim_ + k];
                l_[i * dim_ + j] = s / lj;
            }
        }
    }

    Vec solve(const Vec& b) const {
        if (b.size() != dim_) throw std::invalid_argument("Cholesky::solve: dimension mismatch");
        Vec y(b);
        for (std::size_t i = 0; i < dim_; ++i) {
            double s = y[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_[i * dim_ + k] * y[k];
            y[i] = s / l_[i * dim_ + i];
        }
        for (std::size_t ii = dim_; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < dim_; ++k) s -= l_[k * dim_ + ii] * y[k];
            y[ii] = s / l_[ii * dim_ + ii];
        }
        return y;
    }

private:
    std::size_t dim_;
    std::vector<double> l_;
};

inline Vec solve_pd(const SymMatrix& P, const Vec& b) { return Cholesky(P).solve(b); }

inline SymMatrix invert_pd(const SymMatrix& P) {
    const Cholesky chol(P);
    const std::size_t d = P.dim();
    SymMatrix inv(d);
    std::vector<Vec> cols(d);
    Vec e(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        e[j] = 1.0;
        cols[j] = chol.solve(e);
        e[j] = 0.0;
    }
    // Column solves of a symmetric inverse can disagree in the last ulp
    // between (i,j) and (j,i); average the two.
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) inv.set(i, j, 0.5 * (cols[j][i] + cols[i][j]));
    return inv;
}

struct EigenSystem {
    Vec values;                      // ascending
    std::vector<Vec> vectors;        // vectors[k] pairs with values[k]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Intended for the
// small dimensions used here (the experiments run at d = 11).
inline EigenSystem eigen_sym(const SymMatrix& A, bool want_vectors = true) {
    if (!A.is_finite()) throw std::invalid_argument("eigen_sym: non-finite entries");
    const std::size_t d = A.dim();
    std::vector<double> m(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m[i * d + j] = A(i, j);
    std::vector<double> q;
    if (want_vectors) {
        q.assign(d * d, 0.0);
        for (std::size_t i = 0; i < d; ++i) q[i * d + i] = 1.0;
    }

    double scale = 0.0;
    for (double v : m) scale = std::max(scale, std::abs(v));
    const double tol = (scale == 0.0) ? 0.0 : 1e-15 * scale;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t r = p + 1; r < d; ++r) off = std::max(off, std::abs(m[p * d + r]));
        if (off <= tol) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t r = p + 1; r < d; ++r) {
                const double apq = m[p * d + r];
                if (std::abs(apq) <= tol * 1e-2) continue;
                const double app = m[p * d + p];
                const double aqq = m[r * d + r];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = ((theta >= 0.0) ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double mkp = m[k * d + p];
                    const double mkq = m[k * d + r];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + r] = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double mpk = m[p * d + k];
                    const double mqk = m[r * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[r * d + k] = s * mpk + c * mqk;
                }
                if (want_vectors) {
                    for (std::size_t k = 0; k < d; ++k) {
                        const double qkp = q[k * d + p];
                        const double qkq = q[k * d + r];
                        q[k * d + p] = c * qkp - s * qkq;
                        q[k * d + r] = s * qkp + c * qkq;
                    }
                }
            }
        }
    }

    EigenSystem es;
    es.values.resize(d);
    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m[a * d + a] < m[b * d + b]; });
    for (std::size_t k = 0; k < d; ++k) es.values[k] = m[order[k] * d + order[k]];
    if (want_vectors) {
        es.vectors.resize(d, Vec(d));
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < d; ++i) es.vectors[k][i] = q[i * d + order[k]];
    }
    return es;
}

struct EigenExtremes {
    double lambda_min;
    double lambda_max;
};

inline EigenExtremes eigen_extremes(const SymMatrix& P) {
    const EigenSystem es = eigen_sym(P, /*want_vectors=*/false);
    return {es.values.front(), es.values.back()};
}

inline bool is_positive_definite(const SymMatrix& P) {
    try {
        Cholesky c(P);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

} // namespace ekfglm
