#pragma once

// log det(sqrt(t) I + Y) for skew-symmetric Y: dense LU in general, Gram
// matrix eigenvalues when Y has the bipartite block form [0 U; -U^T 0].

#include "matchpoly/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matchpoly {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sign or pivot breakdown at t > 0. The exact determinant is positive there,
/// so this always means the arithmetic failed.
class NonPositiveDeterminant : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Sample is singular at t = 0 (log det = -inf).
class SingularAtZero : public NumericalError {
public:
    SingularAtZero() : NumericalError("sample is singular at t = 0") {}
};

/// Scratch space for repeated factorisations of the same size.
struct LuWorkspace {
    Matrix lu;
};

/// log det(sqrt(t) I + y) via LU with partial pivoting. y must be square and
/// skew-symmetric. For t = 0 the dimension must be even.
inline double log_det_shifted(const Matrix& y, double t, LuWorkspace& ws)
{
    if (!y.square()) throw std::invalid_argument("log_det_shifted: matrix must be square");
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("log_det_shifted: t must be finite and >= 0");
    const std::size_t n = y.rows();
    if (t == 0.0 && n % 2 == 1) throw std::invalid_argument("log_det_shifted: t = 0 requires even dimension");
    if (n == 0) return 0.0;

    Matrix& a = ws.lu;
    a = y;
    const double shift = std::sqrt(t);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) += shift;
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    }
    if (scale == 0.0) {
        if (t == 0.0) throw SingularAtZero();
        throw NonPositiveDeterminant("log_det_shifted: zero matrix");
    }
    const double singular_tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

    int sign = 1;
    double log_abs = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > best) best = std::abs(a(i, k)), piv = i;

        if (t == 0.0 && best <= singular_tol) throw SingularAtZero();
        if (best < std::numeric_limits<double>::min())
            throw NonPositiveDeterminant("log_det_shifted: pivot underflow at column " + std::to_string(k));

        if (piv != k) {
            auto rk = a.row(k);
            auto rp = a.row(piv);
            std::swap_ranges(rk.begin() + k, rk.end(), rp.begin() + k);
            sign = -sign;
        }
        const double pivot = a(k, k);
        if (pivot < 0.0) sign = -sign;
        log_abs += std::log(std::abs(pivot));

        const auto rk = a.row(k);
        for (std::size_t i = k + 1; i < n; ++i) {
            auto ri = a.row(i);
            const double f = ri[k] / pivot;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
        }
    }
    if (sign != 1) throw NonPositiveDeterminant("log_det_shifted: negative determinant");
    return log_abs;
}

inline double log_det_shifted(const Matrix& y, double t)
{
    LuWorkspace ws;
    return log_det_shifted(y, t, ws);
}

/// Eigenvalues of a symmetric matrix in nonincreasing order, by cyclic Jacobi
/// rotations. Stops when the off-diagonal Frobenius norm drops below
/// 1e-12 times the diagonal scale.
inline std::vector<double> symmetric_eigenvalues(Matrix s)
{
    if (!s.square()) throw std::invalid_argument("symmetric_eigenvalues: matrix must be square");
    const std::size_t n = s.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(s(i, j) - s(j, i)) > 1e-12)
                throw std::invalid_argument("symmetric_eigenvalues: matrix is not symmetric");

    auto off_norm = [&] {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) sum += s(i, j) * s(i, j);
        return std::sqrt(sum);
    };
    auto diag_scale = [&] {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += s(i, i) * s(i, i);
        return std::sqrt(sum);
    };

    constexpr int kMaxSweeps = 50;
    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
        const double off = off_norm();
        if (off == 0.0 || off < 1e-12 * diag_scale()) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (apq == 0.0) continue;
                const double tau = (s(q, q) - s(p, p)) / (2.0 * apq);
                const double tn = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + tn * tn);
                const double sn = tn * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = s(k, p);
                    const double akq = s(k, q);
                    s(k, p) = c * akp - sn * akq;
                    s(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = s(p, k);
                    const double aqk = s(q, k);
                    s(p, k) = c * apk - sn * aqk;
                    s(q, k) = sn * apk + c * aqk;
                }
                s(p, q) = 0.0;
                s(q, p) = 0.0;
            }
    }
    if (sweep == kMaxSweeps) throw NumericalError("symmetric_eigenvalues: Jacobi did not converge in 50 sweeps");

    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = s(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// log det(sqrt(t) I_{m+n} + [0 U; -U^T 0]) for an m x n block U, m <= n,
/// as ((n-m)/2) log t + sum_i log(t + sigma_i^2) with sigma_i^2 the
/// eigenvalues of U U^T.
inline double log_det_bipartite(const Matrix& u, double t)
{
    const std::size_t m = u.rows();
    const std::size_t n = u.cols();
    if (m > n) throw std::invalid_argument("log_det_bipartite: requires rows <= cols");
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("log_det_bipartite: t must be finite and >= 0");
    if (t == 0.0 && m != n) throw SingularAtZero();

    double result = n > m ? 0.5 * static_cast<double>(n - m) * std::log(t) : 0.0;
    if (m == 0) return result;

    const std::vector<double> sq = symmetric_eigenvalues(gram(u));
    const double tol = static_cast<double>(m) * std::numeric_limits<double>::epsilon() * std::max(sq.front(), 0.0);
    for (double s2 : sq) {
        const double v = std::max(s2, 0.0);
        if (t == 0.0 && v <= tol) throw SingularAtZero();
        result += std::log(t + v);
    }
    return result;
}

} // namespace matchpoly
