#pragma once

// The Gaussian log-moment constant C1 = -E log X^2, the gap function
// g(a) = log(1 + a^2) - E log (X + a)^2, and the complete-bipartite sweep
// that measures how close log Phi~ gets to log Phi per vertex.

#include "matchpoly/estimator.hpp"
#include "matchpoly/exact.hpp"
#include "matchpoly/graph.hpp"
#include "matchpoly/rng.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace matchpoly {

namespace quad {

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson with Richardson correction, absolute tolerance `tol`.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int max_depth = 50)
{
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Adaptive Simpson on unit-width panels, so narrow peaks are never skipped
/// by the first coarse estimate.
inline double paneled_simpson(const std::function<double(double)>& f, double a, double b, double tol)
{
    if (!(b > a)) return 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil(b - a)));
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double lo = a + i * h;
        const double hi = i + 1 == panels ? b : lo + h;
        sum += adaptive_simpson(f, lo, hi, tol / panels);
    }
    return sum;
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

} // namespace quad

/// Tail cut-off in standard deviations; exp(-40^2/2) is far below 1e-300.
inline constexpr double kGaussianTail = 40.0;

/// E log((X + a)^2) for standard normal X. The log singularity at X = -a is
/// removed on [-1, 1] (in y = X + a) by y = +-u^2, which turns the
/// integrand into 8 u log(u) pdf(+-u^2 - a).
inline double expected_log_square(double a, double tol = 1e-12)
{
    auto f = [a](double y) { return std::log(y * y) * quad::normal_pdf(y - a); };
    auto near_pos = [a](double u) { return u == 0.0 ? 0.0 : 8.0 * u * std::log(u) * quad::normal_pdf(u * u - a); };
    auto near_neg = [a](double u) { return u == 0.0 ? 0.0 : 8.0 * u * std::log(u) * quad::normal_pdf(-u * u - a); };

    const double lo = a - kGaussianTail;
    const double hi = a + kGaussianTail;
    if (lo >= 1.0) return quad::paneled_simpson(f, lo, hi, tol);

    const double piece_tol = tol / 4.0;
    double total = quad::adaptive_simpson(near_pos, 0.0, 1.0, piece_tol) +
                   quad::adaptive_simpson(near_neg, 0.0, 1.0, piece_tol);
    total += quad::paneled_simpson(f, 1.0, hi, piece_tol);
    if (lo < -1.0) total += quad::paneled_simpson(f, lo, -1.0, piece_tol);
    return total;
}

/// C1 = -(1/sqrt(2 pi)) int log(x^2) e^{-x^2/2} dx = 1.2703628454...
/// Integrated over x >= 0 (u = sqrt(x) near the origin) and doubled.
inline double c1_constant(double tol = 1e-12)
{
    auto near = [](double u) { return u == 0.0 ? 0.0 : 8.0 * u * std::log(u) * quad::normal_pdf(u * u); };
    auto far = [](double x) { return std::log(x * x) * quad::normal_pdf(x); };
    const double half = quad::adaptive_simpson(near, 0.0, 1.0, tol / 4.0) +
                        quad::paneled_simpson(far, 1.0, kGaussianTail, tol / 4.0);
    return -2.0 * half;
}

/// g(a) = log(1 + a^2) - E log((X + a)^2); g(0) = C1, decreasing to 0.
inline double gaussian_log_gap(double a, double tol = 1e-12)
{
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("gaussian_log_gap: a must be finite and >= 0");
    return std::log1p(a * a) - expected_log_square(a, tol);
}

// ---------------------------------------------------------------------------
// Optimality sweep over complete bipartite graphs
// ---------------------------------------------------------------------------

struct GapSweepRow {
    std::size_t m = 0;
    std::size_t n = 0;
    double t = 0.0;
    double a = 0.0; ///< weights lie in [b^2, a^2]
    double b = 0.0;
    bool uniform = true;
    std::size_t k = 0;
    double estimate_per_vertex = 0.0;
    double exact_per_vertex = 0.0;
    double gap_per_vertex = 0.0;
    double std_err_per_vertex = 0.0;
    double bound_per_vertex = 0.0; ///< min(a^2/(2t), C1)
};

inline WeightedGraph complete_bipartite_graph(std::size_t m, std::size_t n, const std::function<double()>& weight)
{
    std::vector<Edge> edges;
    edges.reserve(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            edges.push_back({static_cast<Vertex>(i), static_cast<Vertex>(m + j), weight()});
    return WeightedGraph(m + n, std::move(edges));
}

/// Largest side pair for which random-weight rows can use the exact oracle.
inline constexpr std::size_t kSweepRandomMaxSide = 4;

/// For each (m, n), estimates log Phi~ on K_{m,n} and compares per vertex
/// with the exact log Phi. b == a gives uniform weight a^2 (closed form);
/// b < a draws weights uniformly in [b^2, a^2] (exact oracle, n <= 4).
inline std::vector<GapSweepRow> optimality_sweep(const std::vector<std::pair<std::size_t, std::size_t>>& sides,
                                                 double t, double b, double a, std::uint64_t seed, std::size_t k,
                                                 const EstimatorOptions& opts = {})
{
    if (!(t > 0.0)) throw std::invalid_argument("sweep: t must be positive");
    if (!(b > 0.0 && b <= a) || !std::isfinite(a)) throw std::invalid_argument("sweep: need 0 < b <= a");
    const bool uniform = b == a;
    const double c1 = c1_constant();

    std::vector<GapSweepRow> rows;
    rows.reserve(sides.size());
    for (std::size_t r = 0; r < sides.size(); ++r) {
        auto [m, n] = sides[r];
        if (m > n) std::swap(m, n);
        if (m == 0) throw std::invalid_argument("sweep: side sizes must be positive");
        const std::uint64_t row_seed = mix_seed(seed, r);

        WeightedGraph g;
        MatchingCounts exact;
        if (uniform) {
            const double w = a * a;
            g = complete_bipartite_graph(m, n, [w] { return w; });
            exact = complete_bipartite_counts(m, n, w);
        } else {
            if (n > kSweepRandomMaxSide)
                throw std::invalid_argument("sweep: random weights need n <= 4 for exact values");
            RngStream weights(row_seed, ~std::uint64_t{0});
            const double lo = b * b;
            const double hi = a * a;
            g = complete_bipartite_graph(m, n, [&] { return lo + (hi - lo) * weights.next_uniform(); });
            exact = matching_counts(g);
        }

        const EstimateResult est = estimate_log_phi_tilde(g, t, k, row_seed, opts);
        const double nv = static_cast<double>(m + n);

        GapSweepRow row;
        row.m = m;
        row.n = n;
        row.t = t;
        row.a = a;
        row.b = b;
        row.uniform = uniform;
        row.k = k;
        row.estimate_per_vertex = est.mean_log / nv;
        row.exact_per_vertex = log_matching_poly(exact, t) / nv;
        row.gap_per_vertex = row.exact_per_vertex - row.estimate_per_vertex;
        row.std_err_per_vertex = est.std_err / nv;
        row.bound_per_vertex = std::min(a * a / (2.0 * t), c1);
        rows.push_back(row);
    }
    return rows;
}

} // namespace matchpoly
