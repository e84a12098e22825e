#pragma once

// Monte Carlo estimation of log Phi~(t, G) = E log det(sqrt(t) I + Y_A),
// sample planning for (eps, delta) guarantees, and the certified bounds on
// log Phi(t, G).

#include "matchpoly/graph.hpp"
#include "matchpoly/linalg.hpp"
#include "matchpoly/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace matchpoly {

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Writes a realisation of Y_A into `y`: one normal per unordered pair
/// (i < j), drawn in row-major upper-triangle order, scaled by a_ij.
/// Entries off the edge set stay exactly zero.
inline void sample_skew_into(const SkewAdjacency& a, RngStream& stream, Matrix& y, std::vector<double>& normals)
{
    const std::size_t n = a.dimension();
    if (y.rows() != n || y.cols() != n) y.resize(n, n);
    normals.resize(n * (n - (n > 0 ? 1 : 0)) / 2);
    stream.fill_normals(normals);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j, ++idx) {
            const double aij = a.entries(i, j);
            const double v = aij == 0.0 ? 0.0 : aij * normals[idx];
            y(i, j) = v;
            y(j, i) = -v;
        }
    }
}

inline Matrix sample_skew(const SkewAdjacency& a, std::uint64_t seed, std::uint64_t index)
{
    RngStream stream(seed, index);
    Matrix y;
    std::vector<double> normals;
    sample_skew_into(a, stream, y, normals);
    return y;
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

enum class FastPath { automatic, on, off };

struct EstimatorOptions {
    unsigned threads = 0; ///< 0 = hardware concurrency
    FastPath fast_path = FastPath::automatic;
    /// When set, count sampled entries with |y_ij| > a sqrt(2 log(N^2 k / delta)).
    std::optional<double> entry_bound_delta;
};

struct EstimateResult {
    std::size_t k = 0;
    std::vector<double> per_sample; ///< log det of each non-singular sample, in index order
    double mean_log = 0.0;
    double std_err = 0.0;
    std::uint64_t seed = 0;
    double t = 0.0;
    std::size_t failures = 0; ///< samples singular at t = 0
    bool bipartite_path = false;
    std::optional<std::size_t> entry_bound_exceedances;

    friend bool operator==(const EstimateResult&, const EstimateResult&) = default;
};

/// log of the arithmetic mean of exp(per_sample), computed without overflow.
inline double log_mean_exp(const std::vector<double>& xs)
{
    if (xs.empty()) return -std::numeric_limits<double>::infinity();
    const double hi = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - hi);
    return hi + std::log(s / static_cast<double>(xs.size()));
}

inline unsigned resolve_threads(unsigned requested)
{
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Averages log det(sqrt(t) I + Y_A(xi_i)) over samples i = 0..k-1 of the
/// stream family `seed`. Bitwise reproducible for any thread count: sample i
/// depends only on (seed, i) and the reduction runs in index order.
inline EstimateResult estimate_log_phi_tilde(const WeightedGraph& g, double t, std::size_t k, std::uint64_t seed,
                                             const EstimatorOptions& opts = {})
{
    if (k == 0) throw std::invalid_argument("estimate: sample count must be >= 1");
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("estimate: t must be finite and >= 0");
    const std::size_t n = g.n_vertices();
    if (t == 0.0 && n % 2 == 1) throw std::invalid_argument("estimate: t = 0 requires an even vertex count");

    const SkewAdjacency a = skew_adjacency(g);

    std::optional<Bipartition> bip;
    if (opts.fast_path != FastPath::off) {
        bip = bipartition(g);
        if (!bip && opts.fast_path == FastPath::on)
            throw std::invalid_argument("estimate: bipartite fast path requested but graph has an odd cycle");
    }

    double entry_bound = std::numeric_limits<double>::infinity();
    if (opts.entry_bound_delta) {
        const double d = *opts.entry_bound_delta;
        if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("estimate: entry-bound delta must lie in (0,1)");
        const double nk = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(k);
        entry_bound = a.amplitude * std::sqrt(2.0 * std::log(nk / d));
    }

    std::vector<double> values(k);
    std::vector<unsigned char> singular(k, 0);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(opts.threads), k));
    std::vector<std::size_t> exceed(workers, 0);
    std::vector<std::exception_ptr> errors(workers);

    auto work = [&](unsigned w) {
        try {
            const std::size_t begin = k * w / workers;
            const std::size_t end = k * (w + 1) / workers;
            Matrix y;
            Matrix u;
            std::vector<double> normals;
            LuWorkspace ws;
            if (bip) u.resize(bip->left.size(), bip->right.size());
            for (std::size_t i = begin; i < end; ++i) {
                RngStream stream(seed, i);
                sample_skew_into(a, stream, y, normals);
                if (opts.entry_bound_delta)
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = r + 1; c < n; ++c)
                            if (std::abs(y(r, c)) > entry_bound) ++exceed[w];
                try {
                    if (bip) {
                        for (std::size_t p = 0; p < bip->left.size(); ++p)
                            for (std::size_t q = 0; q < bip->right.size(); ++q)
                                u(p, q) = y(bip->left[p], bip->right[q]);
                        values[i] = log_det_bipartite(u, t);
                    } else {
                        values[i] = log_det_shifted(y, t, ws);
                    }
                } catch (const SingularAtZero&) {
                    singular[i] = 1;
                }
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    EstimateResult r;
    r.k = k;
    r.seed = seed;
    r.t = t;
    r.bipartite_path = bip.has_value();
    r.per_sample.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (singular[i]) ++r.failures;
        else r.per_sample.push_back(values[i]);
    }
    if (r.per_sample.empty()) throw NumericalError("estimate: every sample was singular at t = 0");

    const double m = static_cast<double>(r.per_sample.size());
    double sum = 0.0;
    for (double v : r.per_sample) sum += v;
    r.mean_log = sum / m;
    if (r.per_sample.size() > 1) {
        double ss = 0.0;
        for (double v : r.per_sample) ss += (v - r.mean_log) * (v - r.mean_log);
        r.std_err = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
    }
    if (opts.entry_bound_delta) {
        std::size_t total = 0;
        for (std::size_t c : exceed) total += c;
        r.entry_bound_exceedances = total;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Planning and tail bounds
// ---------------------------------------------------------------------------

struct FprasPlan {
    double epsilon = 0.0;
    double delta = 0.0;
    double r = 0.0; ///< deviation radius eps / (2N)
    std::size_t k = 0;
    double predicted_cost = 0.0; ///< k N^3
};

/// r = eps/(2N), k = ceil(8 a^2 N log(4/delta) / (t eps^2)). With these,
/// the geometric mean of k determinants is within a (1 +- eps) factor of
/// Phi~ with probability at least 1 - delta/2.
inline FprasPlan plan_samples(double epsilon, double delta, std::size_t n_vertices, double a, double t)
{
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("plan: epsilon must lie in (0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("plan: delta must lie in (0,1)");
    if (n_vertices == 0) throw std::invalid_argument("plan: N must be positive");
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("plan: amplitude must be positive");
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("plan: t must be positive");

    const double nd = static_cast<double>(n_vertices);
    const double x = 8.0 * a * a * nd * std::log(4.0 / delta) / (t * epsilon * epsilon);
    if (!(x < 1e18)) throw std::invalid_argument("plan: sample count overflows");
    // Integer-valued x can come out a few ulps high; do not round that up.
    const double k = std::max(1.0, std::ceil(x * (1.0 - 4.0 * std::numeric_limits<double>::epsilon())));

    FprasPlan p;
    p.epsilon = epsilon;
    p.delta = delta;
    p.r = epsilon / (2.0 * nd);
    p.k = static_cast<std::size_t>(k);
    p.predicted_cost = k * nd * nd * nd;
    return p;
}

/// Pr(|mean of k log-dets - log Phi~| >= N r) <= 2 exp(-t k N r^2 / (2 a^2)).
inline double tail_bound(double r, std::size_t n_vertices, std::size_t k, double a, double t)
{
    if (!(r >= 0.0)) throw std::invalid_argument("tail_bound: r must be >= 0");
    if (!(t > 0.0)) throw std::invalid_argument("tail_bound: t must be positive");
    if (a == 0.0) return r > 0.0 ? 0.0 : 2.0;
    const double e = t * static_cast<double>(k) * static_cast<double>(n_vertices) * r * r / (2.0 * a * a);
    return 2.0 * std::exp(-e);
}

// ---------------------------------------------------------------------------
// Certified bounds
// ---------------------------------------------------------------------------

struct BoundsReport {
    double lower_log = 0.0;
    double gap_asymptotic = 0.0;    ///< N min(a^2/(2t), C1)
    double gap_finite_sample = 0.0; ///< log(1 + sqrt(8kN) a e^{a^2 kN/(2t)} / sqrt(pi t)) / k
    bool finite_sample_saturated = false;
    double upper_log = 0.0;
    double per_vertex_gap = 0.0;
};

/// Exponent a^2 k N / (2t) above which the finite-sample gap is replaced by
/// the asymptotic one.
inline constexpr double kFiniteGapExponentCap = 700.0;

inline BoundsReport bounds_report(const EstimateResult& est, double a, std::size_t n_vertices, double t, double c1)
{
    const double nd = static_cast<double>(n_vertices);
    const double kd = static_cast<double>(est.k);

    BoundsReport b;
    b.lower_log = est.mean_log;
    const double per_vertex = t > 0.0 ? std::min(a * a / (2.0 * t), c1) : c1;
    b.gap_asymptotic = nd * per_vertex;

    const double exponent = t > 0.0 ? a * a * kd * nd / (2.0 * t) : std::numeric_limits<double>::infinity();
    if (a == 0.0) {
        b.gap_finite_sample = 0.0;
    } else if (!(exponent <= kFiniteGapExponentCap)) {
        b.gap_finite_sample = b.gap_asymptotic;
        b.finite_sample_saturated = true;
    } else {
        const double coeff = std::sqrt(8.0 * kd * nd) * a / std::sqrt(std::numbers::pi * t);
        b.gap_finite_sample = std::log1p(coeff * std::exp(exponent)) / kd;
    }

    const double gap = std::min(b.gap_asymptotic, b.gap_finite_sample);
    b.upper_log = b.lower_log + gap;
    b.per_vertex_gap = gap / nd;
    return b;
}

} // namespace matchpoly
