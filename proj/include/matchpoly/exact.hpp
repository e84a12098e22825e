#pragma once

// Exact weighted matching counts and matching-polynomial evaluation for
// small graphs, plus closed forms for K_N and K_{m,n}.

#include "matchpoly/graph.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace matchpoly {

inline constexpr std::size_t kExactVertexCap = 24;

class OracleTooLarge : public std::length_error {
public:
    using std::length_error::length_error;
};

/// phi(0), phi(1), ... up to the maximum matching size; trailing zeros are
/// trimmed so that phi.back() > 0. phi(0) = 1 always.
struct MatchingCounts {
    std::size_t n_vertices = 0;
    std::vector<double> phi{1.0};

    std::size_t half() const noexcept { return n_vertices / 2; }

    friend bool operator==(const MatchingCounts&, const MatchingCounts&) = default;
};

namespace detail {

class MatchingRecursion {
public:
    explicit MatchingRecursion(const WeightedGraph& g, std::size_t memo_budget)
        : n_(g.n_vertices()), w_(n_ * n_, 0.0), adj_(n_, 0), budget_(memo_budget)
    {
        for (const Edge& e : g.edges()) {
            w_[e.u * n_ + e.v] = e.weight;
            w_[e.v * n_ + e.u] = e.weight;
            adj_[e.u] |= std::uint32_t{1} << e.v;
            adj_[e.v] |= std::uint32_t{1} << e.u;
        }
    }

    std::vector<double> run(std::uint32_t mask) { return counts(mask); }

private:
    std::vector<double> counts(std::uint32_t mask)
    {
        // Drop vertices with no neighbours left; they never change the counts.
        int best = -1;
        int best_deg = 0;
        for (std::uint32_t m = mask; m != 0; m &= m - 1) {
            const int v = std::countr_zero(m);
            const int d = std::popcount(adj_[v] & mask);
            if (d == 0) mask &= ~(std::uint32_t{1} << v);
            else if (d > best_deg) best = v, best_deg = d;
        }
        if (best < 0) return {1.0};

        if (auto it = memo_.find(mask); it != memo_.end()) return it->second;

        const std::uint32_t without_v = mask & ~(std::uint32_t{1} << best);
        std::vector<double> result = counts(without_v);
        result.resize(std::popcount(mask) / 2 + 1, 0.0);
        for (std::uint32_t m = adj_[best] & mask; m != 0; m &= m - 1) {
            const int u = std::countr_zero(m);
            const double w = w_[static_cast<std::size_t>(best) * n_ + u];
            const std::vector<double> sub = counts(without_v & ~(std::uint32_t{1} << u));
            for (std::size_t k = 0; k < sub.size(); ++k) result[k + 1] += w * sub[k];
        }
        while (result.size() > 1 && result.back() == 0.0) result.pop_back();

        if (memo_.size() < budget_) memo_.emplace(mask, result);
        return result;
    }

    std::size_t n_;
    std::vector<double> w_;
    std::vector<std::uint32_t> adj_;
    std::size_t budget_;
    std::unordered_map<std::uint32_t, std::vector<double>> memo_;
};

inline double log_sum_exp(const std::vector<double>& terms)
{
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : terms) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : terms) s += std::exp(x - hi);
    return hi + std::log(s);
}

} // namespace detail

/// Exact phi(k, G) by vertex-removal recursion on the highest-degree vertex,
/// memoised on the bitmask of remaining vertices.
inline MatchingCounts matching_counts(const WeightedGraph& g, std::size_t memo_budget = std::size_t{1} << 22)
{
    if (g.n_vertices() > kExactVertexCap)
        throw OracleTooLarge("exact matching counts limited to " + std::to_string(kExactVertexCap) +
                             " vertices, graph has " + std::to_string(g.n_vertices()));
    detail::MatchingRecursion rec(g, memo_budget);
    const std::uint32_t all =
        g.n_vertices() == 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << g.n_vertices()) - 1;
    return MatchingCounts{g.n_vertices(), rec.run(all)};
}

/// log Phi(t) = log sum_k phi(k) t^(n-k), n = floor(N/2), by a max-shifted
/// log-sum-exp. Valid for t >= 0; returns -inf when Phi(0) = 0.
inline double log_matching_poly(const MatchingCounts& c, double t)
{
    if (t < 0.0) throw std::domain_error("t must be nonnegative");
    const std::size_t n = c.half();
    std::vector<double> terms;
    terms.reserve(c.phi.size());
    for (std::size_t k = 0; k < c.phi.size(); ++k) {
        if (c.phi[k] <= 0.0) continue;
        const double power = static_cast<double>(n - k);
        if (t == 0.0 && power > 0.0) continue;
        terms.push_back(std::log(c.phi[k]) + (power > 0.0 ? power * std::log(t) : 0.0));
    }
    if (terms.empty()) return -std::numeric_limits<double>::infinity();
    return detail::log_sum_exp(terms);
}

/// Phi(t) by Horner's rule. May overflow for large graphs; prefer
/// log_matching_poly there.
inline double matching_poly_eval(const MatchingCounts& c, double t)
{
    if (t < 0.0) throw std::domain_error("t must be nonnegative");
    double acc = 0.0;
    for (std::size_t k = 0; k <= c.half(); ++k) acc = acc * t + (k < c.phi.size() ? c.phi[k] : 0.0);
    return acc;
}

inline double matching_poly_eval(const WeightedGraph& g, double t) { return matching_poly_eval(matching_counts(g), t); }
inline double log_matching_poly(const WeightedGraph& g, double t) { return log_matching_poly(matching_counts(g), t); }

/// phi(k, K_{m,n}) = C(m,k) C(n,k) k! w^k for uniform weight w.
inline MatchingCounts complete_bipartite_counts(std::size_t m, std::size_t n, double w)
{
    if (m > n) throw std::invalid_argument("complete_bipartite_counts requires m <= n");
    if (!(w > 0.0)) throw std::invalid_argument("weight must be positive");
    MatchingCounts c{m + n, {1.0}};
    double unweighted = 1.0;
    for (std::size_t k = 1; k <= m; ++k) {
        unweighted = unweighted * static_cast<double>((m - k + 1) * (n - k + 1)) / static_cast<double>(k);
        c.phi.push_back(unweighted * std::pow(w, static_cast<double>(k)));
    }
    return c;
}

/// phi(k, K_N) = C(N, 2k) (2k-1)!! w^k for uniform weight w.
inline MatchingCounts complete_graph_counts(std::size_t n_vertices, double w)
{
    if (n_vertices == 0) throw std::invalid_argument("complete_graph_counts requires N >= 1");
    if (!(w > 0.0)) throw std::invalid_argument("weight must be positive");
    MatchingCounts c{n_vertices, {1.0}};
    double unweighted = 1.0;
    for (std::size_t k = 1; 2 * k <= n_vertices; ++k) {
        unweighted = unweighted * static_cast<double>((n_vertices - 2 * k + 2) * (n_vertices - 2 * k + 1)) /
                     static_cast<double>(2 * k);
        c.phi.push_back(unweighted * std::pow(w, static_cast<double>(k)));
    }
    return c;
}

} // namespace matchpoly
