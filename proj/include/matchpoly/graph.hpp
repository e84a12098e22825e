#pragma once

// Weighted simple graphs, their skew-adjacency template and bipartite
// structure.

#include "matchpoly/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace matchpoly {

using Vertex = std::uint32_t;

struct Edge {
    Vertex u = 0; ///< 0-based
    Vertex v = 0; ///< 0-based
    double weight = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Undirected simple graph with strictly positive edge weights.
/// Immutable once built; the constructor enforces every invariant.
class WeightedGraph {
public:
    WeightedGraph() = default;

    WeightedGraph(std::size_t n_vertices, std::vector<Edge> edges)
        : n_(n_vertices), edges_(std::move(edges))
    {
        if (n_ == 0) throw GraphError("graph must have at least one vertex");
        std::set<std::pair<Vertex, Vertex>> seen;
        for (const Edge& e : edges_) {
            if (e.u >= n_ || e.v >= n_) throw GraphError("edge endpoint out of range");
            if (e.u == e.v) throw GraphError("self-loop");
            if (!(e.weight > 0.0) || !std::isfinite(e.weight))
                throw GraphError("edge weight must be finite and positive");
            if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second)
                throw GraphError("duplicate edge");
        }
    }

    std::size_t n_vertices() const noexcept { return n_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    double max_weight() const noexcept
    {
        double w = 0.0;
        for (const Edge& e : edges_) w = std::max(w, e.weight);
        return w;
    }

    friend bool operator==(const WeightedGraph&, const WeightedGraph&) = default;

private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
};

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

enum class ParseErrorKind {
    malformed_header,
    malformed_edge,
    edge_count_mismatch,
    self_loop,
    duplicate_edge,
    nonpositive_weight,
    vertex_out_of_range,
};

inline const char* to_string(ParseErrorKind k)
{
    switch (k) {
    case ParseErrorKind::malformed_header: return "malformed header";
    case ParseErrorKind::malformed_edge: return "malformed edge line";
    case ParseErrorKind::edge_count_mismatch: return "edge count does not match header";
    case ParseErrorKind::self_loop: return "self-loop";
    case ParseErrorKind::duplicate_edge: return "duplicate edge";
    case ParseErrorKind::nonpositive_weight: return "non-positive weight";
    case ParseErrorKind::vertex_out_of_range: return "vertex id out of range";
    }
    return "parse error";
}

class ParseError : public GraphError {
public:
    ParseError(ParseErrorKind kind, std::size_t line, const std::string& detail)
        : GraphError("line " + std::to_string(line) + ": " + to_string(kind) +
                     (detail.empty() ? "" : " (" + detail + ")")),
          kind_(kind), line_(line)
    {
    }

    ParseErrorKind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view tok, T& out)
{
    const char* end = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc{} && p == end;
}

} // namespace detail

/// Parses "N M" followed by M lines "u v w" (1-based ids). Lines whose first
/// non-blank character is '#' and blank lines are skipped.
inline WeightedGraph parse_graph(std::string_view text)
{
    using detail::parse_number;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> header;
    std::vector<Edge> edges;
    std::set<std::pair<Vertex, Vertex>> seen;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;

        auto toks = detail::split_ws(line);
        if (toks.empty() || toks.front().front() == '#') {
            if (nl == text.size()) break;
            continue;
        }

        if (!header) {
            std::uint64_t n = 0, m = 0;
            if (toks.size() != 2 || !parse_number(toks[0], n) || !parse_number(toks[1], m) || n == 0)
                throw ParseError(ParseErrorKind::malformed_header, line_no, std::string(line));
            if (n > std::uint64_t{1} << 31)
                throw ParseError(ParseErrorKind::malformed_header, line_no, "vertex count too large");
            header.emplace(n, m);
        } else {
            if (edges.size() == header->second)
                throw ParseError(ParseErrorKind::edge_count_mismatch, line_no, "more edge lines than declared");
            std::int64_t u = 0, v = 0;
            double w = 0.0;
            if (toks.size() != 3 || !parse_number(toks[0], u) || !parse_number(toks[1], v) ||
                !parse_number(toks[2], w))
                throw ParseError(ParseErrorKind::malformed_edge, line_no, std::string(line));
            const auto n = static_cast<std::int64_t>(header->first);
            if (u < 1 || v < 1 || u > n || v > n)
                throw ParseError(ParseErrorKind::vertex_out_of_range, line_no, std::string(line));
            if (u == v) throw ParseError(ParseErrorKind::self_loop, line_no, std::string(line));
            if (!(w > 0.0) || !std::isfinite(w))
                throw ParseError(ParseErrorKind::nonpositive_weight, line_no, std::string(line));
            Edge e{static_cast<Vertex>(u - 1), static_cast<Vertex>(v - 1), w};
            if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second)
                throw ParseError(ParseErrorKind::duplicate_edge, line_no, std::string(line));
            edges.push_back(e);
        }
        if (nl == text.size()) break;
    }

    if (!header) throw ParseError(ParseErrorKind::malformed_header, line_no, "missing header");
    if (edges.size() != header->second)
        throw ParseError(ParseErrorKind::edge_count_mismatch, line_no,
                         "expected " + std::to_string(header->second) + " edges, got " +
                             std::to_string(edges.size()));
    return WeightedGraph(header->first, std::move(edges));
}

/// Canonical text form; weights printed with 17 significant digits so that
/// parse(serialize(g)) == g.
inline std::string serialize_graph(const WeightedGraph& g)
{
    std::ostringstream os;
    os << g.n_vertices() << ' ' << g.edges().size() << '\n';
    char buf[64];
    for (const Edge& e : g.edges()) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        os << (e.u + 1) << ' ' << (e.v + 1) << ' ' << buf << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Skew-adjacency template
// ---------------------------------------------------------------------------

/// Real antisymmetric N x N matrix with sqrt(w) above the diagonal on edges.
struct SkewAdjacency {
    Matrix entries;
    double amplitude = 0.0; ///< max |a_ij|; zero for an edgeless graph

    std::size_t dimension() const noexcept { return entries.rows(); }
};

inline SkewAdjacency skew_adjacency(const WeightedGraph& g)
{
    SkewAdjacency a{Matrix(g.n_vertices(), g.n_vertices()), 0.0};
    for (const Edge& e : g.edges()) {
        const Vertex i = std::min(e.u, e.v);
        const Vertex j = std::max(e.u, e.v);
        const double s = std::sqrt(e.weight);
        a.entries(i, j) = s;
        a.entries(j, i) = -s;
        a.amplitude = std::max(a.amplitude, s);
    }
    return a;
}

// ---------------------------------------------------------------------------
// Bipartite structure
// ---------------------------------------------------------------------------

struct Bipartition {
    std::vector<Vertex> left;  ///< size m, ascending
    std::vector<Vertex> right; ///< size n >= m, ascending
    Matrix weights;            ///< m x n, sqrt(w) on edges, 0 elsewhere
};

/// Breadth-first 2-coloring. Returns nullopt when an odd cycle exists.
/// Isolated vertices go to the larger side.
inline std::optional<Bipartition> bipartition(const WeightedGraph& g)
{
    const std::size_t n = g.n_vertices();
    std::vector<std::vector<Vertex>> adj(n);
    for (const Edge& e : g.edges()) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }

    std::vector<int> color(n, -1);
    std::vector<Vertex> isolated;
    for (Vertex s = 0; s < n; ++s) {
        if (color[s] != -1) continue;
        if (adj[s].empty()) {
            isolated.push_back(s);
            continue;
        }
        color[s] = 0;
        std::queue<Vertex> q;
        q.push(s);
        while (!q.empty()) {
            const Vertex x = q.front();
            q.pop();
            for (Vertex y : adj[x]) {
                if (color[y] == -1) {
                    color[y] = 1 - color[x];
                    q.push(y);
                } else if (color[y] == color[x]) {
                    return std::nullopt;
                }
            }
        }
    }

    std::vector<Vertex> side[2];
    for (Vertex v = 0; v < n; ++v)
        if (color[v] >= 0) side[color[v]].push_back(v);
    const int big = side[0].size() >= side[1].size() ? 0 : 1;
    side[big].insert(side[big].end(), isolated.begin(), isolated.end());
    std::sort(side[big].begin(), side[big].end());

    Bipartition b;
    b.left = std::move(side[1 - big]);
    b.right = std::move(side[big]);

    std::vector<std::size_t> index(n);
    for (std::size_t i = 0; i < b.left.size(); ++i) index[b.left[i]] = i;
    for (std::size_t j = 0; j < b.right.size(); ++j) index[b.right[j]] = j;

    b.weights = Matrix(b.left.size(), b.right.size());
    for (const Edge& e : g.edges()) {
        const bool u_left = std::binary_search(b.left.begin(), b.left.end(), e.u);
        const Vertex l = u_left ? e.u : e.v;
        const Vertex r = u_left ? e.v : e.u;
        b.weights(index[l], index[r]) = std::sqrt(e.weight);
    }
    return b;
}

} // namespace matchpoly
