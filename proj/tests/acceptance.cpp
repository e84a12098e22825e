// Acceptance suite. `acceptance --criterion N` runs one check, no flag runs
// all of them. Prints one PASS/FAIL line per criterion; exit 1 on any FAIL.

#include "matchpoly/analysis.hpp"
#include "matchpoly/cli.hpp"
#include "matchpoly/estimator.hpp"
#include "matchpoly/exact.hpp"
#include "matchpoly/linalg.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace matchpoly;

namespace {

struct Verdict {
    bool pass = true;
};

void note(const char* fmt, auto... args)
{
    std::printf("    ");
    std::printf(fmt, args...);
    std::printf("\n");
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

WeightedGraph make_graph(std::size_t n, std::vector<Edge> edges) { return WeightedGraph(n, std::move(edges)); }

WeightedGraph complete_graph(std::size_t n, double w)
{
    std::vector<Edge> edges;
    for (Vertex i = 0; i < n; ++i)
        for (Vertex j = i + 1; j < n; ++j) edges.push_back({i, j, w});
    return make_graph(n, std::move(edges));
}

WeightedGraph random_graph(RngStream& rng, std::size_t n, double p, double wlo, double whi)
{
    std::vector<Edge> edges;
    for (Vertex i = 0; i < n; ++i)
        for (Vertex j = i + 1; j < n; ++j)
            if (rng.next_uniform() < p) edges.push_back({i, j, wlo + (whi - wlo) * rng.next_uniform()});
    return make_graph(n, std::move(edges));
}

struct NamedGraph {
    std::string name;
    WeightedGraph g;
};

std::vector<NamedGraph> unbiasedness_set()
{
    std::vector<NamedGraph> set;
    set.push_back({"K2(w=4)", make_graph(2, {{0, 1, 4.0}})});
    set.push_back({"P3", make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}})});
    set.push_back({"triangle", complete_graph(3, 1.0)});
    set.push_back({"K4", complete_graph(4, 1.0)});
    set.push_back({"K2,2", complete_bipartite_graph(2, 2, [] { return 1.0; })});
    set.push_back({"K2,3", complete_bipartite_graph(2, 3, [] { return 1.0; })});
    RngStream rng(20240601, 0);
    set.push_back({"random6", random_graph(rng, 6, 0.6, 0.5, 2.0)});
    return set;
}

constexpr double kTs[] = {0.5, 1.0, 2.0};
constexpr std::size_t kUnbiasedSamples = 1000000;

/// Mean and standard error of exp(x) over the per-sample log-determinants.
std::pair<double, double> det_mean_se(const std::vector<double>& logs)
{
    double s = 0.0, s2 = 0.0;
    for (double x : logs) {
        const double d = std::exp(x);
        s += d;
        s2 += d * d;
    }
    const double m = static_cast<double>(logs.size());
    const double mean = s / m;
    const double var = std::max(0.0, (s2 - m * mean * mean) / (m - 1.0));
    return {mean, std::sqrt(var / m)};
}

// ---------------------------------------------------------------------------

Verdict c1()
{
    const auto start = std::chrono::steady_clock::now();
    const double c = c1_constant();
    const double elapsed = seconds_since(start);
    const double g0 = gaussian_log_gap(0.0);
    note("C1 = %.12f, g(0) = %.12f, %.3f s", c, g0, elapsed);
    Verdict v;
    v.pass = std::abs(c - 1.270362845) <= 1e-7 && std::abs(c - g0) <= 1e-7 && elapsed < 1.0;
    return v;
}

Verdict unbiasedness()
{
    Verdict v;
    for (const auto& [name, g] : unbiasedness_set()) {
        const MatchingCounts counts = matching_counts(g);
        for (double t : kTs) {
            const EstimateResult est = estimate_log_phi_tilde(g, t, kUnbiasedSamples, 1000 + std::lround(10 * t));
            const auto [mean, se] = det_mean_se(est.per_sample);
            double target = matching_poly_eval(counts, t);
            if (g.n_vertices() % 2 == 1) target *= std::sqrt(t);
            const double z = (mean - target) / se;
            const bool ok = std::abs(z) <= 4.0 && est.failures == 0;
            note("%-9s t=%-3g mean det %.6f target %.6f z %+.2f%s", name.c_str(), t, mean, target, z,
                 ok ? "" : "  <--");
            v.pass = v.pass && ok;
        }
    }
    return v;
}

Verdict eigen_form()
{
    Verdict v;
    RngStream rng(31337, 0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 1 + rng.next_u64() % 12;
        const WeightedGraph g = random_graph(rng, n, 0.2 + 0.8 * rng.next_uniform(), 0.1, 3.0);
        const Matrix y = sample_skew(skew_adjacency(g), 555, static_cast<std::uint64_t>(i));
        const double t = 0.05 + 3.0 * rng.next_uniform();
        const double lu = log_det_shifted(y, t);
        double eig = 0.0;
        for (double mu : symmetric_eigenvalues(multiply(y.transposed(), y))) eig += 0.5 * std::log(t + std::max(mu, 0.0));
        const double rel = std::abs(lu - eig) / std::max(1.0, std::abs(eig));
        worst = std::max(worst, rel);
    }
    note("200 instances, worst relative difference %.3e", worst);
    v.pass = worst <= 1e-9;
    return v;
}

Verdict bipartite_fast_path()
{
    Verdict v;
    RngStream rng(4242, 0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        std::size_t m = 1 + rng.next_u64() % 12, n = 1 + rng.next_u64() % 12;
        if (m > n) std::swap(m, n);
        const double t = std::array{0.3, 1.0, 3.0}[i % 3];
        Matrix u(m, n);
        for (double& x : u.data())
            x = rng.next_uniform() < 0.7 ? std::sqrt(0.1 + 3.0 * rng.next_uniform()) * rng.next_normal() : 0.0;
        Matrix y(m + n, m + n);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                y(r, m + c) = u(r, c);
                y(m + c, r) = -u(r, c);
            }
        const double fast = log_det_bipartite(u, t);
        const double dense = log_det_shifted(y, t);
        worst = std::max(worst, std::abs(fast - dense) / std::max(1.0, std::abs(dense)));
    }
    note("200 instances, worst relative difference %.3e", worst);
    v.pass = worst <= 1e-9;
    return v;
}

Verdict sandwich()
{
    Verdict v;
    const double c = c1_constant();
    bool parity_ok = true;
    for (const auto& [name, g] : unbiasedness_set()) {
        const double a = skew_adjacency(g).amplitude;
        const std::size_t n = g.n_vertices();
        for (double t : kTs) {
            const EstimateResult est = estimate_log_phi_tilde(g, t, kUnbiasedSamples, 2000 + std::lround(10 * t));
            const double log_phi = log_matching_poly(g, t);
            const double slack = 4.0 * est.std_err;
            const double gap = static_cast<double>(n) * std::min(a * a / (2.0 * t), c);
            const bool ok = est.mean_log - slack <= log_phi && log_phi <= est.mean_log + gap + slack;
            const double log_target = log_phi + (n % 2 == 1 ? 0.5 * std::log(t) : 0.0);
            const bool pok = est.mean_log - slack <= log_target && log_target <= est.mean_log + gap + slack;
            parity_ok = parity_ok && pok;
            note("%-9s t=%-3g mean_log %.6f log Phi %.6f upper %.6f%s", name.c_str(), t, est.mean_log, log_phi,
                 est.mean_log + gap, ok ? "" : "  <--");
            v.pass = v.pass && ok;
        }
    }
    note("with log(sqrt(t) Phi) in place of log Phi for odd N: %s", parity_ok ? "all hold" : "violated");
    return v;
}

Verdict concentration()
{
    Verdict v;
    const WeightedGraph g = complete_graph(4, 1.0);
    const double ref = estimate_log_phi_tilde(g, 1.0, 1000000, 6000).mean_log;
    const int runs = 2000;
    std::vector<double> means(runs);
    for (int i = 0; i < runs; ++i) means[i] = estimate_log_phi_tilde(g, 1.0, 4, mix_seed(6001, i)).mean_log;
    for (double r : {0.05, 0.1, 0.2, 0.4}) {
        int hits = 0;
        for (double m : means) hits += std::abs(m - ref) >= 4.0 * r;
        const double freq = static_cast<double>(hits) / runs;
        const double bound = tail_bound(r, 4, 4, 1.0, 1.0);
        const bool ok = freq <= bound + 0.02;
        note("r=%-4g frequency %.4f bound %.4f%s", r, freq, bound, ok ? "" : "  <--");
        v.pass = v.pass && ok;
    }
    return v;
}

Verdict planner()
{
    Verdict v;
    const WeightedGraph g = complete_graph(4, 1.0);
    const FprasPlan plan = plan_samples(0.5, 0.25, 4, 1.0, 1.0);
    const double ref = estimate_log_phi_tilde(g, 1.0, 1000000, 7000).mean_log;
    int inside = 0;
    const int runs = 400;
    for (int i = 0; i < runs; ++i) {
        const double ratio = std::exp(estimate_log_phi_tilde(g, 1.0, plan.k, mix_seed(7001, i)).mean_log - ref);
        inside += ratio >= 0.5 && ratio <= 1.5;
    }
    const FprasPlan worked = plan_samples(1.0, 4.0 / std::exp(2.0), 10, 1.0, 1.0);
    note("k = %zu, %d/%d runs within (1 +- 0.5) of the reference; worked example k = %zu", plan.k, inside, runs,
         worked.k);
    v.pass = inside >= 300 && worked.k == 160;
    return v;
}

Verdict optimality_trend()
{
    Verdict v;
    const auto rows = optimality_sweep({{2, 2}, {4, 4}, {8, 8}, {16, 16}, {32, 32}}, 1.0, 1.0, 1.0, 8000, 20000);
    for (const auto& r : rows) {
        const double slack = 4.0 * r.std_err_per_vertex;
        const bool ok = r.gap_per_vertex >= -slack && r.gap_per_vertex <= r.bound_per_vertex + slack;
        note("n=%-3zu gap/vertex %.6f +- %.6f (bound %.4f)%s", r.n, r.gap_per_vertex, r.std_err_per_vertex,
             r.bound_per_vertex, ok ? "" : "  <--");
        v.pass = v.pass && ok;
    }
    const auto& first = rows.front();
    const auto& last = rows.back();
    const double hi = last.gap_per_vertex + 4.0 * last.std_err_per_vertex;
    const double lo = first.gap_per_vertex - 4.0 * first.std_err_per_vertex;
    note("n=32 upper %.6f vs 0.7 x n=2 lower %.6f", hi, 0.7 * lo);
    v.pass = v.pass && hi <= 0.7 * lo;
    return v;
}

Verdict gap_function()
{
    Verdict v;
    double prev = INFINITY;
    bool decreasing = true;
    for (int i = 0; i <= 32; ++i) {
        const double g = gaussian_log_gap(0.25 * i);
        decreasing = decreasing && g < prev;
        prev = g;
    }
    const double g10 = gaussian_log_gap(10.0);
    note("strictly decreasing on 0..8: %s; g(10) = %.10f (required < 0.01)", decreasing ? "yes" : "no", g10);
    v.pass = decreasing && g10 < 0.01;
    return v;
}

Verdict determinism()
{
    const auto path = std::filesystem::temp_directory_path() / "matchpoly_acceptance_k4.txt";
    std::ofstream(path) << serialize_graph(complete_graph(4, 1.0));
    auto run = [&](const char* threads) {
        const std::string p = path.string();
        const char* argv[] = {"matchpoly", "estimate", "--graph", p.c_str(), "--t",     "1",    "--samples", "5000",
                              "--seed",    "42",       "--format", "json",  "--threads", threads};
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(std::size(argv)), argv, out, err);
        return std::pair{code, out.str()};
    };
    const auto one = run("1");
    const auto eight = run("8");
    note("exit codes %d/%d, %zu bytes, identical: %s", one.first, eight.first, one.second.size(),
         one.second == eight.second ? "yes" : "no");
    Verdict v;
    v.pass = one.first == 0 && eight.first == 0 && one.second == eight.second;
    return v;
}

/// Matching enumeration by the lowest free vertex: left unmatched or paired
/// with a free neighbour.
void enumerate_matchings(const std::vector<std::vector<std::pair<Vertex, double>>>& adj, std::vector<bool>& used,
                         Vertex from, std::size_t k, double w, std::vector<double>& phi)
{
    Vertex v = from;
    while (v < adj.size() && used[v]) ++v;
    if (v == adj.size()) {
        if (phi.size() <= k) phi.resize(k + 1, 0.0);
        phi[k] += w;
        return;
    }
    used[v] = true;
    enumerate_matchings(adj, used, v + 1, k, w, phi);
    for (auto [u, wu] : adj[v])
        if (!used[u]) {
            used[u] = true;
            enumerate_matchings(adj, used, v + 1, k + 1, w * wu, phi);
            used[u] = false;
        }
    used[v] = false;
}

std::vector<double> brute_counts(const WeightedGraph& g)
{
    std::vector<std::vector<std::pair<Vertex, double>>> adj(g.n_vertices());
    for (const Edge& e : g.edges()) {
        adj[e.u].push_back({e.v, e.weight});
        adj[e.v].push_back({e.u, e.weight});
    }
    std::vector<bool> used(g.n_vertices(), false);
    std::vector<double> phi{0.0};
    enumerate_matchings(adj, used, 0, 0, 1.0, phi);
    return phi;
}

double phi_at(const std::vector<double>& phi, std::size_t k) { return k < phi.size() ? phi[k] : 0.0; }

Verdict oracle_consistency()
{
    Verdict v;
    RngStream rng(1111, 0);
    std::size_t checked = 0;
    bool dc = true;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Edge> edges;
        const std::size_t n = 2 + trial % 6;
        for (Vertex i = 0; i < n; ++i)
            for (Vertex j = i + 1; j < n; ++j)
                if (rng.next_uniform() < 0.55) edges.push_back({i, j, static_cast<double>(1 + rng.next_u64() % 5)});
        const WeightedGraph g(n, edges);
        const auto full = matching_counts(g).phi;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            std::vector<Edge> del = edges, con;
            del.erase(del.begin() + static_cast<std::ptrdiff_t>(e));
            for (const Edge& f : edges)
                if (f.u != edges[e].u && f.v != edges[e].u && f.u != edges[e].v && f.v != edges[e].v) con.push_back(f);
            const auto pd = matching_counts(WeightedGraph(n, del)).phi;
            const auto pc = matching_counts(WeightedGraph(n, con)).phi;
            for (std::size_t k = 0; k <= n / 2; ++k) {
                const double rhs = phi_at(pd, k) + (k ? edges[e].weight * phi_at(pc, k - 1) : 0.0);
                dc = dc && phi_at(full, k) == rhs;
            }
            ++checked;
        }
    }
    note("deletion-contraction over %zu (graph, edge) pairs: %s", checked, dc ? "exact" : "MISMATCH");

    bool closed = true;
    for (double w : {1.0, 2.0, 0.5}) {
        for (std::size_t n = 1; n <= 8; ++n) closed = closed && complete_graph_counts(n, w).phi == brute_counts(complete_graph(n, w));
        for (std::size_t m = 1; m <= 4; ++m)
            for (std::size_t n = m; n <= 4; ++n)
                closed = closed && complete_bipartite_counts(m, n, w).phi ==
                                       brute_counts(complete_bipartite_graph(m, n, [w] { return w; }));
    }
    note("closed forms vs enumeration for K_N (N <= 8), K_m,n (m, n <= 4): %s", closed ? "equal" : "MISMATCH");

    bool roots_ok = true;
    double worst_imag = 0.0, max_real = -INFINITY;
    RngStream rr(2222, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const WeightedGraph g = random_graph(rr, 2 + trial % 9, 0.5, 0.2, 3.0);
        const auto phi = matching_counts(g).phi;
        const std::size_t deg = phi.size() - 1;
        if (deg == 0) continue;
        Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
        for (std::size_t i = 0; i < deg; ++i) companion(0, static_cast<Eigen::Index>(i)) = -phi[i + 1];
        for (std::size_t i = 1; i < deg; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
        const Eigen::VectorXcd roots = companion.eigenvalues();
        for (Eigen::Index i = 0; i < roots.size(); ++i) {
            worst_imag = std::max(worst_imag, std::abs(roots[i].imag()));
            max_real = std::max(max_real, roots[i].real());
            roots_ok = roots_ok && std::abs(roots[i].imag()) <= 1e-8 && roots[i].real() < 0.0;
        }
    }
    note("nonzero roots: max |imag| %.2e, max real part %.4f", worst_imag, max_real);
    v.pass = dc && closed && roots_ok;
    return v;
}

struct Criterion {
    const char* title;
    std::function<Verdict()> check;
};

const std::vector<Criterion>& criteria()
{
    static const std::vector<Criterion> list = {
        {"C1 constant", c1},
        {"unbiasedness of det samples", unbiasedness},
        {"LU log-det vs eigenvalue form", eigen_form},
        {"bipartite fast path vs dense", bipartite_fast_path},
        {"sandwich on log Phi", sandwich},
        {"concentration vs tail bound", concentration},
        {"sample planner", planner},
        {"per-vertex gap trend on K_n,n", optimality_trend},
        {"gap function g(a)", gap_function},
        {"thread-count determinism", determinism},
        {"exact oracle self-consistency", oracle_consistency},
    };
    return list;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const auto& list = criteria();
    int failures = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (only && static_cast<std::size_t>(only) != i + 1) continue;
        std::printf("[%zu] %s\n", i + 1, list[i].title);
        std::fflush(stdout);
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = list[i].check();
        } catch (const std::exception& e) {
            v.pass = false;
            note("exception: %s", e.what());
        }
        std::printf("criterion %2zu: %s  (%.1f s)\n", i + 1, v.pass ? "PASS" : "FAIL", seconds_since(start));
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures ? 1 : 0;
}
