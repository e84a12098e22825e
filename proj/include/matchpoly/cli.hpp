#pragma once

// Command-line driver: estimate, verify, bench, constants.
//
// Exit codes: 0 success, 2 usage or parse error, 3 numerical failure,
// 4 verification failure.

#include "matchpoly/analysis.hpp"
#include "matchpoly/estimator.hpp"
#include "matchpoly/exact.hpp"
#include "matchpoly/graph.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace matchpoly::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { ok = 0, usage = 2, numerical = 3, verification = 4 };

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Doubles as %.17g (always carrying a '.' or exponent so they parse back as
/// floats); non-finite values become null.
inline std::string format_double(double x)
{
    if (!std::isfinite(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

namespace detail {

inline void write_json(const Json& j, std::string& out, int level)
{
    const std::string pad(2 * (level + 1), ' ');
    const std::string close_pad(2 * level, ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad + Json(it.key()).dump() + ": ";
            write_json(it.value(), out, level + 1);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += ",\n";
            first = false;
            out += pad;
            write_json(v, out, level + 1);
        }
        out += "\n" + close_pad + "]";
        return;
    }
    case Json::value_t::number_float:
        out += format_double(j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

} // namespace detail

inline std::string to_json_text(const Json& j)
{
    std::string out;
    detail::write_json(j, out, 0);
    out += '\n';
    return out;
}

inline Json json_number(double x)
{
    if (!std::isfinite(x)) return nullptr;
    return x;
}

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string graph_path;
    double t = 0.0;
    std::optional<double> eps;
    std::optional<double> delta;
    std::optional<std::size_t> samples;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string fast_bipartite = "auto";
    std::string format = "text";
    std::string out_path;
    bool timing = false;
};

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline WeightedGraph load_graph(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open graph file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_graph(ss.str());
}

inline FastPath parse_fast_path(const std::string& s)
{
    if (s == "auto") return FastPath::automatic;
    if (s == "on") return FastPath::on;
    if (s == "off") return FastPath::off;
    throw UsageError("--fast-bipartite must be auto, on or off");
}

inline Json plan_json(const FprasPlan& p)
{
    return Json{{"epsilon", p.epsilon},
                {"delta", p.delta},
                {"r", p.r},
                {"k", p.k},
                {"predicted_cost", json_number(p.predicted_cost)}};
}

inline Json estimate_json(const EstimateResult& e)
{
    const double log_mean_det = log_mean_exp(e.per_sample);
    Json j{{"k", e.k},
           {"seed", e.seed},
           {"t", e.t},
           {"mean_log", json_number(e.mean_log)},
           {"std_err", json_number(e.std_err)},
           {"phi_tilde", json_number(std::exp(e.mean_log))},
           {"log_mean_det", json_number(log_mean_det)},
           {"mean_det", json_number(std::exp(log_mean_det))},
           {"failures", e.failures},
           {"bipartite_path", e.bipartite_path}};
    j["entry_bound_exceedances"] =
        e.entry_bound_exceedances ? Json(*e.entry_bound_exceedances) : Json(nullptr);
    return j;
}

inline Json bounds_json(const BoundsReport& b, double c1)
{
    return Json{{"lower_log", json_number(b.lower_log)},
                {"upper_log", json_number(b.upper_log)},
                {"gap_asymptotic", json_number(b.gap_asymptotic)},
                {"gap_finite_sample", json_number(b.gap_finite_sample)},
                {"finite_sample_saturated", b.finite_sample_saturated},
                {"per_vertex_gap", json_number(b.per_vertex_gap)},
                {"c1", c1}};
}

struct EstimateRun {
    WeightedGraph graph;
    double amplitude = 0.0;
    std::optional<FprasPlan> plan;
    EstimateResult estimate;
    BoundsReport bounds;
    double c1 = 0.0;
    double seconds = 0.0;
};

inline EstimateRun run_estimate_core(const CommonArgs& args)
{
    if (!(args.t >= 0.0) || !std::isfinite(args.t)) throw UsageError("--t must be a finite nonnegative number");
    if (args.eps.has_value() != args.delta.has_value()) throw UsageError("--eps and --delta must be given together");
    if (!args.samples && !args.eps) throw UsageError("give --samples or both --eps and --delta");
    if (args.samples && *args.samples == 0) throw UsageError("--samples must be >= 1");

    const auto start = std::chrono::steady_clock::now();
    EstimateRun run;
    run.graph = load_graph(args.graph_path);
    run.amplitude = std::sqrt(run.graph.max_weight());
    const std::size_t n = run.graph.n_vertices();

    std::size_t k = args.samples.value_or(1);
    if (args.eps) {
        if (args.t == 0.0) throw UsageError("--eps/--delta planning needs t > 0");
        if (run.amplitude > 0.0) {
            run.plan = plan_samples(*args.eps, *args.delta, n, run.amplitude, args.t);
            if (!args.samples) k = run.plan->k;
        } else if (!(*args.eps > 0.0 && *args.eps <= 1.0 && *args.delta > 0.0 && *args.delta < 1.0)) {
            throw UsageError("--eps must lie in (0,1] and --delta in (0,1)");
        }
    }

    EstimatorOptions opts;
    opts.threads = args.threads;
    opts.fast_path = parse_fast_path(args.fast_bipartite);
    opts.entry_bound_delta = args.delta;
    run.estimate = estimate_log_phi_tilde(run.graph, args.t, k, args.seed, opts);
    run.c1 = c1_constant();
    run.bounds = bounds_report(run.estimate, run.amplitude, n, args.t, run.c1);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

inline Json run_json(const std::string& name, const CommonArgs& args, const EstimateRun& run)
{
    Json command{{"name", name},
                 {"graph", args.graph_path},
                 {"t", args.t},
                 {"epsilon", args.eps ? Json(*args.eps) : Json(nullptr)},
                 {"delta", args.delta ? Json(*args.delta) : Json(nullptr)},
                 {"samples", run.estimate.k},
                 {"seed", args.seed},
                 {"fast_bipartite", args.fast_bipartite}};
    Json j{{"command", command},
           {"graph", Json{{"n_vertices", run.graph.n_vertices()},
                          {"n_edges", run.graph.edges().size()},
                          {"amplitude", run.amplitude}}},
           {"plan", run.plan ? plan_json(*run.plan) : Json(nullptr)},
           {"estimate", estimate_json(run.estimate)},
           {"bounds", bounds_json(run.bounds, run.c1)},
           {"oracle", nullptr}};
    if (args.timing) j["wall_time_seconds"] = run.seconds;
    return j;
}

inline std::string text_number(double x)
{
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline std::string run_text(const std::string& name, const CommonArgs& args, const EstimateRun& run,
                            const Json& oracle)
{
    std::ostringstream os;
    const auto& e = run.estimate;
    const auto& b = run.bounds;
    os << name << ": " << args.graph_path << " (N = " << run.graph.n_vertices()
       << ", edges = " << run.graph.edges().size() << ", a = " << text_number(run.amplitude) << ")\n";
    os << "  t = " << text_number(args.t) << ", samples = " << e.k << ", seed = " << args.seed
       << (e.bipartite_path ? ", bipartite path" : "") << '\n';
    if (run.plan)
        os << "  plan: eps = " << text_number(run.plan->epsilon) << ", delta = " << text_number(run.plan->delta)
           << ", r = " << text_number(run.plan->r) << ", k = " << run.plan->k << '\n';
    os << "  log Phi~ estimate  = " << text_number(e.mean_log) << " +- " << text_number(e.std_err) << " (1 SE)\n";
    os << "  mean det           = " << text_number(std::exp(log_mean_exp(e.per_sample))) << '\n';
    if (e.failures) os << "  singular samples   = " << e.failures << '\n';
    os << "  log Phi lower      = " << text_number(b.lower_log) << '\n';
    os << "  log Phi upper      = " << text_number(b.upper_log) << '\n';
    os << "  gap (asymptotic)   = " << text_number(b.gap_asymptotic) << '\n';
    os << "  gap (finite k)     = " << text_number(b.gap_finite_sample)
       << (b.finite_sample_saturated ? " (saturated)" : "") << '\n';
    os << "  gap per vertex     = " << text_number(b.per_vertex_gap) << '\n';
    if (!oracle.is_null()) {
        os << "  oracle log Phi     = " << text_number(oracle.value("log_phi", NAN)) << '\n';
        const auto& res = oracle["residual_se"];
        os << "  unbiasedness resid = " << (res.is_null() ? std::string("inf") : text_number(res.get<double>()))
           << " SE\n";
        os << "  sandwich           = " << (oracle["sandwich_ok"].get<bool>() ? "ok" : "VIOLATED") << '\n';
    }
    if (args.timing) os << "  wall time          = " << text_number(run.seconds) << " s\n";
    return os.str();
}

/// Compares the sample mean of det against the exact E det (Phi for even N,
/// sqrt(t) Phi for odd N) in standard-error units, and checks the sandwich.
inline Json oracle_json(const EstimateRun& run, double t, bool& sandwich_ok)
{
    const MatchingCounts counts = matching_counts(run.graph);
    const double log_phi = log_matching_poly(counts, t);
    const bool odd = run.graph.n_vertices() % 2 == 1;
    const double log_target = log_phi + (odd ? 0.5 * std::log(t) : 0.0);

    const auto& xs = run.estimate.per_sample;
    const double hi = *std::max_element(xs.begin(), xs.end());
    double mean = 0.0;
    for (double x : xs) mean += std::exp(x - hi);
    const double m = static_cast<double>(xs.size());
    mean /= m;
    double ss = 0.0;
    for (double x : xs) ss += (std::exp(x - hi) - mean) * (std::exp(x - hi) - mean);
    const double se = xs.size() > 1 ? std::sqrt(ss / (m - 1.0)) / std::sqrt(m) : 0.0;
    const double target = std::exp(log_target - hi);
    double residual = 0.0;
    if (se > 0.0) residual = (mean - target) / se;
    else if (std::abs(mean - target) > 1e-12 * std::abs(target)) residual = mean > target ? INFINITY : -INFINITY;

    const double slack = 4.0 * run.estimate.std_err + 1e-12 * (1.0 + std::abs(log_phi));
    const double gap = run.bounds.upper_log - run.bounds.lower_log;
    const double mean_log = run.estimate.mean_log;
    // The determinant is unbiased for log_target, so that is what log Phi~
    // sits below; for odd N it differs from log Phi by log(t)/2.
    const bool lower_ok = mean_log - slack <= log_target;
    const bool upper_ok = log_target <= mean_log + gap + slack;
    const bool literal_ok = mean_log - slack <= log_phi && log_phi <= mean_log + gap + slack;
    sandwich_ok = lower_ok && upper_ok;

    return Json{{"log_phi", json_number(log_phi)},
                {"phi", json_number(std::exp(log_phi))},
                {"log_expected_det", json_number(log_target)},
                {"log_mean_det", json_number(hi + std::log(mean))},
                {"residual_se", json_number(residual)},
                {"lower_gap", json_number(log_phi - mean_log)},
                {"slack", slack},
                {"sandwich_ok", sandwich_ok},
                {"sandwich_log_phi_ok", literal_ok}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void emit(const std::string& text, const std::string& out_path, std::ostream& out)
{
    if (out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + out_path + "'");
    f << text;
}

inline int cmd_estimate(const CommonArgs& args, std::ostream& out)
{
    const EstimateRun run = run_estimate_core(args);
    const std::string text = args.format == "json" ? to_json_text(run_json("estimate", args, run))
                                                   : run_text("estimate", args, run, Json(nullptr));
    emit(text, args.out_path, out);
    return ExitCode::ok;
}

inline int cmd_verify(const CommonArgs& args, std::ostream& out, std::ostream& err)
{
    const EstimateRun run = run_estimate_core(args);
    bool sandwich_ok = false;
    Json oracle = oracle_json(run, args.t, sandwich_ok);
    Json report = run_json("verify", args, run);
    report["oracle"] = oracle;
    const std::string text = args.format == "json" ? to_json_text(report) : run_text("verify", args, run, oracle);
    emit(text, args.out_path, out);
    if (!sandwich_ok) {
        err << "verify: sandwich violated beyond 4 SE slack\n";
        return ExitCode::verification;
    }
    return ExitCode::ok;
}

struct BenchArgs {
    std::string sides = "2,4,8";
    double t = 1.0;
    std::optional<double> w;
    std::optional<double> wmin;
    std::optional<double> wmax;
    std::size_t samples = 20000;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string format = "text";
    std::string out_path;
};

/// "2,4,8" or "2x3,4x4": n alone means K_{n,n}.
inline std::vector<std::pair<std::size_t, std::size_t>> parse_sides(const std::string& text)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t m = 0, n = 0;
        const auto x = tok.find('x');
        try {
            std::size_t used = 0;
            if (x == std::string::npos) {
                m = n = std::stoul(tok, &used);
                if (used != tok.size()) throw UsageError("");
            } else {
                m = std::stoul(tok.substr(0, x), &used);
                if (used != x) throw UsageError("");
                n = std::stoul(tok.substr(x + 1), &used);
                if (used != tok.size() - x - 1) throw UsageError("");
            }
        } catch (const std::exception&) {
            throw UsageError("bad --sides entry '" + tok + "'");
        }
        if (m == 0 || n == 0) throw UsageError("--sides entries must be positive");
        out.emplace_back(m, n);
    }
    if (out.empty()) throw UsageError("--sides is empty");
    return out;
}

inline int cmd_bench(const BenchArgs& args, std::ostream& out)
{
    double a = 0.0, b = 0.0;
    if (args.w) {
        if (args.wmin || args.wmax) throw UsageError("--w excludes --wmin/--wmax");
        if (!(*args.w > 0.0) || !std::isfinite(*args.w)) throw UsageError("--w must be in (0, inf)");
        a = b = std::sqrt(*args.w);
    } else if (args.wmin && args.wmax) {
        if (!(*args.wmin > 0.0 && *args.wmin <= *args.wmax) || !std::isfinite(*args.wmax))
            throw UsageError("need 0 < --wmin <= --wmax < inf");
        b = std::sqrt(*args.wmin);
        a = std::sqrt(*args.wmax);
    } else {
        a = b = 1.0;
    }
    if (!(args.t > 0.0) || !std::isfinite(args.t)) throw UsageError("--t must be positive");
    if (args.samples == 0) throw UsageError("--samples must be >= 1");

    EstimatorOptions opts;
    opts.threads = args.threads;
    const auto rows = optimality_sweep(parse_sides(args.sides), args.t, b, a, args.seed, args.samples, opts);

    std::ostringstream os;
    if (args.format == "json") {
        Json arr = Json::array();
        for (const auto& r : rows)
            arr.push_back(Json{{"m", r.m},
                               {"n", r.n},
                               {"t", r.t},
                               {"a", r.a},
                               {"b", r.b},
                               {"uniform", r.uniform},
                               {"k", r.k},
                               {"exact_per_vertex", json_number(r.exact_per_vertex)},
                               {"estimate_per_vertex", json_number(r.estimate_per_vertex)},
                               {"gap_per_vertex", json_number(r.gap_per_vertex)},
                               {"std_err_per_vertex", json_number(r.std_err_per_vertex)},
                               {"bound", json_number(r.bound_per_vertex)}});
        Json j{{"command", Json{{"name", "bench"},
                                {"sides", args.sides},
                                {"t", args.t},
                                {"a", a},
                                {"b", b},
                                {"samples", args.samples},
                                {"seed", args.seed}}},
               {"rows", arr}};
        os << to_json_text(j);
    } else if (args.format == "csv") {
        os << "m,n,exact_per_vertex,estimate_per_vertex,gap_per_vertex,std_err_per_vertex,bound\r\n";
        for (const auto& r : rows)
            os << r.m << ',' << r.n << ',' << csv_field(format_double(r.exact_per_vertex)) << ','
               << csv_field(format_double(r.estimate_per_vertex)) << ','
               << csv_field(format_double(r.gap_per_vertex)) << ','
               << csv_field(format_double(r.std_err_per_vertex)) << ','
               << csv_field(format_double(r.bound_per_vertex)) << "\r\n";
    } else {
        os << "    m     n   exact/vertex   estimate/vertex   gap/vertex      +-SE        bound\n";
        for (const auto& r : rows) {
            char line[200];
            std::snprintf(line, sizeof line, "%5zu %5zu   %12.8f   %15.8f   %10.6f   %9.2e   %10.6f\n", r.m, r.n,
                          r.exact_per_vertex, r.estimate_per_vertex, r.gap_per_vertex, r.std_err_per_vertex,
                          r.bound_per_vertex);
            os << line;
        }
    }
    emit(os.str(), args.out_path, out);
    return ExitCode::ok;
}

inline int cmd_constants(const std::string& format, const std::string& out_path, std::ostream& out)
{
    const double c1 = c1_constant();
    std::vector<std::pair<double, double>> table;
    for (int i = 0; i <= 32; ++i) {
        const double a = 0.25 * i;
        table.emplace_back(a, gaussian_log_gap(a));
    }
    std::ostringstream os;
    if (format == "json") {
        Json rows = Json::array();
        for (auto [a, g] : table) rows.push_back(Json{{"a", a}, {"g", g}});
        os << to_json_text(Json{{"c1", c1}, {"g_table", rows}});
    } else {
        char buf[80];
        std::snprintf(buf, sizeof buf, "C1 = %.9f\n", c1);
        os << buf << "     a          g(a)\n";
        for (auto [a, g] : table) {
            std::snprintf(buf, sizeof buf, "%6.2f  %.12f\n", a, g);
            os << buf;
        }
    }
    emit(os.str(), out_path, out);
    return ExitCode::ok;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline void add_common(CLI::App* cmd, CommonArgs& a)
{
    cmd->add_option("--graph", a.graph_path, "graph file (\"N M\" header, then M lines \"u v w\")")->required();
    cmd->add_option("--t", a.t, "evaluation point t >= 0")->required();
    cmd->add_option("--eps", a.eps, "relative accuracy for sample planning");
    cmd->add_option("--delta", a.delta, "failure probability for sample planning");
    cmd->add_option("--samples", a.samples, "number of Monte Carlo samples k");
    cmd->add_option("--seed", a.seed, "64-bit seed")->default_val(0);
    cmd->add_option("--threads", a.threads, "worker threads (0 = all cores)")->default_val(0);
    cmd->add_option("--fast-bipartite", a.fast_bipartite, "bipartite fast path")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->default_val("auto");
    cmd->add_option("--format", a.format, "output format")->check(CLI::IsMember({"json", "text"}))->default_val("text");
    cmd->add_option("--out", a.out_path, "write the report here instead of stdout");
    cmd->add_flag("--timing", a.timing, "include wall-clock time in the report");
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Certified Monte Carlo bounds for weighted matching polynomials", "matchpoly"};
    app.require_subcommand(1);

    CommonArgs est_args, ver_args;
    auto* est = app.add_subcommand("estimate", "estimate log Phi~ and bound log Phi");
    add_common(est, est_args);
    auto* ver = app.add_subcommand("verify", "compare the estimator with the exact oracle");
    add_common(ver, ver_args);

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "per-vertex gap sweep over complete bipartite graphs");
    bench->add_option("--sides", bench_args.sides, "comma list of n (K_{n,n}) or mxn")->default_val("2,4,8");
    bench->add_option("--t", bench_args.t, "evaluation point t > 0")->default_val(1.0);
    bench->add_option("--w", bench_args.w, "uniform edge weight");
    bench->add_option("--wmin", bench_args.wmin, "random weights: lower end");
    bench->add_option("--wmax", bench_args.wmax, "random weights: upper end");
    bench->add_option("--samples", bench_args.samples, "samples per row")->default_val(20000);
    bench->add_option("--seed", bench_args.seed, "64-bit seed")->default_val(0);
    bench->add_option("--threads", bench_args.threads, "worker threads (0 = all cores)")->default_val(0);
    bench->add_option("--format", bench_args.format, "output format")
        ->check(CLI::IsMember({"json", "text", "csv"}))
        ->default_val("text");
    bench->add_option("--out", bench_args.out_path, "output path");

    std::string const_format = "text", const_out;
    auto* constants = app.add_subcommand("constants", "print C1 and a table of g(a)");
    constants->add_option("--format", const_format, "output format")
        ->check(CLI::IsMember({"json", "text"}))
        ->default_val("text");
    constants->add_option("--out", const_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ExitCode::ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ExitCode::ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return ExitCode::usage;
    }

    try {
        if (*est) return cmd_estimate(est_args, out);
        if (*ver) return cmd_verify(ver_args, out, err);
        if (*bench) return cmd_bench(bench_args, out);
        if (*constants) return cmd_constants(const_format, const_out, out);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return ExitCode::numerical;
    } catch (const OracleTooLarge& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::usage;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return ExitCode::usage;
    }
    return ExitCode::usage;
}

} // namespace matchpoly::cli
