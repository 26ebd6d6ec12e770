// Command-line front end: builds sparse attention patterns, runs attention
// diffusion and the full layer, and exposes the spectral checks. One binary,
// one subcommand per module surface.
//
// Exit codes: 0 success, 1 validation error (single `error: ...` line on
// stderr), 2 numerical failure (tolerance breach, reported on stderr).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attndiff/diffusion.hpp"
#include "attndiff/experiments.hpp"
#include "attndiff/graph.hpp"
#include "attndiff/layer.hpp"
#include "attndiff/matrix_io.hpp"
#include "attndiff/rng.hpp"
#include "attndiff/spectral.hpp"

namespace {

using namespace attndiff;
using nlohmann::json;

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string format = "json";
    std::vector<std::string> argv; // raw args, echoed into the manifest
};

void ensure_out_dir(const GlobalOpts& g) {
    std::filesystem::create_directories(g.out_dir);
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
    return (std::filesystem::path(g.out_dir) / name).string();
}

void write_manifest(const GlobalOpts& g, const std::string& subcommand,
                    const json& resolved) {
    ensure_out_dir(g);
    json manifest{{"subcommand", subcommand},
                  {"argv", g.argv},
                  {"seed", g.seed},
                  {"out_dir", g.out_dir},
                  {"format", g.format},
                  {"config", resolved}};
    std::ofstream os(out_path(g, "manifest.json"));
    os << manifest.dump(2) << '\n';
}

void flatten(const json& j, const std::string& prefix, std::ostream& os) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items())
            flatten(value, prefix.empty() ? key : prefix + "." + key, os);
    } else if (j.is_array()) {
        std::string joined;
        for (const auto& v : j) {
            if (!joined.empty()) joined += ';';
            joined += v.is_string() ? v.get<std::string>() : v.dump();
        }
        os << prefix << ',' << joined << '\n';
    } else {
        os << prefix << ',' << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
    }
}

void print_report(const GlobalOpts& g, const json& j) {
    if (g.format == "csv")
        flatten(j, "", std::cout);
    else
        std::cout << j.dump(2) << '\n';
}

json stats_to_json(const PatternStats& s) {
    return json{{"n", s.n},
                {"nnz_total", s.nnz_total},
                {"nnz_self", s.nnz_self},
                {"nnz_local", s.nnz_local},
                {"nnz_global", s.nnz_global},
                {"nnz_random", s.nnz_random},
                {"pct_total", s.pct_total},
                {"pct_self", s.pct_self},
                {"pct_local", s.pct_local},
                {"pct_global", s.pct_global},
                {"pct_random", s.pct_random}};
}

json expander_to_json(const ExpanderReport& r) {
    return json{{"n", r.n},
                {"d_min", r.d_min},
                {"d_max", r.d_max},
                {"regular", r.regular},
                {"mu1", r.mu1},
                {"mu2", r.mu2},
                {"mu_n", r.mu_n},
                {"epsilon", r.epsilon},
                {"epsilon_approximate", r.epsilon_approximate},
                {"sigma", r.sigma},
                {"beta", r.beta},
                {"lambda2", r.lambda2},
                {"lambda2_unnormalized", r.lambda2_unnormalized},
                {"cheeger_lower", r.cheeger_lower},
                {"cheeger_upper", r.cheeger_upper}};
}

// --- pattern ------------------------------------------------------------------

struct PatternOpts {
    Index n = 0;
    std::string parts = "local,global,random";
    Index window = 64;
    Index global_tokens = 64;
    Index random_per_token = 64;
    Index block = 64;
    Index blocks_per_row = 1;
    Index degree = 16;
    bool self_loops_on = false;
    bool self_loops_off = false;
    bool binary = false;
    std::string out;
};

PatternSpec spec_from_opts(const PatternOpts& o) {
    PatternSpec spec;
    spec.self_loops = true;
    bool only_fixtures = true;
    std::stringstream ss(o.parts);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part == "local") {
            spec.local_window = o.window;
            only_fixtures = false;
        } else if (part == "global") {
            spec.global_tokens = o.global_tokens;
            only_fixtures = false;
        } else if (part == "global-block") {
            spec.global_tokens = o.global_tokens;
            spec.global_contiguous = true;
            only_fixtures = false;
        } else if (part == "random") {
            spec.random_per_token = o.random_per_token;
            only_fixtures = false;
        } else if (part == "random-block") {
            spec.random_blocks_per_row = o.blocks_per_row;
            spec.random_block = o.block;
            only_fixtures = false;
        } else if (part == "regular") {
            spec.regular_degree = o.degree;
        } else if (part == "complete") {
            spec.complete = true;
        } else if (part == "cycle") {
            spec.cycle = true;
        } else {
            throw std::invalid_argument("unknown pattern part '" + part + "'");
        }
    }
    // Spectral fixtures default to the bare graph; attention patterns default
    // to finalized. Explicit flags win either way.
    if (only_fixtures) spec.self_loops = false;
    if (o.self_loops_on) spec.self_loops = true;
    if (o.self_loops_off) spec.self_loops = false;
    return spec;
}

void run_pattern(const GlobalOpts& g, const PatternOpts& o) {
    const PatternSpec spec = spec_from_opts(o);
    const std::string path = o.out.empty() ? out_path(g, "graph.json") : o.out;
    write_manifest(g, "pattern",
                   json{{"n", o.n},
                        {"pattern", spec.to_json()},
                        {"out", path},
                        {"binary", o.binary}});
    const AttentionGraph graph = build_pattern(spec, o.n, g.seed);
    save_graph(graph, path, o.binary);

    if (spec.random_per_token > 0) {
        const Index min_r =
            static_cast<Index>(std::ceil(std::log2(static_cast<double>(o.n))));
        if (spec.random_per_token < min_r)
            std::cerr << "warning: random-per-token " << spec.random_per_token
                      << " is below the connectivity threshold log2(n) = " << min_r
                      << "\n";
    }

    json report = stats_to_json(pattern_stats(graph));
    report["graph"] = path;
    print_report(g, report);
}

// --- stats / check --------------------------------------------------------------

void run_stats(const GlobalOpts& g, const std::string& graph_path) {
    write_manifest(g, "stats", json{{"graph", graph_path}});
    print_report(g, stats_to_json(pattern_stats(load_graph(graph_path))));
}

void run_check(const GlobalOpts& g, const std::string& graph_path) {
    write_manifest(g, "check", json{{"graph", graph_path}});
    const AssumptionReport rep = check_assumption(load_graph(graph_path));
    print_report(g, json{{"has_all_self_loops", rep.has_all_self_loops},
                         {"is_connected", rep.is_connected},
                         {"has_identity_chain", rep.has_identity_chain}});
}

// --- diffuse --------------------------------------------------------------------

struct DiffuseOpts {
    std::string graph;
    std::string values;
    double alpha = 0.1;
    int steps = 5;
    bool check_oracle = false;
    std::string out;
};

void run_diffuse(const GlobalOpts& g, const DiffuseOpts& o) {
    const std::string path = o.out.empty() ? out_path(g, "diffused.csv") : o.out;
    write_manifest(g, "diffuse",
                   json{{"graph", o.graph},
                        {"values", o.values},
                        {"alpha", o.alpha},
                        {"steps", o.steps},
                        {"check_oracle", o.check_oracle},
                        {"out", path}});
    const AttentionGraph graph = load_graph(o.graph);
    const Matrix v = load_matrix_csv(o.values);
    const EdgeAttention attention = EdgeAttention::uniform(graph);

    const auto t0 = std::chrono::steady_clock::now();
    const Matrix z = diffuse(attention, v, {o.alpha, o.steps});
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_matrix_csv(z, path);

    json report{{"alpha", o.alpha},
                {"steps", o.steps},
                {"residual_mass", std::pow(1.0 - o.alpha, o.steps + 1)},
                {"wall_time_seconds", wall},
                {"output", path}};
    if (o.check_oracle) {
        if (graph.n() > 1024)
            throw std::invalid_argument("--check-oracle requires n <= 1024");
        if (!(o.alpha > 0.0))
            throw std::invalid_argument("--check-oracle requires alpha > 0");
        const Matrix exact = exact_diffusion_operator(to_dense(attention), o.alpha) * v;
        const double err = (z - exact).cwiseAbs().maxCoeff();
        const double tol =
            truncation_error_bound(o.alpha, o.steps, v.cwiseAbs().maxCoeff());
        report["max_error_vs_oracle"] = err;
        report["oracle_tolerance"] = tol;
        std::ofstream os(out_path(g, "diffuse_report.json"));
        os << report.dump(2) << '\n';
        if (err > tol)
            throw NumericalFailure("oracle deviation " + format_double(err) +
                                   " exceeds tolerance " + format_double(tol));
    } else {
        std::ofstream os(out_path(g, "diffuse_report.json"));
        os << report.dump(2) << '\n';
    }
    print_report(g, report);
}

// --- layer ----------------------------------------------------------------------

struct LayerOpts {
    std::string graph;
    Index n = 0;
    Index d = 8;
    Index heads = 2;
    Index head_dim = 4;
    Index ffn_dim = 16;
    double alpha = 0.1;
    int steps = 5;
    std::string x_path;
    std::string params_path;
    std::string save_params_path;
    std::string out;
    bool check_grad = false;
    double eps = 1e-5;
};

void run_layer(const GlobalOpts& g, const LayerOpts& o) {
    const std::string path = o.out.empty() ? out_path(g, "layer_out.csv") : o.out;
    write_manifest(g, "layer",
                   json{{"graph", o.graph},
                        {"n", o.n},
                        {"d", o.d},
                        {"heads", o.heads},
                        {"head_dim", o.head_dim},
                        {"ffn_dim", o.ffn_dim},
                        {"alpha", o.alpha},
                        {"steps", o.steps},
                        {"x", o.x_path},
                        {"params", o.params_path},
                        {"save_params", o.save_params_path},
                        {"out", path},
                        {"check_grad", o.check_grad},
                        {"eps", o.eps}});
    const AttentionGraph graph = load_graph(o.graph);
    if (o.n != 0 && o.n != graph.n())
        throw std::invalid_argument("--n does not match the graph token count");

    const LayerParams params =
        o.params_path.empty()
            ? LayerParams::random(o.d, o.heads, o.head_dim, o.ffn_dim, g.seed)
            : load_layer_params(o.params_path);
    Matrix x;
    if (o.x_path.empty()) {
        Rng rng(derive_seed(g.seed, "layer-input"));
        x.resize(graph.n(), params.embed_dim());
        for (Index i = 0; i < x.rows(); ++i)
            for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    } else {
        x = load_matrix_csv(o.x_path);
    }
    if (x.rows() != graph.n())
        throw std::invalid_argument("input rows must equal graph token count");

    const Matrix y = layer_forward(x, params, graph, {o.alpha, o.steps});
    save_matrix_csv(y, path);
    if (!o.save_params_path.empty())
        save_layer_params(params, g.seed, o.save_params_path);

    json report{{"n", graph.n()},
                {"d", params.embed_dim()},
                {"heads", params.head_count()},
                {"head_dim", params.head_dim()},
                {"ffn_dim", params.ffn_dim()},
                {"alpha", o.alpha},
                {"steps", o.steps},
                {"output", path}};
    if (o.check_grad) {
        const double err = grad_check(x, params, graph, {o.alpha, o.steps}, o.eps);
        report["grad_max_rel_error"] = err;
        report["grad_tolerance"] = 1e-4;
        print_report(g, report);
        if (err > 1e-4)
            throw NumericalFailure("gradient check failed: max relative error " +
                                   format_double(err) + " exceeds tolerance 1e-4");
        return;
    }
    print_report(g, report);
}

// --- spectrum / expander ----------------------------------------------------------

void run_spectrum(const GlobalOpts& g, const std::string& graph_path,
                  const std::string& op, const std::string& out) {
    const std::string path = out.empty() ? out_path(g, "spectrum.csv") : out;
    write_manifest(g, "spectrum",
                   json{{"graph", graph_path}, {"operator", op}, {"out", path}});
    const AttentionGraph graph = load_graph(graph_path);
    Spectrum spec;
    if (op == "lap")
        spec = normalized_laplacian_spectrum(graph);
    else if (op == "adj")
        spec = adjacency_spectrum(graph);
    else if (op == "trans")
        spec = transition_spectrum(graph);
    else
        throw std::invalid_argument("unknown operator '" + op + "' (use lap|adj|trans)");

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "index,eigenvalue\n";
    for (Index i = 0; i < spec.eigenvalues.size(); ++i)
        os << i << ',' << format_double(spec.eigenvalues[i]) << '\n';

    const Index n = spec.eigenvalues.size();
    print_report(g, json{{"operator", op},
                         {"n", n},
                         {"lambda1", spec.eigenvalues[0]},
                         {"lambda2", n > 1 ? spec.eigenvalues[1] : spec.eigenvalues[0]},
                         {"lambda_n", spec.eigenvalues[n - 1]},
                         {"output", path}});
}

void run_expander(const GlobalOpts& g, const std::string& graph_path) {
    write_manifest(g, "expander", json{{"graph", graph_path}});
    const json rep = expander_to_json(expander_report(load_graph(graph_path)));
    std::ofstream os(out_path(g, "expander.json"));
    os << rep.dump(2) << '\n';
    print_report(g, rep);
}

// --- mixing ----------------------------------------------------------------------

void run_mixing(const GlobalOpts& g, const std::string& graph_path, int t_max,
                const std::string& v0_spec, const std::string& out) {
    const std::string path = out.empty() ? out_path(g, "mixing.csv") : out;
    write_manifest(g, "mixing",
                   json{{"graph", graph_path},
                        {"tmax", t_max},
                        {"v0", v0_spec},
                        {"out", path}});
    const AttentionGraph graph = load_graph(graph_path);
    Vector v0;
    if (v0_spec == "uniform") {
        v0 = Vector::Constant(graph.n(), 1.0 / static_cast<double>(graph.n()));
    } else {
        const Index idx = static_cast<Index>(std::stoll(v0_spec));
        if (idx < 0 || idx >= graph.n())
            throw std::invalid_argument("--v0 index out of range");
        v0 = Vector::Zero(graph.n());
        v0[idx] = 1.0;
    }
    std::vector<MixingPoint> curve;
    try {
        curve = mixing_tv_curve(graph, v0, t_max);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw NumericalFailure(e.what());
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "t,tv_distance,bound\n";
    for (const MixingPoint& pt : curve)
        os << pt.t << ',' << format_double(pt.tv_distance) << ','
           << format_double(pt.bound) << '\n';
    print_report(g, json{{"tmax", t_max},
                         {"satisfied", true},
                         {"final_distance", curve.back().tv_distance},
                         {"final_bound", curve.back().bound},
                         {"output", path}});
}

// --- cheeger ---------------------------------------------------------------------

void run_cheeger(const GlobalOpts& g, const std::string& graph_path) {
    write_manifest(g, "cheeger", json{{"graph", graph_path}});
    const AttentionGraph graph = load_graph(graph_path);
    const double h = cheeger_bruteforce(graph);
    const ExpanderReport rep = expander_report(graph);
    std::cout << "h = " << format_double(h) << '\n';
    std::cout << "bounds: " << format_double(rep.cheeger_lower)
              << " <= h <= " << format_double(rep.cheeger_upper) << '\n';
    print_report(g, json{{"h", h},
                         {"lambda2_unnormalized", rep.lambda2_unnormalized},
                         {"cheeger_lower", rep.cheeger_lower},
                         {"cheeger_upper", rep.cheeger_upper},
                         {"regular", rep.regular}});
    if (rep.regular && (rep.cheeger_lower > h + 1e-8 || h > rep.cheeger_upper + 1e-8))
        throw NumericalFailure(
            "Cheeger sandwich violated: " + format_double(rep.cheeger_lower) +
            " <= " + format_double(h) + " <= " + format_double(rep.cheeger_upper) +
            " (tolerance 1e-8)");
}

// --- experiments -------------------------------------------------------------------

json load_config(const std::string& path, const std::string& expected) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config: " + path);
    json cfg;
    is >> cfg;
    const std::string experiment = cfg.value("experiment", "");
    if (experiment != expected)
        throw std::invalid_argument("config experiment '" + experiment +
                                    "' does not match subcommand (expected '" +
                                    expected + "')");
    return cfg;
}

void run_robustness(const GlobalOpts& g, const std::string& config_path) {
    const json cfg_json = load_config(config_path, "roll_robustness");
    RollConfig cfg;
    cfg.n = cfg_json.value("n", Index{256});
    cfg.d = cfg_json.value("d", Index{8});
    cfg.heads = cfg_json.value("heads", Index{2});
    cfg.head_dim = cfg_json.value("head_dim", Index{4});
    cfg.ffn_dim = cfg_json.value("ffn_dim", Index{16});
    cfg.diffusion.alpha = cfg_json.value("alpha", 0.1);
    cfg.diffusion.steps = cfg_json.value("steps", 5);
    if (cfg_json.contains("pattern"))
        cfg.pattern = PatternSpec::from_json(cfg_json["pattern"]);
    if (cfg_json.contains("shifts"))
        cfg.shifts = cfg_json["shifts"].get<std::vector<Index>>();
    if (cfg_json.contains("seeds"))
        cfg.seeds = cfg_json["seeds"].get<std::vector<std::uint64_t>>();
    write_manifest(g, "robustness", cfg_json);

    const ExperimentReport rep = roll_robustness(cfg);
    ensure_out_dir(g);
    {
        std::ofstream os(out_path(g, "report.json"));
        os << rep.to_json().dump(2) << '\n';
    }
    {
        std::ofstream os(out_path(g, "metrics.csv"));
        os << "seed,shift,metric\n";
        for (const TrialRecord& t : rep.trials)
            for (const auto& [key, value] : t.metrics)
                os << t.seed << ',' << key.substr(std::string("shift_").size()) << ','
                   << format_double(value) << '\n';
    }
    print_report(g, rep.to_json());
}

void run_compare_spectra(const GlobalOpts& g, const std::string& config_path) {
    const json cfg_json = load_config(config_path, "pattern_spectra_compare");
    SpectraCompareConfig cfg;
    cfg.n = cfg_json.value("n", Index{512});
    if (cfg_json.contains("seeds"))
        cfg.seeds = cfg_json["seeds"].get<std::vector<std::uint64_t>>();
    for (const json& c : cfg_json.at("configs")) {
        SpectraCompareConfig::Entry e;
        e.name = c.at("name").get<std::string>();
        e.pattern = PatternSpec::from_json(c.at("pattern"));
        cfg.configs.push_back(std::move(e));
    }
    write_manifest(g, "compare-spectra", cfg_json);

    ensure_out_dir(g);
    const auto summaries = pattern_spectra_compare(cfg, g.out_dir);
    {
        std::ofstream os(out_path(g, "summary.csv"));
        os << "name,seed,lambda1,lambda2,lambda_n1,lambda_n\n";
        for (const auto& s : summaries)
            os << s.name << ',' << s.seed << ',' << format_double(s.lambda1) << ','
               << format_double(s.lambda2) << ',' << format_double(s.lambda_n1) << ','
               << format_double(s.lambda_n) << '\n';
    }
    json report_summaries = json::array();
    for (const auto& s : summaries)
        report_summaries.push_back({{"name", s.name},
                                    {"seed", s.seed},
                                    {"lambda1", s.lambda1},
                                    {"lambda2", s.lambda2},
                                    {"lambda_n1", s.lambda_n1},
                                    {"lambda_n", s.lambda_n},
                                    {"csv", s.csv_path}});
    const json report{{"experiment", "pattern_spectra_compare"},
                      {"parameters", cfg_json},
                      {"summaries", report_summaries}};
    {
        std::ofstream os(out_path(g, "report.json"));
        os << report.dump(2) << '\n';
    }
    print_report(g, report);
}

void run_bench(const GlobalOpts& g, const std::string& config_path) {
    const json cfg_json = load_config(config_path, "bench");
    BenchConfig cfg;
    cfg.n = cfg_json.value("n", Index{1024});
    cfg.value_dim = cfg_json.value("value_dim", Index{64});
    cfg.reps = cfg_json.value("reps", 5);
    cfg.diffusion.alpha = cfg_json.value("alpha", 0.1);
    cfg.diffusion.steps = cfg_json.value("steps", 5);
    cfg.seed = cfg_json.value("seed", g.seed);
    if (cfg_json.contains("pattern"))
        cfg.pattern = PatternSpec::from_json(cfg_json["pattern"]);
    write_manifest(g, "bench", cfg_json);

    const ExperimentReport rep = bench(cfg);
    ensure_out_dir(g);
    std::ofstream os(out_path(g, "report.json"));
    os << rep.to_json().dump(2) << '\n';
    print_report(g, rep.to_json());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse attention patterns, attention diffusion, and spectral checks"};
    app.require_subcommand(1);

    GlobalOpts g;
    for (int i = 1; i < argc; ++i) g.argv.emplace_back(argv[i]);
    app.add_option("--seed", g.seed, "root seed; per-component streams derive from it");
    app.add_option("--out-dir", g.out_dir, "directory for outputs and the run manifest");
    app.add_option("--format", g.format, "stdout report format")
        ->check(CLI::IsMember({"csv", "json"}));

    auto add_sub = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->fallthrough();
        sub->footer("Global flags: --seed UINT, --out-dir TEXT, --format {csv,json}");
        return sub;
    };

    PatternOpts pat;
    CLI::App* pattern_cmd = add_sub("pattern", "build a sparse attention pattern");
    pattern_cmd->add_option("--n", pat.n, "token count")->required();
    pattern_cmd->add_option("--pattern", pat.parts,
                            "comma list of local,global,global-block,random,"
                            "random-block,regular,complete,cycle");
    pattern_cmd->add_option("--window", pat.window, "local window size w");
    pattern_cmd->add_option("--global-tokens", pat.global_tokens, "global token count g");
    pattern_cmd->add_option("--random-per-token", pat.random_per_token,
                            "random edges per token r");
    pattern_cmd->add_option("--block", pat.block, "block size for block-wise random");
    pattern_cmd->add_option("--blocks-per-row", pat.blocks_per_row,
                            "key blocks per query block");
    pattern_cmd->add_option("--degree", pat.degree, "degree for the regular fixture");
    pattern_cmd->add_flag("--self-loops", pat.self_loops_on,
                          "force self loops (default for attention patterns)");
    pattern_cmd->add_flag("--no-self-loops", pat.self_loops_off,
                          "omit self loops (default for bare fixtures)");
    pattern_cmd->add_flag("--binary", pat.binary, "write the compact binary form");
    pattern_cmd->add_option("--out", pat.out, "graph file path");

    std::string stats_graph, check_graph;
    CLI::App* stats_cmd = add_sub("stats", "pattern sparsity statistics");
    stats_cmd->add_option("--graph", stats_graph, "graph file")->required();
    CLI::App* check_cmd = add_sub("check", "self-loop / connectivity / chain report");
    check_cmd->add_option("--graph", check_graph, "graph file")->required();

    DiffuseOpts dif;
    CLI::App* diffuse_cmd =
        add_sub("diffuse", "run attention diffusion with uniform weights");
    diffuse_cmd->add_option("--graph", dif.graph, "graph file")->required();
    diffuse_cmd->add_option("--values", dif.values, "value matrix CSV")->required();
    diffuse_cmd->add_option("--alpha", dif.alpha, "teleport probability");
    diffuse_cmd->add_option("--steps", dif.steps, "diffusion step count K");
    diffuse_cmd->add_flag("--check-oracle", dif.check_oracle,
                          "compare against the exact resolvent (n <= 1024)");
    diffuse_cmd->add_option("--out", dif.out, "output CSV path");

    LayerOpts lay;
    CLI::App* layer_cmd = add_sub("layer", "full sparse-attention layer forward");
    layer_cmd->add_option("--graph", lay.graph, "graph file")->required();
    layer_cmd->add_option("--n", lay.n, "token count (validated against the graph)");
    layer_cmd->add_option("--d", lay.d, "embedding width");
    layer_cmd->add_option("--heads", lay.heads, "head count");
    layer_cmd->add_option("--head-dim", lay.head_dim, "per-head width");
    layer_cmd->add_option("--ffn-dim", lay.ffn_dim, "feed-forward hidden width");
    layer_cmd->add_option("--alpha", lay.alpha, "teleport probability");
    layer_cmd->add_option("--steps", lay.steps, "diffusion step count K");
    layer_cmd->add_option("--x", lay.x_path, "input matrix CSV (random when omitted)");
    layer_cmd->add_option("--params", lay.params_path, "load parameter checkpoint");
    layer_cmd->add_option("--save-params", lay.save_params_path,
                          "write parameter checkpoint");
    layer_cmd->add_option("--out", lay.out, "output CSV path");
    layer_cmd->add_flag("--check-grad", lay.check_grad,
                        "verify gradients by central differences (n <= 64)");
    layer_cmd->add_option("--eps", lay.eps, "finite-difference step");

    std::string spec_graph, spec_op = "lap", spec_out;
    CLI::App* spectrum_cmd = add_sub("spectrum", "eigenvalues of a graph operator");
    spectrum_cmd->add_option("--graph", spec_graph, "graph file")->required();
    spectrum_cmd->add_option("--operator", spec_op, "lap | adj | trans")
        ->check(CLI::IsMember({"lap", "adj", "trans"}));
    spectrum_cmd->add_option("--out", spec_out, "output CSV path");

    std::string exp_graph;
    CLI::App* expander_cmd = add_sub("expander", "expander metrics report");
    expander_cmd->add_option("--graph", exp_graph, "graph file")->required();

    std::string mix_graph, mix_v0 = "0", mix_out;
    int mix_tmax = 50;
    CLI::App* mixing_cmd =
        add_sub("mixing", "random-walk mixing against the spectral bound");
    mixing_cmd->add_option("--graph", mix_graph, "graph file (d-regular)")->required();
    mixing_cmd->add_option("--tmax", mix_tmax, "number of walk steps");
    mixing_cmd->add_option("--v0", mix_v0, "start distribution: token index or 'uniform'");
    mixing_cmd->add_option("--out", mix_out, "output CSV path");

    std::string cheeger_graph;
    CLI::App* cheeger_cmd = add_sub("cheeger", "exact edge expansion (n <= 14) with bounds");
    cheeger_cmd->add_option("--graph", cheeger_graph, "graph file")->required();

    std::string rob_config, cmp_config, bench_config;
    CLI::App* rob_cmd = add_sub("robustness", "roll-robustness experiment from a config");
    rob_cmd->add_option("--config", rob_config, "experiment config JSON")->required();
    CLI::App* cmp_cmd =
        add_sub("compare-spectra", "pattern spectra comparison from a config");
    cmp_cmd->add_option("--config", cmp_config, "experiment config JSON")->required();
    CLI::App* bench_cmd = add_sub("bench", "storage and diffusion timing bench");
    bench_cmd->add_option("--config", bench_config, "experiment config JSON")->required();

    try {
        app.parse(argc, argv);
        if (pattern_cmd->parsed()) run_pattern(g, pat);
        if (stats_cmd->parsed()) run_stats(g, stats_graph);
        if (check_cmd->parsed()) run_check(g, check_graph);
        if (diffuse_cmd->parsed()) run_diffuse(g, dif);
        if (layer_cmd->parsed()) run_layer(g, lay);
        if (spectrum_cmd->parsed()) run_spectrum(g, spec_graph, spec_op, spec_out);
        if (expander_cmd->parsed()) run_expander(g, exp_graph);
        if (mixing_cmd->parsed()) run_mixing(g, mix_graph, mix_tmax, mix_v0, mix_out);
        if (cheeger_cmd->parsed()) run_cheeger(g, cheeger_graph);
        if (rob_cmd->parsed()) run_robustness(g, rob_config);
        if (cmp_cmd->parsed()) run_compare_spectra(g, cmp_config);
        if (bench_cmd->parsed()) run_bench(g, bench_config);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
