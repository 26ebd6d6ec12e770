#include "attndiff/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "attndiff/layer.hpp"
#include "attndiff/matrix_io.hpp"
#include "attndiff/rng.hpp"
#include "attndiff/spectral.hpp"

namespace attndiff {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix random_input(Index n, Index d, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "input"));
    Matrix x(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    return x;
}

} // namespace

PatternSpec PatternSpec::from_json(const nlohmann::json& j) {
    PatternSpec s;
    if (j.contains("local")) s.local_window = j["local"].value("window", Index{0});
    if (j.contains("global")) {
        s.global_tokens = j["global"].value("tokens", Index{0});
        s.global_contiguous = j["global"].value("contiguous", false);
    }
    if (j.contains("random")) {
        s.random_per_token = j["random"].value("per_token", Index{0});
        s.random_blocks_per_row = j["random"].value("blocks_per_row", Index{0});
        s.random_block = j["random"].value("block", Index{0});
    }
    if (j.contains("regular")) s.regular_degree = j["regular"].value("degree", Index{0});
    s.complete = j.value("complete", false);
    s.cycle = j.value("cycle", false);
    s.self_loops = j.value("self_loops", true);
    return s;
}

nlohmann::json PatternSpec::to_json() const {
    nlohmann::json j;
    if (local_window > 0) j["local"] = {{"window", local_window}};
    if (global_tokens > 0)
        j["global"] = {{"tokens", global_tokens}, {"contiguous", global_contiguous}};
    if (random_per_token > 0) j["random"] = {{"per_token", random_per_token}};
    if (random_blocks_per_row > 0)
        j["random"] = {{"blocks_per_row", random_blocks_per_row}, {"block", random_block}};
    if (regular_degree > 0) j["regular"] = {{"degree", regular_degree}};
    if (complete) j["complete"] = true;
    if (cycle) j["cycle"] = true;
    j["self_loops"] = self_loops;
    return j;
}

AttentionGraph build_pattern(const PatternSpec& spec, Index n, std::uint64_t seed) {
    std::vector<AttentionGraph> parts;
    if (spec.local_window > 0) parts.push_back(build_local_window(n, spec.local_window));
    if (spec.global_tokens > 0) {
        parts.push_back(spec.global_contiguous
                            ? build_global_contiguous(n, spec.global_tokens)
                            : build_global(n, spec.global_tokens,
                                           derive_seed(seed, "global")));
    }
    if (spec.random_per_token > 0)
        parts.push_back(
            build_random_tokenwise(n, spec.random_per_token, derive_seed(seed, "random")));
    if (spec.random_blocks_per_row > 0) {
        if (spec.random_block <= 0)
            throw std::invalid_argument("build_pattern: random block size required");
        parts.push_back(build_random_blockwise(n, spec.random_blocks_per_row,
                                               spec.random_block,
                                               derive_seed(seed, "random-block")));
    }
    if (spec.regular_degree > 0)
        parts.push_back(build_regular_random(n, spec.regular_degree,
                                             derive_seed(seed, "regular")));
    if (spec.complete) parts.push_back(build_complete(n));
    if (spec.cycle) parts.push_back(build_cycle(n));

    AttentionGraph g = spec.self_loops ? finalize(n, parts) : graph_union(n, parts);
    g.meta().seed = seed;
    return g;
}

void ExperimentReport::finalize_aggregates() {
    aggregate_mean.clear();
    aggregate_min.clear();
    aggregate_max.clear();
    std::map<std::string, std::vector<double>> by_key;
    for (const TrialRecord& t : trials)
        for (const auto& [key, value] : t.metrics) by_key[key].push_back(value);
    for (const auto& [key, values] : by_key) {
        double sum = 0.0, lo = values.front(), hi = values.front();
        for (double v : values) {
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        aggregate_mean[key] = sum / static_cast<double>(values.size());
        aggregate_min[key] = lo;
        aggregate_max[key] = hi;
    }
}

nlohmann::json ExperimentReport::to_json() const {
    nlohmann::json trials_json = nlohmann::json::array();
    for (const TrialRecord& t : trials)
        trials_json.push_back({{"seed", t.seed}, {"metrics", t.metrics}});
    return nlohmann::json{{"experiment", experiment},
                          {"parameters", parameters},
                          {"trials", trials_json},
                          {"aggregate", {{"mean", aggregate_mean},
                                         {"min", aggregate_min},
                                         {"max", aggregate_max}}},
                          {"wall_seconds", wall_seconds},
                          {"working_set_bytes", working_set_bytes}};
}

Matrix roll_rows(const MatrixView& x, Index shift) {
    const Index n = x.rows();
    if (n == 0) return x;
    Index s = shift % n;
    if (s < 0) s += n;
    Matrix out(n, x.cols());
    for (Index i = 0; i < n; ++i) out.row((i + s) % n) = x.row(i);
    return out;
}

ExperimentReport roll_robustness(const RollConfig& cfg) {
    const auto start = Clock::now();
    for (Index s : cfg.shifts)
        if (s >= cfg.n || s < 0)
            throw std::invalid_argument("roll_robustness: shift must be in [0, n)");

    ExperimentReport rep;
    rep.experiment = "roll_robustness";
    rep.parameters = {{"n", cfg.n},        {"d", cfg.d},
                      {"heads", cfg.heads}, {"head_dim", cfg.head_dim},
                      {"ffn_dim", cfg.ffn_dim},
                      {"alpha", cfg.diffusion.alpha},
                      {"steps", cfg.diffusion.steps},
                      {"pattern", cfg.pattern.to_json()},
                      {"shifts", cfg.shifts}};

    for (std::uint64_t seed : cfg.seeds) {
        const AttentionGraph graph = build_pattern(cfg.pattern, cfg.n, seed);
        const LayerParams params = LayerParams::random(
            cfg.d, cfg.heads, cfg.head_dim, cfg.ffn_dim, derive_seed(seed, "roll-params"));
        const Matrix x = random_input(cfg.n, cfg.d, derive_seed(seed, "roll-input"));
        const Matrix y = layer_forward(x, params, graph, cfg.diffusion);
        const double y_norm = y.norm();

        TrialRecord trial;
        trial.seed = seed;
        for (Index s : cfg.shifts) {
            const Matrix y_shifted = layer_forward(roll_rows(x, s), params, graph, cfg.diffusion);
            const double metric = (roll_rows(y, s) - y_shifted).norm() / y_norm;
            trial.metrics["shift_" + std::to_string(s)] = metric;
        }
        rep.trials.push_back(std::move(trial));
        rep.working_set_bytes = std::max(
            rep.working_set_bytes,
            static_cast<std::uint64_t>(graph.nnz()) * (sizeof(double) + sizeof(Index)));
    }
    rep.finalize_aggregates();
    rep.wall_seconds = seconds_since(start);
    return rep;
}

std::vector<SpectrumSummary> pattern_spectra_compare(const SpectraCompareConfig& cfg,
                                                     const std::string& out_dir) {
    if (cfg.n > 2048)
        throw std::invalid_argument("pattern_spectra_compare: capped at n = 2048");
    std::filesystem::create_directories(out_dir);
    std::vector<SpectrumSummary> summaries;
    for (const auto& entry : cfg.configs) {
        for (std::uint64_t seed : cfg.seeds) {
            const AttentionGraph g = build_pattern(entry.pattern, cfg.n, seed);
            const Spectrum spec = normalized_laplacian_spectrum(g);
            const Index n = spec.eigenvalues.size();

            SpectrumSummary s;
            s.name = entry.name;
            s.seed = seed;
            s.lambda1 = spec.eigenvalues[0];
            s.lambda2 = n > 1 ? spec.eigenvalues[1] : spec.eigenvalues[0];
            s.lambda_n1 = n > 1 ? spec.eigenvalues[n - 2] : spec.eigenvalues[0];
            s.lambda_n = spec.eigenvalues[n - 1];
            s.csv_path = out_dir + "/spectrum_" + entry.name + "_seed" +
                         std::to_string(seed) + ".csv";

            std::ofstream os(s.csv_path);
            if (!os) throw std::runtime_error("cannot open for writing: " + s.csv_path);
            os << "index,eigenvalue\n";
            for (Index i = 0; i < n; ++i)
                os << i << ',' << format_double(spec.eigenvalues[i]) << '\n';
            summaries.push_back(std::move(s));
        }
    }
    return summaries;
}

ExperimentReport bench(const BenchConfig& cfg) {
    const auto start = Clock::now();
    if (cfg.reps < 3) throw std::invalid_argument("bench: reps must be >= 3");

    const AttentionGraph graph = build_pattern(cfg.pattern, cfg.n, cfg.seed);
    const EdgeAttention attention = EdgeAttention::uniform(graph);
    const Matrix v = random_input(cfg.n, cfg.value_dim, derive_seed(cfg.seed, "bench"));

    std::vector<double> times;
    Matrix sink;
    for (int r = 0; r < cfg.reps; ++r) {
        const auto t0 = Clock::now();
        sink = diffuse(attention, v, cfg.diffusion);
        times.push_back(seconds_since(t0));
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];

    const double n2 = static_cast<double>(cfg.n) * static_cast<double>(cfg.n);
    const double nnz = static_cast<double>(graph.nnz());

    ExperimentReport rep;
    rep.experiment = "bench";
    rep.parameters = {{"n", cfg.n},
                      {"value_dim", cfg.value_dim},
                      {"reps", cfg.reps},
                      {"alpha", cfg.diffusion.alpha},
                      {"steps", cfg.diffusion.steps},
                      {"pattern", cfg.pattern.to_json()},
                      {"seed", cfg.seed}};
    TrialRecord trial;
    trial.seed = cfg.seed;
    trial.metrics["nnz"] = nnz;
    trial.metrics["storage_ratio"] = nnz / n2;
    trial.metrics["sparse_weight_bytes"] = nnz * sizeof(double);
    trial.metrics["sparse_index_bytes"] =
        (nnz + static_cast<double>(cfg.n) + 1.0) * sizeof(Index);
    trial.metrics["dense_weight_bytes"] = n2 * sizeof(double);
    trial.metrics["median_seconds_per_diffuse"] = median;

    if (cfg.n <= 1024) {
        const Matrix dense = to_dense(attention);
        std::vector<double> dense_times;
        for (int r = 0; r < cfg.reps; ++r) {
            const auto t0 = Clock::now();
            Matrix z = v;
            for (int k = 0; k < cfg.diffusion.steps; ++k)
                z = (1.0 - cfg.diffusion.alpha) * (dense * z) + cfg.diffusion.alpha * v;
            sink.swap(z);
            dense_times.push_back(seconds_since(t0));
        }
        std::sort(dense_times.begin(), dense_times.end());
        trial.metrics["dense_median_seconds_per_diffuse"] =
            dense_times[dense_times.size() / 2];
    }
    rep.trials.push_back(std::move(trial));
    rep.working_set_bytes =
        static_cast<std::uint64_t>(nnz) * (sizeof(double) + sizeof(Index));
    rep.finalize_aggregates();
    rep.wall_seconds = seconds_since(start);
    return rep;
}

} // namespace attndiff
