#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attndiff/diffusion.hpp"
#include "attndiff/graph.hpp"

namespace attndiff {

// Declarative pattern description shared by the CLI and the experiment
// configs. Any combination of parts may be enabled; the result is their
// union, finalized with self loops unless disabled.
struct PatternSpec {
    Index local_window = 0;      // 0 = off
    Index global_tokens = 0;     // 0 = off
    bool global_contiguous = false;
    Index random_per_token = 0;  // token-wise random, 0 = off
    Index random_blocks_per_row = 0; // block-wise random, 0 = off
    Index random_block = 0;
    Index regular_degree = 0;    // d-regular fixture, 0 = off
    bool complete = false;
    bool cycle = false;
    bool self_loops = true;

    static PatternSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Builds the union of the enabled parts. Sub-seeds are derived from the root
// seed per part so enabling one part never reshuffles another.
AttentionGraph build_pattern(const PatternSpec& spec, Index n, std::uint64_t seed);

struct TrialRecord {
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;
};

struct ExperimentReport {
    std::string experiment;
    nlohmann::json parameters;
    std::vector<TrialRecord> trials;
    std::map<std::string, double> aggregate_mean;
    std::map<std::string, double> aggregate_min;
    std::map<std::string, double> aggregate_max;
    double wall_seconds = 0.0;
    std::uint64_t working_set_bytes = 0; // nnz-derived estimate

    void finalize_aggregates();
    nlohmann::json to_json() const;
};

// --- Roll robustness ---------------------------------------------------------

struct RollConfig {
    Index n = 256;
    Index d = 8;
    Index heads = 2;
    Index head_dim = 4;
    Index ffn_dim = 16;
    PatternSpec pattern;
    DiffusionConfig diffusion;
    std::vector<Index> shifts{1, 7, 64};
    std::vector<std::uint64_t> seeds{0};
};

// Circular row shift: out[(i + s) mod n] = in[i].
Matrix roll_rows(const MatrixView& x, Index shift);

// For each shift s: || roll(layer(X), s) - layer(roll(X, s)) ||_F / || layer(X) ||_F.
// Metrics keyed "shift_<s>".
ExperimentReport roll_robustness(const RollConfig& cfg);

// --- Pattern spectra ----------------------------------------------------------

struct SpectraCompareConfig {
    Index n = 512;
    struct Entry {
        std::string name;
        PatternSpec pattern;
    };
    std::vector<Entry> configs;
    std::vector<std::uint64_t> seeds{0};
};

struct SpectrumSummary {
    std::string name;
    std::uint64_t seed = 0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda_n1 = 0.0, lambda_n = 0.0;
    std::string csv_path;
};

// Writes one `index,eigenvalue` CSV per (config, seed) under out_dir and
// returns the marked eigenvalues per curve.
std::vector<SpectrumSummary> pattern_spectra_compare(const SpectraCompareConfig& cfg,
                                                     const std::string& out_dir);

// --- Storage / timing bench ---------------------------------------------------

struct BenchConfig {
    Index n = 1024;
    Index value_dim = 64;
    int reps = 5;
    PatternSpec pattern;
    DiffusionConfig diffusion;
    std::uint64_t seed = 0;
};

// Reports nnz, attention storage bytes (sparse vs dense), the exact storage
// ratio nnz/n^2, and the median wall time of a diffuse call. A dense-storage
// baseline timing is included when n <= 1024.
ExperimentReport bench(const BenchConfig& cfg);

} // namespace attndiff
