#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attndiff/types.hpp"

namespace attndiff {

// Attention type carried by each edge. The numeric order is the merge
// priority: when the same (row, col) pair comes from several generators,
// the smallest value wins, so each edge is attributed to exactly one type.
enum class EdgeLabel : std::uint8_t { Self = 0, Global = 1, Local = 2, Random = 3 };

const char* label_name(EdgeLabel label);
EdgeLabel label_from_name(const std::string& name);

struct Edge {
    Index row;
    Index col;
    EdgeLabel label;
};

// Generator provenance, recorded on every built graph and round-tripped
// through serialization.
struct GraphMeta {
    std::vector<std::string> parts;
    Index window = 0;
    Index global_tokens = 0;
    Index random_per_token = 0;
    Index blocks_per_row = 0;
    Index block = 0;
    Index degree = 0;
    std::uint64_t seed = 0;
    bool finalized = false;
};

// Directed attention graph over n tokens in compressed row form.
// Invariants (checked at construction):
//   - row_offsets has n+1 nondecreasing entries, last = nnz
//   - column indices strictly increasing within each row, all in [0, n)
class AttentionGraph {
  public:
    AttentionGraph() = default;

    // Sorts and deduplicates `edges` (keeping the highest-priority label per
    // (row, col) pair) and validates the CSR invariants.
    static AttentionGraph from_edges(Index n, std::vector<Edge> edges,
                                     GraphMeta meta = {});

    Index n() const { return n_; }
    Index nnz() const { return static_cast<Index>(col_indices_.size()); }

    const std::vector<Index>& row_offsets() const { return row_offsets_; }
    const std::vector<Index>& col_indices() const { return col_indices_; }
    const std::vector<EdgeLabel>& labels() const { return labels_; }

    std::span<const Index> row(Index i) const;
    std::span<const EdgeLabel> row_labels(Index i) const;
    Index degree(Index i) const { return row_offsets_[i + 1] - row_offsets_[i]; }
    bool has_edge(Index i, Index j) const;

    bool finalized() const { return meta_.finalized; }
    const GraphMeta& meta() const { return meta_; }
    GraphMeta& meta() { return meta_; }

    bool operator==(const AttentionGraph& other) const;

  private:
    Index n_ = 0;
    std::vector<Index> row_offsets_{0};
    std::vector<Index> col_indices_;
    std::vector<EdgeLabel> labels_;
    GraphMeta meta_;
};

// --- Pattern builders -------------------------------------------------------

// Sliding window: token i attends to every j with 0 < |i - j| <= w/2,
// clipped at the sequence boundaries. w must be even, 2 <= w < n.
AttentionGraph build_local_window(Index n, Index w);

// g tokens sampled uniformly without replacement become global: full row and
// full column each. nnz = 2*g*n - g^2 before any union dedup.
AttentionGraph build_global(Index n, Index g, std::uint64_t seed);

// Block-style global selection: the first g tokens are global. Used for
// comparisons against token-wise selection.
AttentionGraph build_global_contiguous(Index n, Index g);

// Per token i, r distinct targets j != i sampled uniformly without
// replacement. Directed as generated; nnz = n*r.
AttentionGraph build_random_tokenwise(Index n, Index r, std::uint64_t seed);

// Tokens partitioned into n/block contiguous blocks; each query block picks
// blocks_per_row distinct key blocks (never itself) and attends to every
// token in them.
AttentionGraph build_random_blockwise(Index n, Index blocks_per_row, Index block,
                                      std::uint64_t seed);

// Undirected d-regular simple graph: union of d/2 uniformly random cyclic
// permutations, resampling any permutation that collides with an existing
// edge. Throws after the retry budget is exhausted.
AttentionGraph build_regular_random(Index n, Index d, std::uint64_t seed);

// Classical fixtures for spectral work (no self loops).
AttentionGraph build_complete(Index n);
AttentionGraph build_cycle(Index n);

// Union of edge sets with duplicates removed (label priority
// self > global > local > random). All parts must share n.
AttentionGraph graph_union(Index n, std::span<const AttentionGraph> parts);

// graph_union plus a self loop on every node.
AttentionGraph finalize(Index n, std::span<const AttentionGraph> parts);
AttentionGraph finalize(const AttentionGraph& g);

// Undirected view: edge {i, j} present iff either direction is. Labels carry
// over; conflicts resolved by priority.
AttentionGraph symmetrized(const AttentionGraph& g);

// --- Measurements -----------------------------------------------------------

struct PatternStats {
    Index n = 0;
    Index nnz_total = 0;
    Index nnz_self = 0, nnz_local = 0, nnz_global = 0, nnz_random = 0;
    double pct_total = 0.0;
    double pct_self = 0.0, pct_local = 0.0, pct_global = 0.0, pct_random = 0.0;
};

PatternStats pattern_stats(const AttentionGraph& g);

struct AssumptionReport {
    bool has_all_self_loops = false;
    bool is_connected = false;      // weak connectivity (edges as undirected)
    bool has_identity_chain = false; // (i, i+1) or (i+1, i) for all i < n-1
};

AssumptionReport check_assumption(const AttentionGraph& g);

// --- Serialization ----------------------------------------------------------

// Text form: one JSON header line {n, nnz, meta}, then one `row col label`
// line per edge, rows ascending.
void save_graph_text(const AttentionGraph& g, const std::string& path);
AttentionGraph load_graph_text(const std::string& path);

// Compact binary form (little-endian u64 offsets/indices, u8 labels).
void save_graph_binary(const AttentionGraph& g, const std::string& path);
AttentionGraph load_graph_binary(const std::string& path);

// Dispatch on file magic / first byte.
void save_graph(const AttentionGraph& g, const std::string& path, bool binary = false);
AttentionGraph load_graph(const std::string& path);

// Dense {0,1} adjacency of the pattern.
Matrix adjacency_dense(const AttentionGraph& g);

} // namespace attndiff
