#include "attndiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_set>

#include "attndiff/rng.hpp"

namespace attndiff {

const char* label_name(EdgeLabel label) {
    switch (label) {
        case EdgeLabel::Self: return "self";
        case EdgeLabel::Global: return "global";
        case EdgeLabel::Local: return "local";
        case EdgeLabel::Random: return "random";
    }
    throw std::invalid_argument("label_name: unknown label");
}

EdgeLabel label_from_name(const std::string& name) {
    if (name == "self") return EdgeLabel::Self;
    if (name == "global") return EdgeLabel::Global;
    if (name == "local") return EdgeLabel::Local;
    if (name == "random") return EdgeLabel::Random;
    throw std::invalid_argument("label_from_name: unknown label '" + name + "'");
}

AttentionGraph AttentionGraph::from_edges(Index n, std::vector<Edge> edges,
                                          GraphMeta meta) {
    if (n <= 0) throw std::invalid_argument("AttentionGraph: n must be positive");
    for (const Edge& e : edges) {
        if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
            throw std::invalid_argument("AttentionGraph: edge index out of range");
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.row != b.row) return a.row < b.row;
        if (a.col != b.col) return a.col < b.col;
        return a.label < b.label;
    });
    AttentionGraph g;
    g.n_ = n;
    g.meta_ = std::move(meta);
    g.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    g.col_indices_.reserve(edges.size());
    g.labels_.reserve(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (k > 0 && edges[k].row == edges[k - 1].row && edges[k].col == edges[k - 1].col)
            continue; // duplicate; the first (highest-priority) label stands
        g.col_indices_.push_back(edges[k].col);
        g.labels_.push_back(edges[k].label);
        g.row_offsets_[static_cast<std::size_t>(edges[k].row) + 1]++;
    }
    for (Index i = 0; i < n; ++i)
        g.row_offsets_[static_cast<std::size_t>(i) + 1] += g.row_offsets_[static_cast<std::size_t>(i)];
    return g;
}

std::span<const Index> AttentionGraph::row(Index i) const {
    const auto begin = static_cast<std::size_t>(row_offsets_[i]);
    const auto end = static_cast<std::size_t>(row_offsets_[i + 1]);
    return {col_indices_.data() + begin, end - begin};
}

std::span<const EdgeLabel> AttentionGraph::row_labels(Index i) const {
    const auto begin = static_cast<std::size_t>(row_offsets_[i]);
    const auto end = static_cast<std::size_t>(row_offsets_[i + 1]);
    return {labels_.data() + begin, end - begin};
}

bool AttentionGraph::has_edge(Index i, Index j) const {
    const auto r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
}

bool AttentionGraph::operator==(const AttentionGraph& other) const {
    return n_ == other.n_ && row_offsets_ == other.row_offsets_ &&
           col_indices_ == other.col_indices_ && labels_ == other.labels_;
}

AttentionGraph build_local_window(Index n, Index w) {
    if (n <= 0) throw std::invalid_argument("build_local_window: n must be positive");
    if (w < 2 || w % 2 != 0)
        throw std::invalid_argument("build_local_window: w must be even and >= 2");
    if (w >= n) throw std::invalid_argument("build_local_window: w must be < n");
    const Index half = w / 2;
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(w));
    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - half);
        const Index hi = std::min<Index>(n - 1, i + half);
        for (Index j = lo; j <= hi; ++j)
            if (j != i) edges.push_back({i, j, EdgeLabel::Local});
    }
    GraphMeta meta;
    meta.parts = {"local"};
    meta.window = w;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph build_global(Index n, Index g, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("build_global: n must be positive");
    if (g < 0 || g > n) throw std::invalid_argument("build_global: need 0 <= g <= n");
    Rng rng(seed);
    const std::vector<Index> globals = rng.sample_without_replacement(n, g);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(2 * g * n));
    for (Index t : globals) {
        for (Index j = 0; j < n; ++j) {
            edges.push_back({t, j, EdgeLabel::Global});
            edges.push_back({j, t, EdgeLabel::Global});
        }
    }
    GraphMeta meta;
    meta.parts = {"global"};
    meta.global_tokens = g;
    meta.seed = seed;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph build_global_contiguous(Index n, Index g) {
    if (n <= 0) throw std::invalid_argument("build_global_contiguous: n must be positive");
    if (g < 0 || g > n) throw std::invalid_argument("build_global_contiguous: need 0 <= g <= n");
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(2 * g * n));
    for (Index t = 0; t < g; ++t) {
        for (Index j = 0; j < n; ++j) {
            edges.push_back({t, j, EdgeLabel::Global});
            edges.push_back({j, t, EdgeLabel::Global});
        }
    }
    GraphMeta meta;
    meta.parts = {"global-contiguous"};
    meta.global_tokens = g;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph build_random_tokenwise(Index n, Index r, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("build_random_tokenwise: n must be positive");
    if (r < 0 || r >= n) throw std::invalid_argument("build_random_tokenwise: need 0 <= r < n");
    Rng rng(seed);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(r));
    for (Index i = 0; i < n; ++i) {
        // Sample r values from [0, n-1) and skip over i to keep j != i.
        for (Index x : rng.sample_without_replacement(n - 1, r)) {
            const Index j = x >= i ? x + 1 : x;
            edges.push_back({i, j, EdgeLabel::Random});
        }
    }
    GraphMeta meta;
    meta.parts = {"random"};
    meta.random_per_token = r;
    meta.seed = seed;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph build_random_blockwise(Index n, Index blocks_per_row, Index block,
                                      std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("build_random_blockwise: n must be positive");
    if (block <= 0 || n % block != 0)
        throw std::invalid_argument("build_random_blockwise: block must divide n");
    const Index num_blocks = n / block;
    if (blocks_per_row < 0 || blocks_per_row >= num_blocks)
        throw std::invalid_argument(
            "build_random_blockwise: need 0 <= blocks_per_row < n/block");
    Rng rng(seed);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(num_blocks * blocks_per_row * block * block));
    for (Index qb = 0; qb < num_blocks; ++qb) {
        // Key blocks sampled among the other blocks; block size 1 then
        // degenerates to the token-wise generator.
        for (Index x : rng.sample_without_replacement(num_blocks - 1, blocks_per_row)) {
            const Index kb = x >= qb ? x + 1 : x;
            for (Index i = qb * block; i < (qb + 1) * block; ++i)
                for (Index j = kb * block; j < (kb + 1) * block; ++j)
                    edges.push_back({i, j, EdgeLabel::Random});
        }
    }
    GraphMeta meta;
    meta.parts = {"random-block"};
    meta.blocks_per_row = blocks_per_row;
    meta.block = block;
    meta.seed = seed;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

namespace {

// Repairs a candidate cycle in place so that none of its edges collides with
// `seen`. Only transpositions whose four affected edges are all collision-free
// are accepted, so each accepted swap strictly reduces the collision count and
// the cycle stays a single n-cycle. Returns false if some collision cannot be
// cleared within the per-edge try budget.
bool repair_cycle(std::vector<Index>& cycle, const std::unordered_set<std::uint64_t>& seen,
                  Rng& rng, const std::function<std::uint64_t(Index, Index)>& key) {
    const Index n = static_cast<Index>(cycle.size());
    auto edge_ok = [&](Index a, Index b) { return !seen.count(key(cycle[a], cycle[b])); };
    auto pos = [n](Index p) { return static_cast<std::size_t>((p % n + n) % n); };

    for (int pass = 0; pass < 64; ++pass) {
        std::vector<Index> colliding;
        for (Index i = 0; i < n; ++i)
            if (!edge_ok(pos(i), pos(i + 1))) colliding.push_back(i);
        if (colliding.empty()) return true;

        bool progressed = false;
        for (Index i : colliding) {
            if (edge_ok(pos(i), pos(i + 1))) continue; // fixed by an earlier swap
            const Index p = static_cast<Index>(pos(i + 1));
            bool fixed = false;
            for (int t = 0; t < 64 && !fixed; ++t) {
                const Index j = static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(n)));
                if (j == p) continue;
                std::swap(cycle[static_cast<std::size_t>(p)], cycle[static_cast<std::size_t>(j)]);
                const bool clear = edge_ok(pos(p - 1), pos(p)) && edge_ok(pos(p), pos(p + 1)) &&
                                   edge_ok(pos(j - 1), pos(j)) && edge_ok(pos(j), pos(j + 1));
                if (clear)
                    fixed = true;
                else
                    std::swap(cycle[static_cast<std::size_t>(p)],
                              cycle[static_cast<std::size_t>(j)]);
            }
            progressed = progressed || fixed;
        }
        if (!progressed) return false;
    }
    return false;
}

} // namespace

AttentionGraph build_regular_random(Index n, Index d, std::uint64_t seed) {
    if (d < 2 || d % 2 != 0)
        throw std::invalid_argument("build_regular_random: d must be even and >= 2");
    if (d >= n) throw std::invalid_argument("build_regular_random: d must be < n");
    Rng rng(seed);
    const int retry_budget = 64;
    auto key = [n](Index u, Index v) {
        return static_cast<std::uint64_t>(std::min(u, v)) * static_cast<std::uint64_t>(n) +
               static_cast<std::uint64_t>(std::max(u, v));
    };
    std::unordered_set<std::uint64_t> seen;
    std::vector<Edge> edges;
    for (Index round = 0; round < d / 2; ++round) {
        int attempts = 0;
        for (;;) {
            if (++attempts > retry_budget)
                throw std::runtime_error(
                    "build_regular_random: retry budget exhausted (seed " +
                    std::to_string(seed) + ")");
            std::vector<Index> cycle = rng.permutation(n);
            if (!repair_cycle(cycle, seen, rng, key)) continue;
            // A cycle over distinct vertices repeats no unordered pair, so
            // only cross-round collisions needed clearing.
            for (Index k = 0; k < n; ++k) {
                const Index u = cycle[static_cast<std::size_t>(k)];
                const Index v = cycle[static_cast<std::size_t>((k + 1) % n)];
                seen.insert(key(u, v));
                edges.push_back({u, v, EdgeLabel::Random});
                edges.push_back({v, u, EdgeLabel::Random});
            }
            break;
        }
    }
    GraphMeta meta;
    meta.parts = {"regular"};
    meta.degree = d;
    meta.seed = seed;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph build_complete(Index n) {
    if (n <= 0) throw std::invalid_argument("build_complete: n must be positive");
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) edges.push_back({i, j, EdgeLabel::Global});
    GraphMeta meta;
    meta.parts = {"complete"};
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph build_cycle(Index n) {
    if (n < 3) throw std::invalid_argument("build_cycle: n must be >= 3");
    std::vector<Edge> edges;
    for (Index i = 0; i < n; ++i) {
        const Index j = (i + 1) % n;
        edges.push_back({i, j, EdgeLabel::Local});
        edges.push_back({j, i, EdgeLabel::Local});
    }
    GraphMeta meta;
    meta.parts = {"cycle"};
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

namespace {

GraphMeta merged_meta(Index /*n*/, std::span<const AttentionGraph> parts) {
    GraphMeta meta;
    for (const AttentionGraph& p : parts) {
        const GraphMeta& m = p.meta();
        meta.parts.insert(meta.parts.end(), m.parts.begin(), m.parts.end());
        meta.window = std::max(meta.window, m.window);
        meta.global_tokens = std::max(meta.global_tokens, m.global_tokens);
        meta.random_per_token = std::max(meta.random_per_token, m.random_per_token);
        meta.blocks_per_row = std::max(meta.blocks_per_row, m.blocks_per_row);
        meta.block = std::max(meta.block, m.block);
        meta.degree = std::max(meta.degree, m.degree);
        if (m.seed != 0 && meta.seed == 0) meta.seed = m.seed;
    }
    return meta;
}

std::vector<Edge> collect_edges(Index n, std::span<const AttentionGraph> parts) {
    std::vector<Edge> edges;
    for (const AttentionGraph& p : parts) {
        if (p.n() != n) throw std::invalid_argument("graph union: mismatched n");
        for (Index i = 0; i < n; ++i) {
            const auto cols = p.row(i);
            const auto labs = p.row_labels(i);
            for (std::size_t k = 0; k < cols.size(); ++k)
                edges.push_back({i, cols[k], labs[k]});
        }
    }
    return edges;
}

} // namespace

AttentionGraph graph_union(Index n, std::span<const AttentionGraph> parts) {
    std::vector<Edge> edges = collect_edges(n, parts);
    return AttentionGraph::from_edges(n, std::move(edges), merged_meta(n, parts));
}

AttentionGraph finalize(Index n, std::span<const AttentionGraph> parts) {
    std::vector<Edge> edges = collect_edges(n, parts);
    for (Index i = 0; i < n; ++i) edges.push_back({i, i, EdgeLabel::Self});
    GraphMeta meta = merged_meta(n, parts);
    meta.finalized = true;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

AttentionGraph finalize(const AttentionGraph& g) {
    return finalize(g.n(), std::span<const AttentionGraph>(&g, 1));
}

AttentionGraph symmetrized(const AttentionGraph& g) {
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(2 * g.nnz()));
    for (Index i = 0; i < g.n(); ++i) {
        const auto cols = g.row(i);
        const auto labs = g.row_labels(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            edges.push_back({i, cols[k], labs[k]});
            edges.push_back({cols[k], i, labs[k]});
        }
    }
    GraphMeta meta = g.meta();
    meta.parts.push_back("symmetrized");
    return AttentionGraph::from_edges(g.n(), std::move(edges), std::move(meta));
}

PatternStats pattern_stats(const AttentionGraph& g) {
    PatternStats s;
    s.n = g.n();
    s.nnz_total = g.nnz();
    for (EdgeLabel l : g.labels()) {
        switch (l) {
            case EdgeLabel::Self: ++s.nnz_self; break;
            case EdgeLabel::Local: ++s.nnz_local; break;
            case EdgeLabel::Global: ++s.nnz_global; break;
            case EdgeLabel::Random: ++s.nnz_random; break;
        }
    }
    const double denom = static_cast<double>(g.n()) * static_cast<double>(g.n());
    s.pct_total = 100.0 * static_cast<double>(s.nnz_total) / denom;
    s.pct_self = 100.0 * static_cast<double>(s.nnz_self) / denom;
    s.pct_local = 100.0 * static_cast<double>(s.nnz_local) / denom;
    s.pct_global = 100.0 * static_cast<double>(s.nnz_global) / denom;
    s.pct_random = 100.0 * static_cast<double>(s.nnz_random) / denom;
    return s;
}

AssumptionReport check_assumption(const AttentionGraph& g) {
    AssumptionReport rep;
    const Index n = g.n();

    rep.has_all_self_loops = true;
    for (Index i = 0; i < n && rep.has_all_self_loops; ++i)
        if (!g.has_edge(i, i)) rep.has_all_self_loops = false;

    rep.has_identity_chain = true;
    for (Index i = 0; i + 1 < n && rep.has_identity_chain; ++i)
        if (!g.has_edge(i, i + 1) && !g.has_edge(i + 1, i)) rep.has_identity_chain = false;

    // BFS over the undirected view.
    const AttentionGraph sym = symmetrized(g);
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<Index> queue{0};
    visited[0] = 1;
    Index count = 1;
    while (!queue.empty()) {
        const Index u = queue.back();
        queue.pop_back();
        for (Index v : sym.row(u)) {
            if (!visited[static_cast<std::size_t>(v)]) {
                visited[static_cast<std::size_t>(v)] = 1;
                ++count;
                queue.push_back(v);
            }
        }
    }
    rep.is_connected = (count == n);
    return rep;
}

Matrix adjacency_dense(const AttentionGraph& g) {
    Matrix a = Matrix::Zero(g.n(), g.n());
    for (Index i = 0; i < g.n(); ++i)
        for (Index j : g.row(i)) a(i, j) = 1.0;
    return a;
}

} // namespace attndiff
