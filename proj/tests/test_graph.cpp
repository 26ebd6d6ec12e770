#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "attndiff/graph.hpp"
#include "oracles.hpp"

using namespace attndiff;

namespace {

std::vector<Index> row_vec(const AttentionGraph& g, Index i) {
    const auto r = g.row(i);
    return {r.begin(), r.end()};
}

} // namespace

TEST_CASE("local window: small cases match enumeration") {
    const AttentionGraph g = build_local_window(8, 4);
    CHECK(row_vec(g, 3) == std::vector<Index>{1, 2, 4, 5});
    CHECK(g.nnz() == 26);

    const AttentionGraph chain = build_local_window(3, 2);
    CHECK(row_vec(chain, 0) == std::vector<Index>{1});
    CHECK(row_vec(chain, 1) == std::vector<Index>{0, 2});
    CHECK(row_vec(chain, 2) == std::vector<Index>{1});
    CHECK(chain.nnz() == 4);

    // Symmetric by construction.
    for (Index i = 0; i < 8; ++i)
        for (Index j : g.row(i)) CHECK(g.has_edge(j, i));
}

TEST_CASE("local window: large case degree and closed-form count") {
    const AttentionGraph g = build_local_window(4096, 64);
    for (Index i : {Index{32}, Index{100}, Index{2048}, Index{4063}})
        CHECK(g.degree(i) == 64); // interior tokens
    CHECK(g.degree(0) == 32);
    // nnz = (w/2)(2n - w/2 - 1)
    CHECK(g.nnz() == 32 * (2 * 4096 - 32 - 1));
    CHECK(g.nnz() == 261088);

    auto mask = oracle::empty_mask(4096);
    oracle::mark_local_window(mask, 4096, 64);
    CHECK(oracle::count(mask) == g.nnz());
}

TEST_CASE("local window: rejects bad parameters") {
    CHECK_THROWS_AS(build_local_window(8, 3), std::invalid_argument);  // odd
    CHECK_THROWS_AS(build_local_window(8, 8), std::invalid_argument);  // w >= n
    CHECK_THROWS_AS(build_local_window(0, 2), std::invalid_argument);  // empty
    CHECK_THROWS_AS(build_local_window(8, 0), std::invalid_argument);
}

TEST_CASE("global: edge count formula 2gn - g^2") {
    CHECK(build_global(16, 2, 7).nnz() == 2 * 2 * 16 - 4);
    CHECK(build_global(16, 0, 0).nnz() == 0);
    CHECK(build_global(16, 16, 5).nnz() == 256);
    CHECK_THROWS_AS(build_global(16, 17, 0), std::invalid_argument);

    const AttentionGraph g = build_global(64, 5, 123);
    auto mask = oracle::empty_mask(64);
    oracle::mark_global(mask, 64, 5, 123);
    CHECK(oracle::equals_graph(mask, g));
    CHECK(g.nnz() == 2 * 5 * 64 - 25);
}

TEST_CASE("random token-wise: per-row degree and exclusion of the diagonal") {
    const AttentionGraph g = build_random_tokenwise(1024, 20, 1);
    CHECK(g.nnz() == 1024 * 20);
    for (Index i = 0; i < 1024; ++i) CHECK(!g.has_edge(i, i));

    CHECK(build_random_tokenwise(8, 0, 0).nnz() == 0);

    // r = n-1 exhausts the targets for any seed.
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        const AttentionGraph full = build_random_tokenwise(8, 7, seed);
        for (Index i = 0; i < 8; ++i) {
            CHECK(full.degree(i) == 7);
            CHECK(!full.has_edge(i, i));
        }
    }
    CHECK_THROWS_AS(build_random_tokenwise(8, 8, 0), std::invalid_argument);
}

TEST_CASE("random block-wise: block product count and degeneration to token-wise") {
    CHECK(build_random_blockwise(16, 1, 4, 3).nnz() == (16 / 4) * 1 * 16);
    CHECK(build_random_blockwise(16, 0, 4, 0).nnz() == 0);
    CHECK_THROWS_AS(build_random_blockwise(16, 1, 5, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_random_blockwise(16, 4, 4, 0), std::invalid_argument);

    // block = 1 behaves like the token-wise generator: degree 1, no self edge.
    const AttentionGraph g = build_random_blockwise(8, 1, 1, 5);
    CHECK(g.nnz() == 8);
    for (Index i = 0; i < 8; ++i) {
        CHECK(g.degree(i) == 1);
        CHECK(!g.has_edge(i, i));
    }
}

TEST_CASE("regular random: exactly d-regular, simple, symmetric") {
    const AttentionGraph g = build_regular_random(64, 8, 2);
    CHECK(g.nnz() == 64 * 8);
    for (Index i = 0; i < 64; ++i) {
        CHECK(g.degree(i) == 8);
        CHECK(!g.has_edge(i, i));
        for (Index j : g.row(i)) CHECK(g.has_edge(j, i));
    }

    const AttentionGraph small = build_regular_random(4, 2, 0);
    for (Index i = 0; i < 4; ++i) CHECK(small.degree(i) == 2);
    CHECK(check_assumption(finalize(small)).is_connected);

    CHECK(check_assumption(finalize(build_regular_random(256, 16, 9))).is_connected);

    CHECK_THROWS_AS(build_regular_random(64, 7, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_regular_random(4, 4, 0), std::invalid_argument);
}

TEST_CASE("union and finalize: dedup, self loops, label priority") {
    const AttentionGraph local = build_local_window(8, 4);
    CHECK(finalize(local).nnz() == 26 + 8);

    const AttentionGraph identity = finalize(5, {});
    CHECK(identity.nnz() == 5);
    for (Index i = 0; i < 5; ++i) CHECK(row_vec(identity, i) == std::vector<Index>{i});

    std::vector<AttentionGraph> parts;
    parts.push_back(build_global(16, 16, 5));
    parts.push_back(build_local_window(16, 4));
    const AttentionGraph merged = graph_union(16, parts);
    CHECK(merged.nnz() == 256);

    // Priority: global beats local on shared edges, self beats both.
    const AttentionGraph fin = finalize(16, parts);
    CHECK(fin.nnz() == 256);
    for (Index i = 0; i < 16; ++i) {
        const auto cols = fin.row(i);
        const auto labs = fin.row_labels(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i)
                CHECK(labs[k] == EdgeLabel::Self);
            else
                CHECK(labs[k] == EdgeLabel::Global);
        }
    }

    std::vector<AttentionGraph> mismatched;
    mismatched.push_back(build_local_window(8, 4));
    mismatched.push_back(build_local_window(16, 4));
    CHECK_THROWS_AS(graph_union(8, mismatched), std::invalid_argument);
}

TEST_CASE("pattern stats: exact counts and percentages") {
    const PatternStats complete = pattern_stats(finalize(build_complete(64)));
    CHECK(complete.pct_total == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(complete.nnz_total == 64 * 64);

    const AttentionGraph g = finalize(build_local_window(4096, 64));
    const PatternStats s = pattern_stats(g);
    CHECK(s.nnz_total == 261088 + 4096);
    CHECK(s.nnz_self == 4096);
    CHECK(s.nnz_local == 261088);
    CHECK(s.pct_total ==
          doctest::Approx(100.0 * 265184.0 / (4096.0 * 4096.0)).epsilon(1e-12));
    CHECK(s.pct_total == doctest::Approx(1.58062).epsilon(1e-4));
    CHECK(s.nnz_total == s.nnz_self + s.nnz_local + s.nnz_global + s.nnz_random);
    CHECK(s.pct_total ==
          doctest::Approx(s.pct_self + s.pct_local + s.pct_global + s.pct_random)
              .epsilon(1e-12));
}

TEST_CASE("pattern stats: report carries all four type columns") {
    std::vector<AttentionGraph> parts;
    parts.push_back(build_local_window(256, 8));
    parts.push_back(build_global(256, 4, 3));
    parts.push_back(build_random_tokenwise(256, 4, 4));
    const PatternStats s = pattern_stats(finalize(256, parts));
    CHECK(s.nnz_self == 256);
    CHECK(s.nnz_local > 0);
    CHECK(s.nnz_global > 0);
    CHECK(s.nnz_random > 0);
    CHECK(s.nnz_total == s.nnz_self + s.nnz_local + s.nnz_global + s.nnz_random);
}

TEST_CASE("assumption check: window, identity-only, sparse random") {
    const AssumptionReport local = check_assumption(finalize(build_local_window(8, 4)));
    CHECK(local.has_all_self_loops);
    CHECK(local.is_connected);
    CHECK(local.has_identity_chain);

    const AssumptionReport iso = check_assumption(finalize(4, {}));
    CHECK(iso.has_all_self_loops);
    CHECK(!iso.is_connected);
    CHECK(!iso.has_identity_chain);

    const AssumptionReport sparse =
        check_assumption(finalize(build_random_tokenwise(64, 1, 11)));
    CHECK(sparse.has_all_self_loops);
    CHECK(!sparse.has_identity_chain);
    // Connectivity is whatever BFS says; the identity chain would imply it.
    if (sparse.has_identity_chain) CHECK(sparse.is_connected);
}

TEST_CASE("oracle equivalence: every builder matches its dense reconstruction") {
    for (const std::uint64_t seed : {0ull, 1ull, 42ull}) {
        for (const Index n : {Index{32}, Index{101}, Index{256}}) {
            auto mask = oracle::empty_mask(n);
            oracle::mark_local_window(mask, n, 8);
            CHECK(oracle::equals_graph(mask, build_local_window(n, 8)));

            mask = oracle::empty_mask(n);
            oracle::mark_global(mask, n, 7, seed);
            CHECK(oracle::equals_graph(mask, build_global(n, 7, seed)));

            mask = oracle::empty_mask(n);
            oracle::mark_random_tokenwise(mask, n, 5, seed);
            CHECK(oracle::equals_graph(mask, build_random_tokenwise(n, 5, seed)));
        }
        // Block-wise needs block | n.
        auto mask = oracle::empty_mask(128);
        oracle::mark_random_blockwise(mask, 128, 3, 8, seed);
        CHECK(oracle::equals_graph(mask, build_random_blockwise(128, 3, 8, seed)));

        // Combined, finalized pattern: dense union is a plain OR.
        const Index n = 128;
        auto combo = oracle::empty_mask(n);
        oracle::mark_local_window(combo, n, 8);
        oracle::mark_global(combo, n, 4, derive_seed(seed, "global"));
        oracle::mark_random_tokenwise(combo, n, 4, derive_seed(seed, "random"));
        oracle::mark_self_loops(combo, n);
        std::vector<AttentionGraph> parts;
        parts.push_back(build_local_window(n, 8));
        parts.push_back(build_global(n, 4, derive_seed(seed, "global")));
        parts.push_back(build_random_tokenwise(n, 4, derive_seed(seed, "random")));
        const AttentionGraph g = finalize(n, parts);
        CHECK(oracle::equals_graph(combo, g));
        CHECK(pattern_stats(g).nnz_total == oracle::count(combo));
    }
}

TEST_CASE("local window: doubling n halves the density up to boundary terms") {
    const Index w = 16;
    double prev_pct = -1.0;
    for (Index n : {Index{128}, Index{256}, Index{512}, Index{1024}}) {
        const PatternStats s = pattern_stats(finalize(build_local_window(n, w)));
        if (prev_pct > 0.0) {
            const double ratio = s.pct_total / prev_pct;
            CHECK(ratio < 0.5 + static_cast<double>(w) / static_cast<double>(n));
            CHECK(ratio > 0.5 - static_cast<double>(w) / static_cast<double>(n));
        }
        prev_pct = s.pct_total;
    }
}

TEST_CASE("from_edges enforces CSR invariants") {
    CHECK_THROWS_AS(AttentionGraph::from_edges(4, {{0, 4, EdgeLabel::Local}}),
                    std::invalid_argument); // col out of range
    CHECK_THROWS_AS(AttentionGraph::from_edges(4, {{-1, 0, EdgeLabel::Local}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(AttentionGraph::from_edges(0, {}), std::invalid_argument);

    // Duplicates collapse to one edge with the strongest label.
    const AttentionGraph g = AttentionGraph::from_edges(
        3, {{0, 1, EdgeLabel::Random}, {0, 1, EdgeLabel::Local},
            {0, 1, EdgeLabel::Global}});
    CHECK(g.nnz() == 1);
    CHECK(g.row_labels(0)[0] == EdgeLabel::Global);

    // Row offsets are nondecreasing with last = nnz; cols strictly increase.
    std::vector<AttentionGraph> parts;
    parts.push_back(build_local_window(32, 6));
    parts.push_back(build_random_tokenwise(32, 4, 5));
    const AttentionGraph merged = finalize(32, parts);
    CHECK(merged.row_offsets().size() == 33);
    CHECK(merged.row_offsets().front() == 0);
    CHECK(merged.row_offsets().back() == merged.nnz());
    for (Index i = 0; i < 32; ++i) {
        const auto r = merged.row(i);
        for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k - 1] < r[k]);
    }
}

TEST_CASE("builders are deterministic in the seed") {
    CHECK(build_global(64, 9, 7) == build_global(64, 9, 7));
    CHECK(build_random_tokenwise(64, 9, 7) == build_random_tokenwise(64, 9, 7));
    CHECK(build_random_blockwise(64, 2, 8, 7) == build_random_blockwise(64, 2, 8, 7));
    CHECK(build_regular_random(64, 6, 7) == build_regular_random(64, 6, 7));
    CHECK(!(build_random_tokenwise(64, 9, 7) == build_random_tokenwise(64, 9, 8)));
}

TEST_CASE("graph serialization: text and binary round-trips") {
    std::vector<AttentionGraph> parts;
    parts.push_back(build_local_window(48, 6));
    parts.push_back(build_global(48, 3, 2));
    parts.push_back(build_random_tokenwise(48, 4, 5));
    const AttentionGraph g = finalize(48, parts);

    const auto dir = std::filesystem::temp_directory_path() / "attndiff_graph_io";
    std::filesystem::create_directories(dir);
    const std::string text_path = (dir / "g.json").string();
    const std::string bin_path = (dir / "g.bin").string();

    save_graph_text(g, text_path);
    const AttentionGraph from_text = load_graph_text(text_path);
    CHECK(from_text == g);
    CHECK(from_text.finalized() == g.finalized());
    CHECK(from_text.meta().window == 6);

    save_graph_binary(g, bin_path);
    const AttentionGraph from_bin = load_graph_binary(bin_path);
    CHECK(from_bin == g);
    for (Index i = 0; i < g.n(); ++i) {
        const auto a = from_bin.row_labels(i);
        const auto b = g.row_labels(i);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }

    // load_graph dispatches on content.
    CHECK(load_graph(text_path) == g);
    CHECK(load_graph(bin_path) == g);
    std::filesystem::remove_all(dir);
}
