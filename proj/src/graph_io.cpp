#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "attndiff/graph.hpp"

namespace attndiff {

namespace {

using nlohmann::json;

constexpr char kBinaryMagic[8] = {'A', 'T', 'N', 'G', 'R', 'P', 'H', '1'};

json meta_to_json(const GraphMeta& m) {
    return json{{"parts", m.parts},
                {"window", m.window},
                {"global_tokens", m.global_tokens},
                {"random_per_token", m.random_per_token},
                {"blocks_per_row", m.blocks_per_row},
                {"block", m.block},
                {"degree", m.degree},
                {"seed", m.seed},
                {"finalized", m.finalized}};
}

GraphMeta meta_from_json(const json& j) {
    GraphMeta m;
    m.parts = j.value("parts", std::vector<std::string>{});
    m.window = j.value("window", Index{0});
    m.global_tokens = j.value("global_tokens", Index{0});
    m.random_per_token = j.value("random_per_token", Index{0});
    m.blocks_per_row = j.value("blocks_per_row", Index{0});
    m.block = j.value("block", Index{0});
    m.degree = j.value("degree", Index{0});
    m.seed = j.value("seed", std::uint64_t{0});
    m.finalized = j.value("finalized", false);
    return m;
}

void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

std::uint64_t read_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (!is) throw std::runtime_error("graph binary: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

} // namespace

void save_graph_text(const AttentionGraph& g, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    json header{{"n", g.n()}, {"nnz", g.nnz()}, {"meta", meta_to_json(g.meta())}};
    os << header.dump() << '\n';
    for (Index i = 0; i < g.n(); ++i) {
        const auto cols = g.row(i);
        const auto labs = g.row_labels(i);
        for (std::size_t k = 0; k < cols.size(); ++k)
            os << i << ' ' << cols[k] << ' ' << label_name(labs[k]) << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

AttentionGraph load_graph_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("graph text: empty file");
    const json header = json::parse(line);
    const Index n = header.at("n").get<Index>();
    const Index nnz = header.at("nnz").get<Index>();
    GraphMeta meta = meta_from_json(header.value("meta", json::object()));
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(nnz));
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Index r, c;
        std::string lab;
        if (!(ls >> r >> c >> lab))
            throw std::runtime_error("graph text: malformed edge line '" + line + "'");
        edges.push_back({r, c, label_from_name(lab)});
    }
    if (static_cast<Index>(edges.size()) != nnz)
        throw std::runtime_error("graph text: header nnz does not match edge count");
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

void save_graph_binary(const AttentionGraph& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kBinaryMagic, 8);
    write_u64(os, static_cast<std::uint64_t>(g.n()));
    write_u64(os, static_cast<std::uint64_t>(g.nnz()));
    write_u64(os, g.meta().finalized ? 1 : 0);
    for (Index v : g.row_offsets()) write_u64(os, static_cast<std::uint64_t>(v));
    for (Index v : g.col_indices()) write_u64(os, static_cast<std::uint64_t>(v));
    for (EdgeLabel l : g.labels()) os.put(static_cast<char>(l));
    if (!os) throw std::runtime_error("write failed: " + path);
}

AttentionGraph load_graph_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kBinaryMagic, 8) != 0)
        throw std::runtime_error("graph binary: bad magic");
    const Index n = static_cast<Index>(read_u64(is));
    const Index nnz = static_cast<Index>(read_u64(is));
    if (n <= 0 || nnz < 0) throw std::runtime_error("graph binary: bad header");
    const bool finalized = read_u64(is) != 0;
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
    for (auto& v : offsets) v = static_cast<Index>(read_u64(is));
    if (offsets.front() != 0 || offsets.back() != nnz ||
        !std::is_sorted(offsets.begin(), offsets.end()))
        throw std::runtime_error("graph binary: corrupt row offsets");
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(nnz));
    std::vector<Index> cols(static_cast<std::size_t>(nnz));
    for (auto& v : cols) v = static_cast<Index>(read_u64(is));
    for (Index i = 0; i < n; ++i) {
        for (Index k = offsets[static_cast<std::size_t>(i)];
             k < offsets[static_cast<std::size_t>(i) + 1]; ++k)
            edges.push_back({i, cols[static_cast<std::size_t>(k)], EdgeLabel::Random});
    }
    // Labels trail the index data.
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const int c = is.get();
        if (c == EOF) throw std::runtime_error("graph binary: truncated labels");
        edges[k].label = static_cast<EdgeLabel>(c);
    }
    GraphMeta meta;
    meta.finalized = finalized;
    return AttentionGraph::from_edges(n, std::move(edges), std::move(meta));
}

void save_graph(const AttentionGraph& g, const std::string& path, bool binary) {
    if (binary)
        save_graph_binary(g, path);
    else
        save_graph_text(g, path);
}

AttentionGraph load_graph(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8] = {};
    is.read(magic, 8);
    is.close();
    if (std::memcmp(magic, kBinaryMagic, 8) == 0) return load_graph_binary(path);
    return load_graph_text(path);
}

} // namespace attndiff
