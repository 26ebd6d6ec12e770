#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "attndiff/graph.hpp"
#include "attndiff/matrix_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string binary_path() {
    if (const char* env = std::getenv("ATTNDIFF_BIN")) return env;
    return ATTNDIFF_BIN_PATH;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& err_file) {
    const std::string cmd =
        binary_path() + " " + args + " 2>" + err_file.string();
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (size_t got = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream es(err_file);
    std::stringstream ss;
    ss << es.rdbuf();
    r.err = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("attndiff_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string s(const std::string& sub) const { return (path / sub).string(); }
};

} // namespace

TEST_CASE("cli: pattern run writes graph + stats and brute count matches") {
    TempDir dir("pattern");
    const auto r = run_cli("--out-dir " + dir.s("run") +
                               " --seed 0 pattern --n 1024 --pattern local,global,random"
                               " --window 64 --global-tokens 64 --random-per-token 64"
                               " --out " + dir.s("g.json"),
                           dir.path / "err.txt");
    CHECK(r.exit_code == 0);
    const json stats = json::parse(r.out);

    const attndiff::AttentionGraph g = attndiff::load_graph(dir.s("g.json"));
    CHECK(g.n() == 1024);
    CHECK(g.finalized());
    CHECK(stats.at("nnz_total").get<attndiff::Index>() == g.nnz());
    // Brute force: count distinct marked entries densely.
    std::vector<char> mask(1024 * 1024, 0);
    attndiff::Index dense_count = 0;
    for (attndiff::Index i = 0; i < g.n(); ++i)
        for (attndiff::Index j : g.row(i)) {
            if (!mask[static_cast<std::size_t>(i * 1024 + j)]) ++dense_count;
            mask[static_cast<std::size_t>(i * 1024 + j)] = 1;
        }
    CHECK(dense_count == g.nnz());
    // Manifest echoes the resolved configuration.
    const json manifest = json::parse(slurp(dir.path / "run" / "manifest.json"));
    CHECK(manifest.at("subcommand") == "pattern");
    CHECK(manifest.at("seed") == 0);
    CHECK(manifest.at("config").at("n") == 1024);
}

TEST_CASE("cli: diffuse with alpha=1 returns the input values") {
    TempDir dir("diffuse");
    REQUIRE(run_cli("--out-dir " + dir.s("run") + " pattern --n 8 --pattern local"
                        " --window 4 --out " + dir.s("g.json"),
                    dir.path / "e1").exit_code == 0);
    const attndiff::Matrix v = [&] {
        attndiff::Matrix m(8, 2);
        for (attndiff::Index i = 0; i < 8; ++i) {
            m(i, 0) = static_cast<double>(i) * 0.25 - 1.0;
            m(i, 1) = 1.0 / static_cast<double>(i + 1);
        }
        return m;
    }();
    attndiff::save_matrix_csv(v, dir.s("v.csv"));
    const auto r = run_cli("--out-dir " + dir.s("run") + " diffuse --graph " +
                               dir.s("g.json") + " --values " + dir.s("v.csv") +
                               " --alpha 1.0 --steps 5 --out " + dir.s("out.csv"),
                           dir.path / "e2");
    CHECK(r.exit_code == 0);
    const attndiff::Matrix out = attndiff::load_matrix_csv(dir.s("out.csv"));
    CHECK((out - v).cwiseAbs().maxCoeff() == 0.0);
    const json report = json::parse(r.out);
    CHECK(report.at("residual_mass") == 0.0);
}

TEST_CASE("cli: cheeger on the 4-cycle prints h = 1 within its bounds") {
    TempDir dir("cheeger");
    REQUIRE(run_cli("--out-dir " + dir.s("run") + " pattern --n 4 --pattern cycle"
                        " --out " + dir.s("c4.json"),
                    dir.path / "e1").exit_code == 0);
    const auto r = run_cli("--out-dir " + dir.s("run") + " cheeger --graph " +
                               dir.s("c4.json"),
                           dir.path / "e2");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("h = 1") != std::string::npos);
    CHECK(r.out.find("bounds: 1 <= h <= 2.8284") != std::string::npos);
}

TEST_CASE("cli: validation errors exit 1 with a single error line") {
    TempDir dir("errors");
    const auto bad_window = run_cli("--out-dir " + dir.s("run") +
                                        " pattern --n 8 --pattern local --window 3",
                                    dir.path / "e1");
    CHECK(bad_window.exit_code == 1);
    CHECK(bad_window.err.rfind("error: ", 0) == 0);
    CHECK(std::count(bad_window.err.begin(), bad_window.err.end(), '\n') == 1);

    const auto unknown_flag = run_cli("pattern --n 8 --no-such-flag", dir.path / "e2");
    CHECK(unknown_flag.exit_code == 1);
    CHECK(unknown_flag.err.rfind("error: ", 0) == 0);

    const auto missing_file =
        run_cli("stats --graph " + dir.s("missing.json"), dir.path / "e3");
    CHECK(missing_file.exit_code == 1);

    // Too-sparse random attention warns but still succeeds.
    const auto sparse_random = run_cli("--out-dir " + dir.s("warn") +
                                           " pattern --n 1024 --pattern random"
                                           " --random-per-token 2 --out " +
                                           dir.s("warn/g.json"),
                                       dir.path / "e4");
    CHECK(sparse_random.exit_code == 0);
    CHECK(sparse_random.err.find("warning:") != std::string::npos);
    CHECK(sparse_random.err.find("threshold") != std::string::npos);
}

TEST_CASE("cli: numerical failure exits 2 and reports the tolerance") {
    TempDir dir("numfail");
    REQUIRE(run_cli("--out-dir " + dir.s("run") + " pattern --n 8 --pattern local"
                        " --window 4 --out " + dir.s("g.json"),
                    dir.path / "e1").exit_code == 0);
    // A huge finite-difference step makes the check fail honestly.
    const auto r = run_cli("--out-dir " + dir.s("run") + " layer --graph " +
                               dir.s("g.json") +
                               " --d 6 --heads 2 --head-dim 3 --ffn-dim 8"
                               " --check-grad --eps 10.0",
                           dir.path / "e2");
    CHECK(r.exit_code == 2);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK(r.err.find("1e-4") != std::string::npos);
}

TEST_CASE("cli: same argv and seed give byte-identical outputs") {
    TempDir dir("determinism");
    const std::string args1 = "--out-dir " + dir.s("a") +
                              " --seed 7 pattern --n 256 --pattern local,random"
                              " --window 8 --random-per-token 4 --out " + dir.s("a/g.json");
    const std::string args2 = "--out-dir " + dir.s("b") +
                              " --seed 7 pattern --n 256 --pattern local,random"
                              " --window 8 --random-per-token 4 --out " + dir.s("b/g.json");
    REQUIRE(run_cli(args1, dir.path / "e1").exit_code == 0);
    REQUIRE(run_cli(args2, dir.path / "e2").exit_code == 0);
    CHECK(slurp(dir.s("a/g.json")) == slurp(dir.s("b/g.json")));

    // Different seed changes the random part.
    const std::string args3 = "--out-dir " + dir.s("c") +
                              " --seed 8 pattern --n 256 --pattern local,random"
                              " --window 8 --random-per-token 4 --out " + dir.s("c/g.json");
    REQUIRE(run_cli(args3, dir.path / "e3").exit_code == 0);
    CHECK(slurp(dir.s("a/g.json")) != slurp(dir.s("c/g.json")));
}

TEST_CASE("cli: manifest round-trip reproduces the run byte for byte") {
    TempDir dir("manifest");
    const std::string args = "--out-dir " + dir.s("a") +
                             " --seed 3 pattern --n 64 --pattern local,global"
                             " --window 8 --global-tokens 4 --out " + dir.s("a/g.json");
    REQUIRE(run_cli(args, dir.path / "e1").exit_code == 0);
    const json manifest = json::parse(slurp(dir.path / "a" / "manifest.json"));

    // Rebuild the argv from the manifest, redirecting outputs elsewhere.
    std::string replay;
    for (const auto& a : manifest.at("argv")) {
        std::string token = a.get<std::string>();
        if (token == dir.s("a")) token = dir.s("b");
        if (token == dir.s("a/g.json")) token = dir.s("b/g.json");
        replay += token + " ";
    }
    REQUIRE(run_cli(replay, dir.path / "e2").exit_code == 0);
    CHECK(slurp(dir.s("a/g.json")) == slurp(dir.s("b/g.json")));
}

TEST_CASE("cli: --help lists every flag for each subcommand") {
    TempDir dir("help");
    for (const std::string sub :
         {"pattern", "stats", "check", "diffuse", "layer", "spectrum", "expander",
          "mixing", "cheeger", "robustness", "compare-spectra", "bench"}) {
        const auto r = run_cli(sub + " --help", dir.path / "e");
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("--help") != std::string::npos);
    }
    const auto pattern_help = run_cli("pattern --help", dir.path / "e");
    for (const std::string flag :
         {"--n", "--pattern", "--window", "--global-tokens", "--random-per-token",
          "--block", "--seed", "--out"})
        CHECK(pattern_help.out.find(flag) != std::string::npos);
}

TEST_CASE("cli: experiment subcommands run from config files") {
    TempDir dir("experiments");
    {
        std::ofstream os(dir.s("roll.json"));
        os << R"({"experiment":"roll_robustness","n":48,"d":4,"heads":1,"head_dim":4,
                  "ffn_dim":6,"alpha":0.1,"steps":3,"pattern":{"local":{"window":6}},
                  "shifts":[1,5],"seeds":[0,1]})";
    }
    const auto rob = run_cli("--out-dir " + dir.s("rob") + " robustness --config " +
                                 dir.s("roll.json"),
                             dir.path / "e1");
    CHECK(rob.exit_code == 0);
    CHECK(fs::exists(dir.path / "rob" / "report.json"));
    CHECK(fs::exists(dir.path / "rob" / "metrics.csv"));
    const json rep = json::parse(slurp(dir.path / "rob" / "report.json"));
    CHECK(rep.at("trials").size() == 2);

    {
        std::ofstream os(dir.s("cmp.json"));
        os << R"({"experiment":"pattern_spectra_compare","n":64,"seeds":[0],
                  "configs":[{"name":"win","pattern":{"local":{"window":8}}},
                             {"name":"full","pattern":{"complete":true,"self_loops":false}}]})";
    }
    const auto cmp = run_cli("--out-dir " + dir.s("cmp") + " compare-spectra --config " +
                                 dir.s("cmp.json"),
                             dir.path / "e2");
    CHECK(cmp.exit_code == 0);
    CHECK(fs::exists(dir.path / "cmp" / "summary.csv"));
    CHECK(fs::exists(dir.path / "cmp" / "spectrum_win_seed0.csv"));
    CHECK(fs::exists(dir.path / "cmp" / "spectrum_full_seed0.csv"));

    {
        std::ofstream os(dir.s("bench.json"));
        os << R"({"experiment":"bench","n":64,"value_dim":4,"reps":3,
                  "pattern":{"local":{"window":8}},"alpha":0.1,"steps":3})";
    }
    const auto ben = run_cli("--out-dir " + dir.s("ben") + " bench --config " +
                                 dir.s("bench.json"),
                             dir.path / "e3");
    CHECK(ben.exit_code == 0);
    const json ben_rep = json::parse(slurp(dir.path / "ben" / "report.json"));
    const double nnz = ben_rep.at("trials")[0].at("metrics").at("nnz").get<double>();
    const double ratio =
        ben_rep.at("trials")[0].at("metrics").at("storage_ratio").get<double>();
    CHECK(ratio == nnz / (64.0 * 64.0));

    // Mismatched experiment name is a validation error.
    const auto wrong = run_cli("--out-dir " + dir.s("w") + " bench --config " +
                                   dir.s("roll.json"),
                               dir.path / "e4");
    CHECK(wrong.exit_code == 1);
}

TEST_CASE("cli: csv format flattens the stdout report") {
    TempDir dir("format");
    REQUIRE(run_cli("--out-dir " + dir.s("run") + " pattern --n 16 --pattern local"
                        " --window 4 --out " + dir.s("g.json"),
                    dir.path / "e1").exit_code == 0);
    const auto r = run_cli("--format csv --out-dir " + dir.s("run") +
                               " stats --graph " + dir.s("g.json"),
                           dir.path / "e2");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("nnz_total,") != std::string::npos);
    CHECK(r.out.find('{') == std::string::npos);
}
