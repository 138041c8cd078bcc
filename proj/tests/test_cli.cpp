#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "chordflow/io.hpp"
#include "chordflow/semiclassical_wigner.hpp"
#include "run_config.hpp"

using namespace chordflow;
using chordflow::cli::ConfigError;
using chordflow::cli::parse_config;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

cli::RunConfig parse(const std::string& s) {
    std::istringstream is(s);
    return parse_config(is);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("chordflow_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

int run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " '" + std::string(CHORDFLOW_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

const char* kSmall =
    "[run]\nmodel = quartic\nhbar = 0.05\ntimes = 0, 0.4\n"
    "[leaf]\ntype = bohr_sommerfeld\ncenter = 1.2, 0.1\nn = 6\n"
    "[region]\ntype = rect\np_range = 0.2, 2.2\nq_range = -1, 1.2\nresolution = 9, 8\n";

}  // namespace

TEST_CASE("config parsing", "[cli]") {
    SECTION("values and defaults") {
        const auto c = parse(std::string(kSmall) + "[tolerances]\ncaustic_margin = 0.05\n; comment\n# another\n");
        CHECK(c.model == "quartic");
        CHECK(c.hbar == 0.05);
        REQUIRE(c.times.size() == 2);
        CHECK(c.times[1] == 0.4);
        CHECK(c.leaf.center.p == 1.2);
        CHECK(c.leaf.center.q == 0.1);
        CHECK(c.leaf.n == 6);
        CHECK(c.region.nx == 9);
        CHECK(c.region.ny == 8);
        CHECK(c.region.q_max == 1.2);
        CHECK(c.tol.caustic_margin == 0.05);
        CHECK(c.tol.integrator == 1e-11);
        CHECK(c.engine == "tips");
        CHECK_FALSE(c.threads.has_value());
    }
    SECTION("space separated lists") {
        const auto c = parse("[run]\nmodel = harmonic\nhbar = 0.1\ntimes = 0.1 0.2 0.3\n");
        CHECK(c.times.size() == 3);
    }
    SECTION("hash covers the raw text") {
        const auto a = parse(kSmall), b = parse(std::string(kSmall) + "\n");
        CHECK(cli::fnv1a64(a.text) != cli::fnv1a64(b.text));
        CHECK(cli::fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(cli::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    }
    SECTION("rejections") {
        CHECK_THROWS_AS(parse(std::string(kSmall) + "[leaf]\nwidth = 2\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nmodle = quartic\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nmodel = morse\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nmodel = quartic\nhbar = -1\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nmodel = quartic\nhbar = 0.1x\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nmodel = quartic\nmodel = harmonic\n"), ConfigError);
        CHECK_THROWS_AS(parse("[region]\nresolution = 1, 10\n"), ConfigError);
        CHECK_THROWS_AS(parse("[region]\nresolution = 10\n"), ConfigError);
        CHECK_THROWS_AS(parse("[region]\np_range = 1, 1\n"), ConfigError);
        CHECK_THROWS_AS(parse("[region]\ntype = annulus\nr_inner = 0.8\nr_outer = 0.3\n"), ConfigError);
        CHECK_THROWS_AS(parse("[region]\ntype = hexagon\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nengine = magic\n"), ConfigError);
        CHECK_THROWS_AS(parse("[bench]\nmutation = flip\n"), ConfigError);
        CHECK_THROWS_AS(parse("[run]\nthis line has no equals sign\n"), ConfigError);
        CHECK_THROWS_AS(parse("[leaf]\norientation = 2\n"), ConfigError);
        CHECK_THROWS_AS(parse("[leaf]\ntype = file\n"), ConfigError);
    }
}

TEST_CASE("cli exit codes", "[cli]") {
    const fs::path d = scratch("exit");
    SECTION("usage errors") {
        CHECK(run_cli("") == 2);
        CHECK(run_cli("frobnicate --config x") == 2);
        CHECK(run_cli("propagate") == 2);
        CHECK(run_cli("propagate --config " + (d / "missing.ini").string()) == 2);
        CHECK(run_cli("--help") == 0);
    }
    SECTION("config error still leaves a manifest") {
        const auto cfg = write_file(d / "bad.ini", std::string(kSmall) + "[run]\nbogus = 1\n");
        CHECK(run_cli("propagate --config " + cfg.string() + " --out " + (d / "o").string()) == 2);
        CHECK(slurp(d / "o" / "manifest.json").find("config_error") != std::string::npos);
    }
    SECTION("bad CHORDFLOW_THREADS") {
        const auto cfg = write_file(d / "ok.ini", kSmall);
        CHECK(run_cli("propagate --config " + cfg.string() + " --out " + (d / "o2").string(), "CHORDFLOW_THREADS=zero") == 2);
    }
    SECTION("empty bench") {
        const auto cfg = write_file(d / "b0.ini", "[bench]\nspecs = 0\n");
        CHECK(run_cli("quartic-bench --config " + cfg.string() + " --out " + (d / "b0").string()) == 2);
    }
    SECTION("numerical failure: oracle truncation") {
        const auto cfg = write_file(d / "trunc.ini",
                                    "[run]\nmodel = harmonic\nhbar = 0.05\ntimes = 0.5\n[leaf]\ncenter = 0.5, 0\nn = 4\n"
                                    "[region]\ntype = annulus\nsamples = 20\n[oracle]\nn_max = 3\nq_range = -4, 4\ngrid = 512\n");
        CHECK(run_cli("compare --config " + cfg.string() + " --out " + (d / "tr").string()) == 3);
        const std::string man = slurp(d / "tr" / "manifest.json");
        CHECK(man.find("numerical_failure") != std::string::npos);
        CHECK(man.find("fock_project") != std::string::npos);
    }
    SECTION("compare without oracle is a config error") {
        const auto cfg = write_file(d / "noor.ini", std::string(kSmall) + "[oracle]\nenabled = false\n");
        CHECK(run_cli("compare --config " + cfg.string() + " --out " + (d / "no").string()) == 2);
    }
}

TEST_CASE("quartic bench command", "[cli][slow]") {
    const fs::path d = scratch("bench");
    const std::string base = "[bench]\nspecs = 60\nseed = 99\n";
    const auto ok = write_file(d / "ok.ini", base);
    REQUIRE(run_cli("quartic-bench --config " + ok.string() + " --out " + (d / "ok").string()) == 0);
    std::ifstream f(d / "ok" / "bench.csv");
    const auto rows = read_numeric_csv(f, {"r_minus", "r_plus", "alpha", "beta", "t", "dS_closed", "dS_numeric", "abs_err"});
    CHECK(rows.size() == 60);
    for (const auto& r : rows) CHECK(r[7] < 1e-6);
    CHECK(fs::exists(d / "ok" / "scaling.csv"));

    // flipping the wedge sign inside the numeric action must be caught
    const auto mut = write_file(d / "mut.ini", base + "mutation = wedge_sign\n");
    CHECK(run_cli("quartic-bench --config " + mut.string() + " --out " + (d / "mut").string()) == 4);
    CHECK(slurp(d / "mut" / "manifest.json").find("acceptance_failure") != std::string::npos);
}

TEST_CASE("propagate at t = 0 reproduces the initial field", "[cli]") {
    const fs::path d = scratch("t0");
    const auto cfg = write_file(d / "c.ini", kSmall);
    REQUIRE(run_cli("propagate --config " + cfg.string() + " --out " + (d / "o").string()) == 0);
    std::ifstream f(d / "o" / "field_t0.csv");
    const auto rows = read_numeric_csv(f, {"p", "q", "W", "branch_count", "caustic_flag"});
    REQUIRE(rows.size() == 72);
    const Leaf L = make_bohr_sommerfeld_leaf({1.2, 0.1}, 6, 0.05);
    int nonzero = 0;
    for (const auto& r : rows) {
        const auto ev = evaluate(L, 0.05, {r[0], r[1]});
        CHECK(r[3] == ev.chord_count());
        if (ev.has_value && r[4] == 0) {
            CHECK(r[2] == Approx(ev.value).margin(1e-9));
            nonzero += ev.value != 0.0;
        }
    }
    CHECK(nonzero > 10);
    CHECK(fs::exists(d / "o" / "field_t1.pgm"));
    std::ifstream pf(d / "o" / "propagation_t0.csv");
    const auto prop = read_numeric_csv(pf, {"p0", "q0", "p_tilde", "q_tilde", "S0", "S_t", "A0", "A_t", "branch", "caustic_central",
                                            "caustic_chord"});
    REQUIRE_FALSE(prop.empty());
    for (const auto& r : prop) {
        CHECK(r[2] == Approx(r[0]).margin(1e-12));
        CHECK(r[3] == Approx(r[1]).margin(1e-12));
        CHECK(r[5] == Approx(r[4]).margin(1e-12));
    }
}

TEST_CASE("outputs do not depend on the thread count", "[cli][slow]") {
    const fs::path d = scratch("det");
    const auto cfg = write_file(d / "c.ini", std::string(kSmall));
    REQUIRE(run_cli("propagate --config " + cfg.string() + " --out " + (d / "a").string() + " --threads 1") == 0);
    REQUIRE(run_cli("propagate --config " + cfg.string() + " --out " + (d / "b").string(), "CHORDFLOW_THREADS=4") == 0);
    int compared = 0;
    for (const auto& e : fs::directory_iterator(d / "a")) {
        if (e.path().filename() == "manifest.json") continue;
        CHECK(slurp(e.path()) == slurp(d / "b" / e.path().filename()));
        ++compared;
    }
    CHECK(compared == 6);
    CHECK(slurp(d / "b" / "manifest.json").find("\"threads\": 4") != std::string::npos);
}
