#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chordflow/errors.hpp"
#include "chordflow/hamiltonian.hpp"
#include "chordflow/phase_space.hpp"

namespace chordflow::cli {

struct ConfigError : Error {
    using Error::Error;
};

struct LeafSpec {
    std::string type = "bohr_sommerfeld";  // circle | bohr_sommerfeld | file
    PhasePoint center{0, 0};
    double radius = 1.0;
    int n = 20;
    int samples = 256;
    int orientation = 1;
    std::string file;
    double omega = 1.0;
};

struct RegionSpec {
    std::string type = "rect";  // rect | annulus | points
    double p_min = -1, p_max = 1, q_min = -1, q_max = 1;
    int nx = 32, ny = 32;
    double r_inner = 0.3, r_outer = 0.8;  // fractions of the leaf radius
    int samples = 500;
    unsigned seed = 1;
    std::string file;
};

struct Tolerances {
    double integrator = 1e-11;
    double chord = 1e-10;
    double caustic = 1e-8;
    double caustic_margin = 0.1;
};

struct OracleSpec {
    bool enabled = true;
    int n_max = 0;  // 0: automatic
    double q_min = -5, q_max = 5;
    int grid = 2048;
};

struct BenchSpec {
    int specs = 1000;
    unsigned seed = 12345;
    double r_min = 0.3, r_max = 2.0;
    double angle_max = 1.0, t_max = 1.0;
    double dS_tol = 1e-6, center_tol = 1e-8;
    double scaling_t = 0.05, scaling_r_mean = 1.2;
    double scaling_a_min = 0.1, scaling_a_max = 0.8;
    int scaling_points = 8;
    double exponent_target = 3.0, exponent_tol = 0.2;
    std::string mutation = "none";  // none | wedge_sign
};

struct RunConfig {
    std::string model = "quartic";
    double hbar = 1.0 / 41;
    std::vector<double> times{0.3};
    std::string engine = "tips";  // tips | leaf | liouville
    std::optional<int> threads;
    LeafSpec leaf;
    RegionSpec region;
    Tolerances tol;
    OracleSpec oracle;
    BenchSpec bench;
    std::string out_dir = "chordflow_out";
    std::string text;  // raw config, hashed into the manifest
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace detail {

inline double to_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty() || !std::isfinite(x)) throw ConfigError(key + ": not a finite number: '" + v + "'");
    return x;
}

inline long to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long x = 0;
    try {
        x = std::stol(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(key + ": not an integer: '" + v + "'");
    return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string one(const std::string& key, const std::vector<std::string>& in) {
    if (in.size() != 1) throw ConfigError(key + ": expected a single value");
    return in[0];
}

inline void pair_of(const std::string& key, const std::vector<std::string>& in, double& a, double& b) {
    if (in.size() != 2) throw ConfigError(key + ": expected two values");
    a = to_real(key, in[0]);
    b = to_real(key, in[1]);
}

}  // namespace detail

// [section] key = value; '#' or ';' comments; lists separated by commas or spaces.
inline RunConfig parse_config(std::istream& is) {
    using namespace detail;
    RunConfig c;
    std::stringstream buf;
    buf << is.rdbuf();
    c.text = buf.str();
    std::istringstream in(c.text);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    std::set<std::string> seen;
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue;
        const std::string key = it.fullname();
        if (!seen.insert(key).second) throw ConfigError(key + ": duplicate key");
        const auto& v = it.inputs;
        auto R = [&] { return to_real(key, one(key, v)); };
        auto I = [&] { return static_cast<int>(to_int(key, one(key, v))); };
        auto S = [&] { return one(key, v); };
        if (key == "run.model") c.model = S();
        else if (key == "run.hbar") c.hbar = R();
        else if (key == "run.times") {
            c.times.clear();
            for (const auto& s : v) c.times.push_back(to_real(key, s));
        } else if (key == "run.engine") c.engine = S();
        else if (key == "run.threads") c.threads = I();
        else if (key == "leaf.type") c.leaf.type = S();
        else if (key == "leaf.center") pair_of(key, v, c.leaf.center.p, c.leaf.center.q);
        else if (key == "leaf.radius") c.leaf.radius = R();
        else if (key == "leaf.n") c.leaf.n = I();
        else if (key == "leaf.samples") c.leaf.samples = I();
        else if (key == "leaf.orientation") c.leaf.orientation = I();
        else if (key == "leaf.file") c.leaf.file = S();
        else if (key == "leaf.omega") c.leaf.omega = R();
        else if (key == "region.type") c.region.type = S();
        else if (key == "region.p_range") pair_of(key, v, c.region.p_min, c.region.p_max);
        else if (key == "region.q_range") pair_of(key, v, c.region.q_min, c.region.q_max);
        else if (key == "region.resolution") {
            if (v.size() != 2) throw ConfigError(key + ": expected two values");
            c.region.nx = static_cast<int>(to_int(key, v[0]));
            c.region.ny = static_cast<int>(to_int(key, v[1]));
        } else if (key == "region.r_inner") c.region.r_inner = R();
        else if (key == "region.r_outer") c.region.r_outer = R();
        else if (key == "region.samples") c.region.samples = I();
        else if (key == "region.seed") c.region.seed = static_cast<unsigned>(I());
        else if (key == "region.file") c.region.file = S();
        else if (key == "tolerances.integrator") c.tol.integrator = R();
        else if (key == "tolerances.chord") c.tol.chord = R();
        else if (key == "tolerances.caustic") c.tol.caustic = R();
        else if (key == "tolerances.caustic_margin") c.tol.caustic_margin = R();
        else if (key == "oracle.enabled") c.oracle.enabled = to_bool(key, S());
        else if (key == "oracle.n_max") c.oracle.n_max = I();
        else if (key == "oracle.q_range") pair_of(key, v, c.oracle.q_min, c.oracle.q_max);
        else if (key == "oracle.grid") c.oracle.grid = I();
        else if (key == "bench.specs") c.bench.specs = I();
        else if (key == "bench.seed") c.bench.seed = static_cast<unsigned>(I());
        else if (key == "bench.r_range") pair_of(key, v, c.bench.r_min, c.bench.r_max);
        else if (key == "bench.angle_max") c.bench.angle_max = R();
        else if (key == "bench.t_max") c.bench.t_max = R();
        else if (key == "bench.dS_tol") c.bench.dS_tol = R();
        else if (key == "bench.center_tol") c.bench.center_tol = R();
        else if (key == "bench.scaling_t") c.bench.scaling_t = R();
        else if (key == "bench.scaling_r_mean") c.bench.scaling_r_mean = R();
        else if (key == "bench.scaling_asymmetry") pair_of(key, v, c.bench.scaling_a_min, c.bench.scaling_a_max);
        else if (key == "bench.scaling_points") c.bench.scaling_points = I();
        else if (key == "bench.exponent_target") c.bench.exponent_target = R();
        else if (key == "bench.exponent_tol") c.bench.exponent_tol = R();
        else if (key == "bench.mutation") c.bench.mutation = S();
        else if (key == "output.dir") c.out_dir = S();
        else throw ConfigError("unknown key '" + key + "'");
    }

    const auto names = builtin_model_names();
    if (std::find(names.begin(), names.end(), c.model) == names.end()) throw ConfigError("run.model: unknown model '" + c.model + "'");
    if (!(c.hbar > 0)) throw ConfigError("run.hbar must be positive");
    if (c.times.empty()) throw ConfigError("run.times: need at least one time");
    if (c.engine != "tips" && c.engine != "leaf" && c.engine != "liouville") throw ConfigError("run.engine: expected tips, leaf or liouville");
    if (c.threads && *c.threads < 1) throw ConfigError("run.threads must be >= 1");
    if (c.leaf.type != "circle" && c.leaf.type != "bohr_sommerfeld" && c.leaf.type != "file")
        throw ConfigError("leaf.type: expected circle, bohr_sommerfeld or file");
    if (!(c.leaf.radius > 0)) throw ConfigError("leaf.radius must be positive");
    if (c.leaf.n < 0) throw ConfigError("leaf.n must be >= 0");
    if (c.leaf.samples < 16) throw ConfigError("leaf.samples must be >= 16");
    if (c.leaf.orientation != 1 && c.leaf.orientation != -1) throw ConfigError("leaf.orientation must be 1 or -1");
    if (c.leaf.type == "file" && c.leaf.file.empty()) throw ConfigError("leaf.file is required for leaf.type = file");
    if (c.region.type != "rect" && c.region.type != "annulus" && c.region.type != "points")
        throw ConfigError("region.type: expected rect, annulus or points");
    if (c.region.type == "rect") {
        if (c.region.nx < 2 || c.region.ny < 2) throw ConfigError("region.resolution must be >= 2 in both directions");
        if (!(c.region.p_max > c.region.p_min) || !(c.region.q_max > c.region.q_min)) throw ConfigError("region: empty rectangle");
    }
    if (c.region.type == "annulus") {
        if (!(c.region.r_outer > c.region.r_inner) || c.region.r_inner < 0 || c.region.samples < 1)
            throw ConfigError("region: empty annulus");
    }
    if (c.region.type == "points" && c.region.file.empty()) throw ConfigError("region.file is required for region.type = points");
    for (double v : {c.tol.integrator, c.tol.chord, c.tol.caustic, c.bench.dS_tol, c.bench.center_tol, c.bench.exponent_tol})
        if (!(v > 0)) throw ConfigError("tolerances must be positive");
    if (!(c.tol.caustic_margin >= 0)) throw ConfigError("tolerances.caustic_margin must be >= 0");
    if (c.oracle.grid < 64 || !(c.oracle.q_max > c.oracle.q_min) || c.oracle.n_max < 0) throw ConfigError("oracle: bad grid");
    if (c.bench.specs < 0) throw ConfigError("bench.specs must be >= 0");
    if (c.bench.mutation != "none" && c.bench.mutation != "wedge_sign") throw ConfigError("bench.mutation: expected none or wedge_sign");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(f);
}

}  // namespace chordflow::cli
