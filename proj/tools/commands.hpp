#pragma once

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "chordflow/comparison.hpp"
#include "chordflow/io.hpp"
#include "chordflow/parallel.hpp"
#include "chordflow/quantum_oracle.hpp"
#include "chordflow/quartic_bench.hpp"
#include "run_config.hpp"

namespace chordflow::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kConfigFailure = 2, kNumericalFailure = 3, kAcceptanceFailure = 4 };

// Raised for a failure tied to one evaluation point; the message already names the point.
struct PointFailure : Error {
    using Error::Error;
};

struct RunContext {
    RunConfig cfg;
    std::string command;
    std::filesystem::path out;
    int threads = 1;
    nlohmann::ordered_json manifest;
    std::vector<std::string> outputs;

    std::ofstream open(const std::string& name) {
        std::ofstream f(out / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write '" + (out / name).string() + "'");
        outputs.push_back(name);
        return f;
    }
};

inline Leaf build_leaf(const RunConfig& c) {
    const auto& s = c.leaf;
    if (s.type == "circle") return Leaf::circle(s.center, s.radius, s.samples, s.orientation);
    if (s.type == "bohr_sommerfeld") {
        Leaf L = make_bohr_sommerfeld_leaf(s.center, s.n, c.hbar, s.samples);
        return s.orientation == 1 ? L : L.with_orientation_reversed();
    }
    std::ifstream f(s.file);
    if (!f) throw ConfigError("cannot open leaf file '" + s.file + "'");
    try {
        return read_leaf_csv(f, s.omega);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("leaf file: ") + e.what());
    }
}

inline double leaf_radius(const Leaf& L) {
    if (L.is_circle()) return L.circle_shape()->R;
    return std::sqrt(std::fabs(L.enclosed_area()) / std::numbers::pi);
}

inline Leaf evolve_leaf(const Leaf& L0, const RunConfig& c, double t) {
    if (t == 0.0) return L0;
    LeafEvolutionOptions o;
    o.tol = c.tol.integrator;
    return leaf_evolution_engine(L0, model_by_name(c.model), t, o);
}

struct Region {
    std::vector<PhasePoint> points;
    int nx = 0, ny = 0;  // raster shape for rect regions
};

inline Region build_region(const RunConfig& c, const Leaf& L0) {
    Region r;
    const auto& s = c.region;
    if (s.type == "rect") {
        r.nx = s.nx;
        r.ny = s.ny;
        for (int j = 0; j < s.ny; ++j)
            for (int i = 0; i < s.nx; ++i)
                r.points.push_back({s.p_min + (s.p_max - s.p_min) * i / (s.nx - 1), s.q_min + (s.q_max - s.q_min) * j / (s.ny - 1)});
    } else if (s.type == "annulus") {
        const double R = leaf_radius(L0);
        r.points = annulus_points({c.leaf.center, s.r_inner * R, s.r_outer * R, s.samples, s.seed});
    } else {
        std::ifstream f(s.file);
        if (!f) throw ConfigError("cannot open points file '" + s.file + "'");
        try {
            for (const auto& row : read_numeric_csv(f, {"p", "q"})) r.points.push_back({row[0], row[1]});
        } catch (const DomainError& e) {
            throw ConfigError(std::string("points file: ") + e.what());
        }
    }
    if (r.points.empty()) throw ConfigError("region: no evaluation points");
    return r;
}

inline std::string point_str(const PhasePoint& x) { return "(" + fmt17(x.p) + ", " + fmt17(x.q) + ")"; }

// Runs fn at every point in parallel; a library failure becomes a PointFailure naming the point.
template <class F>
void for_points(const RunContext& ctx, const std::vector<PhasePoint>& pts, F&& fn) {
    parallel_for(pts.size(), ctx.threads, [&](std::size_t i) {
        try {
            fn(i);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw PointFailure("point " + std::to_string(i) + " " + point_str(pts[i]) + ": " + e.what());
        }
    });
}

// Exact W_t for the initial state matching a Bohr-Sommerfeld leaf (displaced eigenstate).
inline std::function<double(const PhasePoint&)> oracle_field(const RunConfig& c, double t) {
    if (c.leaf.type != "bohr_sommerfeld") throw ConfigError("oracle: requires leaf.type = bohr_sommerfeld");
    const double hb = c.hbar;
    const double R = std::sqrt((2.0 * c.leaf.n + 1) * hb);
    const double reach = norm(c.leaf.center) + R + 6 * std::sqrt(hb);
    const int n_max = c.oracle.n_max > 0 ? c.oracle.n_max : static_cast<int>(std::ceil(reach * reach / (2 * hb))) + 40;
    auto psi = displaced_fock_state(c.leaf.n, c.leaf.center, hb, c.oracle.q_min, c.oracle.q_max, c.oracle.grid);
    FockCoefficients ct;
    if (c.model == "shear") {
        ct = fock_project(free_exact_evolve(psi, t), n_max);
    } else {
        ct = exact_evolve(c.model, fock_project(psi, n_max), t);
    }
    auto shared = std::make_shared<FockCoefficients>(std::move(ct));
    return [shared](const PhasePoint& x) { return wigner_at(*shared, x); };
}

struct FieldValue {
    double value = 0;
    int branches = 0;
    bool caustic = false;
};

inline FieldValue engine_value(const std::string& engine, const RunConfig& c, const Leaf& L0, const Leaf& Lt, double t,
                               const PhasePoint& x) {
    const auto model = model_by_name(c.model);
    FieldValue f;
    EvaluateOptions eo;
    eo.tol = c.tol.chord;
    eo.caustic_threshold = c.tol.caustic;
    PropagationOptions po;
    po.tol = c.tol.integrator;
    po.caustic_threshold = c.tol.caustic;
    try {
        if (engine == "liouville") {
            const PhasePoint x0 = t == 0.0 ? x : flow(model, x, -t, c.tol.integrator).end();
            const auto ev = evaluate(L0, c.hbar, x0, eo);
            f = {ev.value, ev.chord_count(), ev.on_caustic};
        } else if (engine == "leaf") {
            const auto ev = evaluate(Lt, c.hbar, x, eo);
            f = {ev.value, ev.chord_count(), ev.on_caustic};
        } else {
            const auto tf = tips_field_value(L0, Lt, c.hbar, model, t, x, po);
            f = {tf.value, static_cast<int>(tf.branches.size()), !tf.has_value};
        }
    } catch (const DegenerateCenterError&) {
        f = {std::numeric_limits<double>::quiet_NaN(), -1, true};
    }
    return f;
}

inline void write_field(RunContext& ctx, const std::string& stem, const Region& r, const std::vector<FieldValue>& v) {
    {
        auto f = ctx.open(stem + ".csv");
        CsvWriter w(f, {"p", "q", "W", "branch_count", "caustic_flag"});
        for (std::size_t i = 0; i < r.points.size(); ++i) w.row(r.points[i].p, r.points[i].q, v[i].value, v[i].branches, v[i].caustic);
    }
    if (r.nx > 0) {
        std::vector<double> vals;
        for (const auto& x : v) vals.push_back(x.value);
        auto f = ctx.open(stem + ".pgm");
        write_pgm(f, vals, r.nx, r.ny);
    }
}

inline int cmd_propagate(RunContext& ctx) {
    const auto& c = ctx.cfg;
    const auto model = model_by_name(c.model);
    const Leaf L0 = build_leaf(c);
    const Region region = build_region(c, L0);
    long central = 0, chord = 0, crossings = 0, on_caustic = 0, degenerate = 0;
    PropagationOptions po;
    po.tol = c.tol.integrator;
    po.caustic_threshold = c.tol.caustic;
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        const double t = c.times[k];
        const Leaf Lt = evolve_leaf(L0, c, t);
        std::vector<std::vector<PropagatedBranch>> rep(region.points.size());
        std::vector<char> degen(region.points.size(), 0);
        std::vector<FieldValue> field(region.points.size());
        for_points(ctx, region.points, [&](std::size_t i) {
            try {
                rep[i] = propagate_point(L0, c.hbar, region.points[i], model, t, po);
            } catch (const DegenerateCenterError&) {
                degen[i] = 1;
            }
            field[i] = engine_value(c.engine, c, L0, Lt, t, region.points[i]);
        });
        const std::string sfx = "_t" + std::to_string(k);
        {
            auto f = ctx.open("propagation" + sfx + ".csv");
            CsvWriter w(f, {"p0", "q0", "p_tilde", "q_tilde", "S0", "S_t", "A0", "A_t", "branch", "caustic_central", "caustic_chord"});
            for (std::size_t i = 0; i < rep.size(); ++i) {
                degenerate += degen[i];
                for (std::size_t b = 0; b < rep[i].size(); ++b) {
                    const auto& pb = rep[i][b];
                    const double A0 = pb.branch0.amplitude_valid ? pb.branch0.amplitude : std::numeric_limits<double>::quiet_NaN();
                    const double At = pb.amplitude_valid ? pb.amplitude_t : std::numeric_limits<double>::quiet_NaN();
                    w.row(region.points[i].p, region.points[i].q, pb.chord_t.center.p, pb.chord_t.center.q, pb.branch0.action, pb.action_t,
                          A0, At, static_cast<int>(b), pb.caustic_flags.central, pb.caustic_flags.chord);
                    central += pb.caustic_flags.central;
                    chord += pb.caustic_flags.chord;
                    crossings += pb.crossed_wigner_caustic;
                }
            }
        }
        for (const auto& v : field) on_caustic += v.caustic;
        write_field(ctx, "field" + sfx, region, field);
    }
    ctx.manifest["caustic_counts"] = {{"central", central}, {"chord", chord}, {"wigner_crossing", crossings},
                                      {"field_points_on_caustic", on_caustic}, {"degenerate_points", degenerate}};
    return kOk;
}

inline int cmd_compare(RunContext& ctx) {
    const auto& c = ctx.cfg;
    if (!c.oracle.enabled) throw ConfigError("compare: requires oracle.enabled = true");
    if (c.leaf.type != "bohr_sommerfeld") throw ConfigError("compare: requires leaf.type = bohr_sommerfeld");
    const auto model = model_by_name(c.model);
    const Leaf L0 = build_leaf(c);
    const Region region = build_region(c, L0);
    nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
    PropagationOptions po;
    po.tol = c.tol.integrator;
    po.caustic_threshold = c.tol.caustic;
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        const double t = c.times[k];
        const Leaf Lt = evolve_leaf(L0, c, t);
        const auto exact = oracle_field(c, t);
        const std::string sfx = "_t" + std::to_string(k);
        nlohmann::ordered_json m;
        m["t"] = t;
        if (c.region.type == "annulus") {
            TransportComparison tc;
            try {
                tc = compare_transport(L0, Lt, c.hbar, model, t, region.points, exact, c.tol.caustic_margin, ctx.threads, po);
            } catch (const std::exception& e) {
                throw PointFailure(std::string("transport comparison: ") + e.what());
            }
            auto f = ctx.open("transport" + sfx + ".csv");
            CsvWriter w(f, {"p0", "q0", "p_tips", "q_tips", "p_liouville", "q_liouville", "W_tips", "W_exact_tips", "W_liouville",
                            "W_exact_liouville", "caustic_distance_tips", "caustic_distance_liouville", "usable"});
            for (const auto& s : tc.samples)
                w.row(s.x0.p, s.x0.q, s.x_tips.p, s.x_tips.q, s.x_liouville.p, s.x_liouville.q, s.w_tips, s.exact_tips, s.w_liouville,
                      s.exact_liouville, s.d_tips, s.d_liouville, s.usable);
            m["points"] = tc.used;
            m["usable"] = tc.usable;
            m["l2_rel"] = {{"tips", tc.err_tips}, {"liouville", tc.err_liouville}};
            m["l2_rel_without_margin"] = {{"tips", tc.err_tips_all}, {"liouville", tc.err_liouville_all}};
        } else {
            struct Row {
                double wl, wt, wf, wo, d;
            };
            std::vector<Row> rows(region.points.size());
            const auto trace = wigner_caustic_trace(Lt, 1024);
            for_points(ctx, region.points, [&](std::size_t i) {
                const PhasePoint x = region.points[i];
                const auto l = engine_value("liouville", c, L0, Lt, t, x);
                const auto tp = engine_value("tips", c, L0, Lt, t, x);
                const auto lf = engine_value("leaf", c, L0, Lt, t, x);
                const bool bad = l.caustic || tp.caustic || lf.caustic;
                rows[i] = {l.value, tp.value, lf.value, exact(x), bad ? 0.0 : caustic_distance(Lt, trace, x)};
            });
            auto f = ctx.open("compare" + sfx + ".csv");
            CsvWriter w(f, {"p", "q", "W_liouville", "W_tips", "W_leaf", "W_oracle", "caustic_distance"});
            std::vector<double> a, b, d, o;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& r = rows[i];
                w.row(region.points[i].p, region.points[i].q, r.wl, r.wt, r.wf, r.wo, r.d);
                if (r.d <= c.tol.caustic_margin || !std::isfinite(r.wl + r.wt + r.wf)) continue;
                a.push_back(r.wl);
                b.push_back(r.wt);
                d.push_back(r.wf);
                o.push_back(r.wo);
            }
            m["points"] = o.size();
            m["l2_rel"] = {{"liouville", relative_l2(a, o)}, {"tips", relative_l2(b, o)}, {"leaf", relative_l2(d, o)}};
        }
        {
            auto f = ctx.open("metrics" + sfx + ".csv");
            CsvWriter w(f, {"engine", "l2_rel", "points"});
            for (const auto& [name, v] : m["l2_rel"].items()) w.row(name, v.get<double>(), m["points"].get<std::size_t>());
        }
        metrics.push_back(m);
    }
    ctx.manifest["metrics"] = metrics;
    return kOk;
}

inline int cmd_caustic_map(RunContext& ctx) {
    const auto& c = ctx.cfg;
    if (c.region.type != "rect") throw ConfigError("caustic-map: requires region.type = rect");
    const Leaf L0 = build_leaf(c);
    const Region region = build_region(c, L0);
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        const double t = c.times[k];
        const Leaf Lt = evolve_leaf(L0, c, t);
        const auto trace = wigner_caustic_trace(Lt, 1024);
        const std::string sfx = "_t" + std::to_string(k);
        {
            auto f = ctx.open("caustic_trace" + sfx + ".csv");
            CsvWriter w(f, {"p", "q"});
            for (const auto& x : trace) w.row(x.p, x.q);
        }
        std::vector<int> n(region.points.size());
        for_points(ctx, region.points, [&](std::size_t i) {
            try {
                n[i] = static_cast<int>(find_chords(Lt, region.points[i], c.tol.chord).size());
            } catch (const DegenerateCenterError&) {
                n[i] = -1;
            }
        });
        std::vector<double> vals(n.begin(), n.end());
        {
            auto f = ctx.open("chord_count" + sfx + ".csv");
            CsvWriter w(f, {"p", "q", "chord_count"});
            for (std::size_t i = 0; i < n.size(); ++i) w.row(region.points[i].p, region.points[i].q, n[i]);
        }
        {
            auto f = ctx.open("chord_count" + sfx + ".pgm");
            write_pgm(f, vals, region.nx, region.ny);
        }
        std::map<int, long> hist;
        for (int v : n) ++hist[v];
        nlohmann::ordered_json h;
        for (const auto& [v, cnt] : hist) h[std::to_string(v)] = cnt;
        counts.push_back({{"t", t}, {"trace_points", trace.size()}, {"chord_count_histogram", h}});
    }
    ctx.manifest["caustic_maps"] = counts;
    return kOk;
}

inline int cmd_quartic_bench(RunContext& ctx) {
    const auto& b = ctx.cfg.bench;
    if (b.specs == 0) throw ConfigError("quartic-bench: bench.specs = 0, nothing to run");
    const int sign = b.mutation == "wedge_sign" ? -1 : 1;
    // draw until `specs` caustic-free specs are collected
    std::vector<QuarticBenchRow> rows;
    int skipped = 0;
    const auto pool = random_quartic_specs(b.specs * 20, b.seed, b.r_min, b.r_max, b.angle_max, b.t_max);
    std::vector<QuarticBenchRow> all(pool.size());
    std::size_t need = pool.size();
    // evaluate in chunks so the caustic-free prefix is found without computing the whole pool
    for (std::size_t start = 0; start < pool.size() && static_cast<int>(rows.size()) < b.specs; start += b.specs) {
        const std::size_t end = std::min(pool.size(), start + static_cast<std::size_t>(b.specs));
        std::vector<PhasePoint> dummy(end - start);
        for_points(ctx, dummy, [&](std::size_t i) { all[start + i] = quartic_bench_row(pool[start + i], ctx.cfg.tol.integrator, sign); });
        for (std::size_t i = start; i < end && static_cast<int>(rows.size()) < b.specs; ++i) {
            if (all[i].caustic || all[i].degenerate) {
                ++skipped;
                continue;
            }
            rows.push_back(all[i]);
        }
        need = end;
    }
    (void)need;
    std::vector<std::string> offending;
    double worst_dS = 0, worst_center = 0;
    {
        auto f = ctx.open("bench.csv");
        CsvWriter w(f, {"r_minus", "r_plus", "alpha", "beta", "t", "dS_closed", "dS_numeric", "abs_err"});
        for (const auto& r : rows) {
            w.row(r.spec.r_minus, r.spec.r_plus, r.spec.alpha, r.spec.beta, r.spec.t, r.dS_closed, r.dS_numeric, r.abs_err);
            worst_dS = std::max(worst_dS, r.abs_err);
            worst_center = std::max(worst_center, r.center_err);
            if (r.abs_err > b.dS_tol || r.center_err > b.center_tol)
                offending.push_back("r_minus=" + fmt17(r.spec.r_minus) + " r_plus=" + fmt17(r.spec.r_plus) + " alpha=" + fmt17(r.spec.alpha) +
                                    " beta=" + fmt17(r.spec.beta) + " t=" + fmt17(r.spec.t) + " dS_err=" + fmt17(r.abs_err) +
                                    " center_err=" + fmt17(r.center_err));
        }
    }
    const auto sc = scaling_probe(radial_scaling_specs(b.scaling_r_mean, b.scaling_a_min, b.scaling_a_max, b.scaling_points, b.scaling_t));
    {
        auto f = ctx.open("scaling.csv");
        CsvWriter w(f, {"asymmetry", "discrepancy"});
        for (const auto& p : sc.points) w.row(p.asymmetry, p.discrepancy);
    }
    const bool scaling_ok = std::fabs(sc.exponent - b.exponent_target) <= b.exponent_tol;
    const bool enough = static_cast<int>(rows.size()) == b.specs;
    ctx.manifest["bench"] = {{"specs", rows.size()},
                             {"skipped_caustic", skipped},
                             {"mutation", b.mutation},
                             {"worst_dS_err", worst_dS},
                             {"worst_center_err", worst_center},
                             {"failed_specs", offending.size()},
                             {"scaling_exponent", sc.exponent},
                             {"scaling_ok", scaling_ok}};
    for (const auto& o : offending) std::cerr << "FAIL spec " << o << '\n';
    if (!scaling_ok) std::cerr << "FAIL scaling exponent " << fmt17(sc.exponent) << '\n';
    if (!enough) std::cerr << "FAIL only " << rows.size() << " caustic-free specs found\n";
    return offending.empty() && scaling_ok && enough ? kOk : kAcceptanceFailure;
}

inline int resolve_threads(std::optional<int> flag, const RunConfig& c) {
    if (flag) return *flag;
    if (const char* env = std::getenv("CHORDFLOW_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("CHORDFLOW_THREADS must be a positive integer");
    }
    if (c.threads) return *c.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

// Loads the config, runs one command, always writes manifest.json.
inline int run_command(const std::string& command, const std::string& config_path, std::optional<std::string> out_dir,
                       std::optional<int> threads, std::ostream& log = std::cerr) {
    RunContext ctx;
    ctx.command = command;
    int code = kOk;
    auto& man = ctx.manifest;
    man["tool"] = "chordflow";
    man["version"] = kToolVersion;
    man["command"] = command;
    try {
        ctx.cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        if (out_dir) {
            std::error_code ec;
            std::filesystem::create_directories(*out_dir, ec);
            man["status"] = "config_error";
            man["failure"] = {{"site", "config"}, {"message", e.what()}};
            std::ofstream(std::filesystem::path(*out_dir) / "manifest.json", std::ios::binary) << man.dump(2) << '\n';
        }
        return kConfigFailure;
    }
    ctx.out = out_dir ? *out_dir : ctx.cfg.out_dir;
    man["config_hash"] = "fnv1a64:" + hex64(fnv1a64(ctx.cfg.text));
    try {
        std::filesystem::create_directories(ctx.out);
    } catch (const std::exception& e) {
        log << "config error: cannot create output directory: " << e.what() << '\n';
        return kConfigFailure;
    }
    man["status"] = "running";
    try {
        ctx.threads = resolve_threads(threads, ctx.cfg);
        man["threads"] = ctx.threads;
        man["model"] = ctx.cfg.model;
        man["times"] = ctx.cfg.times;
        if (command == "propagate") code = cmd_propagate(ctx);
        else if (command == "compare") code = cmd_compare(ctx);
        else if (command == "caustic-map") code = cmd_caustic_map(ctx);
        else if (command == "quartic-bench") code = cmd_quartic_bench(ctx);
        else throw ConfigError("unknown command '" + command + "'");
        man["status"] = code == kOk ? "ok" : "acceptance_failure";
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        man["status"] = "config_error";
        man["failure"] = {{"site", "config"}, {"message", e.what()}};
        code = kConfigFailure;
    } catch (const PointFailure& e) {
        log << "numerical failure: " << e.what() << '\n';
        man["status"] = "numerical_failure";
        man["failure"] = {{"site", "point"}, {"message", e.what()}};
        code = kNumericalFailure;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << '\n';
        man["status"] = "numerical_failure";
        man["failure"] = {{"site", command}, {"message", e.what()}};
        code = kNumericalFailure;
    }
    man["outputs"] = ctx.outputs;
    std::ofstream mf(ctx.out / "manifest.json", std::ios::binary);
    mf << man.dump(2) << '\n';
    return code;
}

}  // namespace chordflow::cli
