#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"chordflow: semiclassical Wigner propagation in one degree of freedom"};
    app.require_subcommand(1);
    std::string config;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::string chosen;
    for (const char* name : {"propagate", "compare", "caustic-map", "quartic-bench"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "run configuration (key = value with [section] headers)")->required();
        sub->add_option("--out", out, "output directory (overrides output.dir)");
        sub->add_option("--threads", threads, "worker threads (default: CHORDFLOW_THREADS, run.threads, all cores)")
            ->check(CLI::PositiveNumber);
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : chordflow::cli::kConfigFailure;
    }
    return chordflow::cli::run_command(chosen, config, out, threads);
}
