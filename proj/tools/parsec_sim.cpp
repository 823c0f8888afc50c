#include "parsec/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace parsec::cli;
    CLI::App app{"Seeded simulator for the gossip consensus protocol"};
    app.require_subcommand(1);

    Overrides overrides;
    std::string scenario_path;
    std::uint64_t seed = 0, steps = 0;
    std::size_t n = 0;
    std::string out_dir;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("scenario", scenario_path, "Scenario file")->required();
        cmd->add_option("--steps", steps, "Delivery step budget");
        cmd->add_option("--n", n, "Node count");
        cmd->add_option("--out-dir", out_dir, "Artifact directory (default $PARSEC_SIM_OUT_DIR or .)");
        cmd->add_flag("--expect-failure-allowed", overrides.expect_failure_allowed,
                      "Accept non-termination for scenarios with too many faults");
    };

    auto* run_cmd = app.add_subcommand("run", "Run one scenario");
    add_common(run_cmd);
    run_cmd->add_option("--seed", seed, "Seed override");

    std::string seeds = "1..100";
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario over a seed range");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--seeds", seeds, "Inclusive seed range A..B")->capture_default_str();

    std::string report_path, node = "a", out_path;
    auto* dot_cmd = app.add_subcommand("export-dot", "Render one node's graph from a report");
    dot_cmd->add_option("report", report_path, "Serialized run report")->required();
    dot_cmd->add_option("node", node, "Node label such as a")->required();
    dot_cmd->add_option("-o,--output", out_path, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_pass : exit_usage;
    }

    if (run_cmd->count("--seed")) overrides.seed = seed;
    for (auto* cmd : {run_cmd, sweep_cmd}) {
        if (cmd->count("--steps")) overrides.steps = steps;
        if (cmd->count("--n")) overrides.n = n;
        if (cmd->count("--out-dir")) overrides.out_dir = out_dir;
    }

    if (*run_cmd) return cmd_run(scenario_path, overrides, std::cout, std::cerr);
    if (*sweep_cmd) {
        std::pair<std::uint64_t, std::uint64_t> range;
        try {
            range = parse_seed_range(seeds);
        } catch (const std::exception& ex) {
            std::cerr << ex.what() << "\n";
            return exit_usage;
        }
        return cmd_sweep(scenario_path, range.first, range.second, overrides, std::cout, std::cerr);
    }
    return cmd_export_dot(report_path, node, out_path, std::cout, std::cerr);
}
