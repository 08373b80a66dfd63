#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "halfspace/experiment.hpp"

namespace {

int run(halfspace::Command command, const std::string& config_path, std::string out_path, unsigned workers,
        std::uint64_t seed_offset) {
    using namespace halfspace;
    ExperimentConfig cfg;
    try {
        cfg = load_experiment_config(config_path, command);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    if (out_path.empty())
        out_path = cfg.output_path;

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::out | std::ios::trunc);
        if (!file) {
            std::cerr << "error: cannot write output file '" << out_path << "'\n";
            return 2;
        }
    }
    std::ostream& os = out_path.empty() ? std::cout : file;

    RunStatus status;
    try {
        status = run_experiment(cfg, os, {workers, seed_offset});
    } catch (const InvalidInput& e) {
        status = {2, e.what()};
    } catch (const std::exception& e) {
        status = {1, e.what()};
    }
    os.flush();
    if (status.exit_code != 0)
        std::cerr << "error: " << status.message << '\n';
    else if (!out_path.empty())
        std::cerr << to_string(command) << ": wrote " << out_path << '\n';
    return status.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agnostic halfspace learning experiments: sigmoid-loss PSGD, convex baselines, lower-bound quadrature"};
    app.require_subcommand(1);
    app.set_version_flag("--version", halfspace::version());

    std::string config_path, out_path;
    unsigned workers = 1;
    std::uint64_t seed_offset = 0;

    for (auto command : {halfspace::Command::learn, halfspace::Command::compare, halfspace::Command::lowerbound,
                         halfspace::Command::sweep}) {
        auto* sub = app.add_subcommand(halfspace::to_string(command));
        sub->add_option("--config", config_path, "key = value experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_path, "CSV output path (default: output_path from the config, else stdout)");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_option("--seed-offset", seed_offset, "added to every configured seed");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (auto* sub : app.get_subcommands())
        return run(halfspace::parse_command(sub->get_name()), config_path, out_path, workers, seed_offset);
    return 2;
}
