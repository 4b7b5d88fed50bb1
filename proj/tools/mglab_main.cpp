// Command-line front end: `mglab run <config.json> [--out <path>]` executes a
// declarative experiment and writes the record CSV plus a JSON summary;
// `mglab list` prints the experiment registry.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mglab/experiment.hpp"

namespace {

void print_summary(const mglab::ExperimentSummary& summary) {
    std::cout << "experiment: " << mglab::experiment_kind_name(summary.kind)
              << "  (" << summary.seeds.size() << " seed"
              << (summary.seeds.size() == 1 ? "" : "s") << ")\n";
    for (const auto& [name, metric] : summary.metrics)
        std::cout << "  " << name << ": " << mglab::format_number(metric.mean)
                  << " +- " << mglab::format_number(metric.stddev) << '\n';
    std::cout << "records: " << summary.record_path << '\n'
              << "summary: " << summary.summary_path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"market-game decision procedures: reproducible experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    CLI::App* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "path to a JSON experiment config")
        ->required();
    run->add_option("--out", out_override, "override the record output path");

    CLI::App* list = app.add_subcommand("list", "list available experiment kinds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            std::cout << mglab::list_experiments();
            return 0;
        }
        std::optional<std::string> override_opt;
        if (!out_override.empty()) override_opt = out_override;
        const mglab::ExperimentConfig config =
            mglab::parse_config(config_path, override_opt);
        const mglab::ExperimentSummary summary = mglab::run_experiment(config);
        print_summary(summary);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
