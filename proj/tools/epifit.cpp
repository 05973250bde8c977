#include "epi/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical renewal-equation model for state-level epidemic death series"};
    app.require_subcommand(1);

    epi::CliOptions opt;
    std::uint64_t seed = 0;
    int chains = 0;
    std::string output;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("manifest", opt.manifest_path, "Run manifest (JSON)")->required();
        sub->add_option("--seed", seed, "Override the manifest RNG seed");
        sub->add_option("--output", output, "Override the manifest output directory");
        return sub;
    };

    CLI::App* sim = add_common(app.add_subcommand(
        "simulate", "Generate a synthetic epidemic under known parameters"));
    CLI::App* fit = add_common(
        app.add_subcommand("fit", "Fit the model to observed death series"));
    fit->add_option("--chains", chains, "Override the manifest chain count");
    fit->add_flag("--allow-nonconverged", opt.allow_nonconverged,
                  "Exit 0 even when convergence diagnostics fail");
    fit->add_flag("--dry-run", opt.dry_run,
                  "Validate inputs and print model dimensions without sampling");
    CLI::App* summ = add_common(app.add_subcommand(
        "summarize", "Re-summarize a previous fit's draws.csv"));
    CLI::App* val = add_common(
        app.add_subcommand("validate", "Check inputs and model sanity, print pass/fail table"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? epi::kExitOk : epi::kExitUsage;
    }

    CLI::App* parsed = app.get_subcommands().front();
    if (parsed->count("--seed") > 0) opt.seed = seed;
    if (parsed->count("--output") > 0) opt.output = output;
    if (parsed == fit && fit->count("--chains") > 0) opt.chains = chains;

    if (parsed == sim) return epi::cmd_simulate(opt);
    if (parsed == fit) return epi::cmd_fit(opt);
    if (parsed == summ) return epi::cmd_summarize(opt);
    if (parsed == val) return epi::cmd_validate(opt);
    return epi::kExitUsage;
}
