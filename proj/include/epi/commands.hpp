#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace epi {

/// Parsed command line. Optional fields override the manifest when set.
struct CliOptions {
    std::string manifest_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> chains;
    std::optional<std::string> output;
    bool allow_nonconverged = false;
    bool dry_run = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitConvergence = 3;

/// Forward-simulate a synthetic epidemic under known parameters and write
/// it out in the ingest schemas plus a ground-truth JSON and a ready fit
/// manifest.
int cmd_simulate(const CliOptions& options);

/// Ingest, build the posterior, sample, and emit the report. Returns the
/// convergence exit code when diagnostics fail and --allow-nonconverged is
/// not set (the report is still written, flagged).
int cmd_fit(const CliOptions& options);

/// Re-summarize a previous fit's draws.csv into a parameter table.
int cmd_summarize(const CliOptions& options);

/// Run every ingest validation and model sanity check, printing a pass/fail
/// table. Returns the data exit code if any check fails.
int cmd_validate(const CliOptions& options);

} // namespace epi
