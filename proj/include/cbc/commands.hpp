// Batch orchestration behind the CLI subcommands. Commands compose through
// files only; exit code 0 on success, 1 on any recorded failure, 2 on a
// configuration error (mapped by the CLI front end).
#pragma once

#include <filesystem>
#include <vector>

#include "cbc/config.hpp"

namespace cbc {

struct CommandContext {
    ExperimentConfig config;
    std::filesystem::path out_dir;
    int jobs = 1;
};

// One continuation run per sweep frequency, plus a combined CSV.
int cmd_sweep(const CommandContext& ctx);

// Annotates branch points with Floquet estimates (Fig. 7(b) analogue).
int cmd_floquet(const CommandContext& ctx,
                const std::vector<std::filesystem::path>& sweep_jsons);

// Variational + brute-force oracle on every point of a stored run.
int cmd_oracle(const CommandContext& ctx, const std::filesystem::path& run_json);

// Open-loop escapes from an unstable orbit: time series, phase-0 Poincare
// intersections and the estimated eigendirections for overlay.
int cmd_escape(const CommandContext& ctx, const std::filesystem::path& annotated_run_json);

// Multiplier estimates against perturbation size in three conditions
// (Fig. 6 analogue).
int cmd_perturbation_study(const CommandContext& ctx,
                           const std::filesystem::path& annotated_run_json);

// GP surface fit, fold curve and fixed-gamma slices.
int cmd_surface(const CommandContext& ctx,
                const std::vector<std::filesystem::path>& sweep_jsons);

// Shared helpers (exposed for tests).
Rig make_rig(const ExperimentConfig& config);
// Contiguous unstable segment [first, last] of an annotated run; (-1, -1)
// when no point is flagged unstable.
std::pair<int, int> unstable_segment(const ContinuationRun& run);

}  // namespace cbc
