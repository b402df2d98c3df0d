// Experiment configuration: an INI file with sections mirroring the module
// names. Every run writes its resolved snapshot beside its outputs, and all
// randomness flows from one master seed through a documented splitting
// scheme (command stream, repeat index).
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cbc/engine.hpp"
#include "cbc/rig.hpp"
#include "cbc/surface.hpp"
#include "cbc/sysid.hpp"

namespace cbc {

struct SweepConfig {
    double freq_min_hz = 2.2;
    double freq_max_hz = 3.2;
    double freq_step_hz = 0.025;
    double amplitude_min = 0.004;
    double amplitude_max = 0.064;
    double amplitude_step = 0.002;
    EngineConfig engine;
};

struct FloquetCommandConfig {
    double freq_hz = 2.9;           // branch frequency to annotate
    int branch_repeats = 1;         // 3 reproduces the repeatability check
};

struct EscapeConfig {
    int runs = 40;
    int max_periods = 600;
    double noise_amplitude = 0.5;
    double settle_rel_band = 0.02;  // relative amplitude band counted as "arrived"
    int settle_periods_in_band = 5;
    int orbit_index = -1;           // -1: middle of the unstable segment
    double delay_fraction = 0.2;    // tau = delay_fraction * T
};

struct PerturbationStudyConfig {
    std::vector<double> amplitudes = {0.05, 0.1, 0.2, 0.5, 1.0};
    int repeats = 10;
    double ambient_amplitude = 0.02;
    int stable_index = -1;    // -1: first stable point below the lower fold
    int unstable_index = -1;  // -1: middle of the unstable segment
};

struct SurfaceCommandConfig {
    GpOptions gp;
    std::size_t max_points = 600;  // deterministic thinning cap for training
    std::vector<double> slice_gammas = {1.9, 2.0, 2.5, 3.0, 3.5};
    int fold_omega_steps = 161;
};

struct ExperimentConfig {
    RigParams rig;
    ControllerConfig controller{500.0, 40.0, true};
    NoiseConfig noise{0.5, 10.0, 6, 0};  // perturbation defaults (seed comes from master)
    SweepConfig sweep;
    SysidConfig sysid;
    FloquetCommandConfig floquet;
    EscapeConfig escape;
    PerturbationStudyConfig study;
    SurfaceCommandConfig surface;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";

    std::vector<double> sweep_frequencies_hz() const;
    std::vector<double> amplitude_grid() const;
};

// Reference INI with every default documented inline.
std::string reference_config_text();

// Parses an INI file on top of the defaults. Throws ConfigError on unknown
// keys or malformed values.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig default_config();

// Resolved snapshot of the configuration in the same INI dialect.
std::string config_snapshot(const ExperimentConfig& config);

}  // namespace cbc
