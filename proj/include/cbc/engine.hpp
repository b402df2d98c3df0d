// Control-based continuation: drives the controller non-invasive by a
// fixed-point iteration on the non-fundamental target harmonics, and sweeps
// branches of periodic orbits by stepping the fundamental target amplitude
// while measuring the effective forcing amplitude.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbc/fourier.hpp"
#include "cbc/rig.hpp"

namespace cbc {

// Control target x*(t). The fundamental pair (A1*, B1*) is the continuation
// variable and is never touched by the fixed-point iteration.
struct ControlTarget {
    FourierSeries series;

    ControlTarget() = default;
    ControlTarget(double omega, std::size_t n_harmonics, double a1 = 0.0, double b1 = 0.0)
        : series(omega, n_harmonics) {
        series.harmonics[0] = {a1, b1};
    }

    std::pair<double, double> fundamental() const { return series.harmonics.at(0); }
};

struct EngineConfig {
    std::size_t n_harmonics = 7;
    int settle_periods = 10;
    int measure_periods = 10;   // averaging window for coefficient estimation
    double tol_rel = 1e-6;      // residual tolerance relative to the target amplitude
    double tol_floor = 1e-10;   // absolute floor on the residual tolerance [input units]
    double settle_tol_rel = 1e-6;  // per-period coefficient drift accepted as settled
    int max_iter = 12;
    bool keep_records = false;  // retain the measured SampledRecord per point
};

// One settled closed-loop measurement: Fourier coefficients of the response
// and of the control action over the measuring window.
struct Measurement {
    FourierSeries response;
    FourierSeries control;
    RigState final_state;  // phase-aligned (t mod period == 0)
    SampledRecord record;
};

// Runs settle_periods, then measures measure_periods and returns coefficients
// of x(t) and u(t). Throws NotSettled when the last two measured periods of
// x(t) drift by more than settle_tol in coefficient norm.
Measurement settle_and_measure(Rig& rig, const ControlTarget& target, const Forcing& forcing,
                               int settle_periods, int measure_periods,
                               std::size_t n_harmonics, double settle_tol);

// Euclidean norm of {A0u/2} u {Aju, Bju : j >= 2}. The fundamental is
// excluded: it is absorbed into the effective forcing amplitude.
double noninvasiveness_residual(const FourierSeries& control_action);

struct FixedPointResult {
    ControlTarget target;  // converged target; fundamental bitwise untouched
    FourierSeries response;
    FourierSeries control;
    double residual = 0.0;
    int iterations = 0;
    RigState final_state;
    SampledRecord record;
};

// Iteratively replaces A0* and (Aj*, Bj*) for j >= 2 with the measured
// response coefficients until the non-fundamental control-action norm is
// <= tol. Throws FixedPointDiverged after max_iter.
FixedPointResult fixed_point_harmonics(Rig& rig, const ControlTarget& target,
                                       const Forcing& forcing, double tol, int max_iter,
                                       const EngineConfig& config = {});

struct ContinuationPoint {
    double omega = 0.0;
    double gamma = 0.0;        // effective forcing amplitude
    double phase = 0.0;        // phase of the lumped fundamental input
    double target_amplitude = 0.0;  // the sweep parameter this point was run at
    FourierSeries response;
    FourierSeries control;
    ControlTarget target;      // converged control target
    double residual = 0.0;
    RigState state;            // rig state at the end of the measurement (t mod T == 0)
    std::optional<bool> stable;  // filled by the stability pipeline
    int record_index = -1;     // into ContinuationRun::records when retained
};

struct ContinuationRun {
    double omega = 0.0;
    std::vector<double> amplitude_grid;
    double tol_rel = 0.0;
    std::uint64_t seed = 0;
    std::vector<ContinuationPoint> points;
    std::vector<SampledRecord> records;      // only when EngineConfig::keep_records
    std::string aborted_reason;              // non-empty when the sweep stopped early
};

// Sweeps the fundamental target amplitude over the grid (phase fixed to
// zero), warm-starting the higher harmonics from the previous point. A
// displacement-limit trip aborts the run with partial results retained;
// FixedPointDiverged propagates annotated with the offending grid index.
ContinuationRun continuation_sweep(Rig& rig, double omega,
                                   const std::vector<double>& amplitude_grid,
                                   const EngineConfig& config = {});

}  // namespace cbc
