// Deterministic fixed-step simulation of a periodically forced nonlinear
// oscillator under discrete-time PD feedback, with filtered-Gaussian
// perturbation injection and actuation limits. Software stand-in for the
// physical rig; the plant is mass-normalised, so inputs carry units of m/s^2.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cbc/fourier.hpp"
#include "cbc/noise.hpp"

namespace cbc {

// Perpendicular-spring restoring force 2 k x (1 - L0 / sqrt(Lm^2 + x^2)),
// the geometric-nonlinearity alternative to the cubic term.
struct SpringGeometry {
    double spring_constant;  // k [N/m] per unit mass
    double rest_length;      // L0 [m]
    double mount_length;     // Lm [m]
};

struct RigParams {
    double natural_frequency = 16.02212;  // omega0 [rad/s] (2*pi*2.55 Hz)
    double damping_ratio = 0.03;          // zeta
    double cubic_stiffness = 5.0e4;       // alpha [1/(m^2 s^2)], hardening Duffing
    std::optional<SpringGeometry> spring_geometry;  // replaces the polynomial restoring force
    double displacement_limit = 0.08;     // [m]; the simulated rig protection
    double sample_rate = 1000.0;          // [Hz]

    void validate() const;  // throws std::invalid_argument on a bad parameter

    // Restoring acceleration and its gradient d/dx (the oracle's Jacobian entry).
    double restoring(double x) const;
    double restoring_gradient(double x) const;
    // Potential V(x) with restoring = dV/dx; used by energy-decay checks.
    double potential(double x) const;
};

struct ControllerConfig {
    double kp = 0.0;  // [1/s^2] input units per metre of error
    double kd = 0.0;  // [1/s] input units per m/s of error
    bool enabled = false;
};

// Sinusoidal forcing p(t) = a cos(omega t) + b sin(omega t).
struct Forcing {
    double a = 0.0;
    double b = 0.0;
    double omega = 1.0;  // [rad/s]

    double period() const;
    double value(double t) const;
};

struct RigState {
    double x = 0.0;     // [m]
    double xdot = 0.0;  // [m/s]
    double t = 0.0;     // [s]
};

// All channels share one uniform grid; i = p + u + eta at every sample.
struct SampledRecord {
    double dt = 0.0;
    double t0 = 0.0;
    int samples_per_period = 0;
    Forcing forcing;
    std::vector<double> t, x, xdot, u, i, eta;

    std::size_t size() const { return t.size(); }
};

// The simulated rig: plant + controller + noise injection + an optional
// unmeasured ambient disturbance (enters the dynamics but not the recorded
// input channel, like ambient noise on a physical rig).
class Rig {
public:
    Rig() = default;
    explicit Rig(const RigParams& params, const ControllerConfig& controller = {},
                 const NoiseConfig& noise = {}, const NoiseConfig& disturbance = {});

    const RigParams& params() const { return params_; }
    const ControllerConfig& controller() const { return controller_; }
    const RigState& state() const { return state_; }

    void set_controller(const ControllerConfig& c) { controller_ = c; }
    void set_noise(const NoiseConfig& c);
    void set_disturbance(const NoiseConfig& c);
    void set_state(const RigState& s) { state_ = s; }
    void reset(double x = 0.0, double xdot = 0.0, double t = 0.0);

    // Advances one fixed step of length dt with a classical RK4 stage sweep.
    // Control action and noise are held across the step; the forcing is
    // evaluated at the stage times. Returns (u, eta) applied over the step.
    // Throws DisplacementLimitExceeded when the step leaves |x| beyond the limit.
    std::pair<double, double> step(const FourierSeries& target, const Forcing& forcing, double dt);

    // Number of integration steps per forcing period: the nominal sample rate
    // snapped so a period is a whole number of steps, optionally a multiple
    // of `grid_multiple` (the ARX phase count).
    int samples_per_period(double omega, int grid_multiple = 1) const;

    // Integrates n_periods forcing periods, recording every step. The final
    // state is phase-aligned: state.t == t0 + n_periods * period.
    SampledRecord run_segment(const FourierSeries& target, const Forcing& forcing,
                              int n_periods, int grid_multiple = 1);

private:
    double acceleration(double x, double xdot, double input) const;

    RigParams params_;
    ControllerConfig controller_;
    NoiseChannel noise_;
    NoiseChannel disturbance_;
    RigState state_;
};

}  // namespace cbc
