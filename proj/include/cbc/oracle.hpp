// Independent ground truth for the simulated plant: Floquet multipliers from
// the first variational equation integrated over one forcing period, a
// finite-difference monodromy cross-check, and Newton shooting to land
// exactly on (possibly unstable) periodic orbits.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

#include "cbc/rig.hpp"

namespace cbc {

// Open-loop input i(t) = gamma * cos(omega t + phase).
struct OrbitInput {
    double gamma = 0.0;
    double omega = 1.0;
    double phase = 0.0;

    double period() const;
    double value(double t) const;
    Forcing as_forcing() const;  // equivalent (a, b, omega) triple
};

struct VariationalResult {
    Eigen::Matrix2d monodromy;                        // plant-state fundamental matrix over one period
    std::array<std::complex<double>, 2> multipliers;  // its eigenvalues, |mu| descending
    RigState orbit_state;                             // the on-orbit state the integration started from
    double return_residual = 0.0;                     // one-period return distance of the orbit itself
};

struct OracleOptions {
    int rate_multiplier = 10;     // integration at rate_multiplier * rig sample rate
    double return_tol = 1e-8;     // one-period return distance accepted as periodic
    double shooting_tol = 1e-10;  // Newton target on the return residual
    int max_newton_iter = 25;
};

// Integrates the plant and the 2x2 variational system jointly over one period
// from the identity. The provided state must lie on a periodic orbit; throws
// NotPeriodic otherwise (refine with shooting first for unstable orbits).
VariationalResult variational_multipliers(const RigParams& params, const OrbitInput& input,
                                          const RigState& state_on_orbit,
                                          const OracleOptions& opts = {});

// Central-difference cross-check of the monodromy: perturbs (x, xdot) by
// +-eps along each axis and differences the one-period return map.
Eigen::Matrix2d brute_force_monodromy(const RigParams& params, const OrbitInput& input,
                                      const RigState& state_on_orbit, double eps,
                                      const OracleOptions& opts = {});

// Newton iteration on the period-return map, Jacobian from the variational
// matrix. Returns a state with return residual <= shooting_tol; throws
// ShootingDiverged when the residual fails to contract within max_newton_iter.
RigState refine_orbit_shooting(const RigParams& params, const OrbitInput& input,
                               const RigState& initial_guess, const OracleOptions& opts = {});

// One-period flow of the open-loop plant from the given state.
RigState integrate_one_period(const RigParams& params, const OrbitInput& input,
                              const RigState& from, const OracleOptions& opts = {});

// Open-loop flow over an arbitrary duration (same fixed-step integrator).
RigState integrate_flow(const RigParams& params, const OrbitInput& input, const RigState& from,
                        double duration, const OracleOptions& opts = {});

}  // namespace cbc
