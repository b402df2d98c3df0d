#include <doctest.h>

#include <cmath>
#include <complex>

#include "cbc/errors.hpp"
#include "cbc/oracle.hpp"
#include "test_helpers.hpp"

using namespace cbc;
using namespace cbc::testing;

namespace {

// Exact multipliers of the linear plant: exp((-zeta w0 +- i wd) T).
std::complex<double> linear_multiplier(const RigParams& p, double period) {
    const double w0 = p.natural_frequency, z = p.damping_ratio;
    const double wd = w0 * std::sqrt(1.0 - z * z);
    return std::exp(std::complex<double>(-z * w0 * period, wd * period));
}

// State on the periodic orbit of the forced linear plant at t = 0.
RigState linear_orbit_state(const RigParams& p, const OrbitInput& input) {
    const double amp = input.gamma * linear_gain(p, input.omega);
    const double psi = linear_phase(p, input.omega) + input.phase;
    return {amp * std::cos(psi), -amp * input.omega * std::sin(psi), 0.0};
}

}  // namespace

TEST_CASE("linear plant multipliers match the closed form") {
    const RigParams p = linear_params();
    const OrbitInput input{0.25, kTwoPi * 2.8, 0.0};
    const VariationalResult res =
        variational_multipliers(p, input, linear_orbit_state(p, input));
    const std::complex<double> expected = linear_multiplier(p, input.period());
    CHECK(std::abs(res.multipliers[0] - expected) < 1e-8);
    CHECK(std::abs(res.multipliers[1] - std::conj(expected)) < 1e-8);
}

TEST_CASE("conservative linear flow preserves volume") {
    RigParams p = linear_params();
    p.damping_ratio = 0.0;
    const OrbitInput input{0.0, kTwoPi * 2.8, 0.0};
    const VariationalResult res = variational_multipliers(p, input, RigState{0.0, 0.0, 0.0});
    CHECK(std::abs(res.multipliers[0]) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(res.multipliers[1]) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("liouville determinant identity on a Duffing orbit") {
    const RigParams p = default_params();
    const OrbitInput input{0.5, kTwoPi * 2.9, 0.0};
    // Reach the unique low-amplitude orbit from rest, then polish.
    RigState s{0.0, 0.0, 0.0};
    for (int k = 0; k < 200; ++k) s = integrate_one_period(p, input, s);
    s.t = 0.0;  // the flow is T-periodic in t; rebase the section
    const RigState on_orbit = refine_orbit_shooting(p, input, s);
    const VariationalResult res = variational_multipliers(p, input, on_orbit);
    const double expected =
        std::exp(-2.0 * p.damping_ratio * p.natural_frequency * input.period());
    CHECK(res.monodromy.determinant() == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("brute-force monodromy agrees with the variational matrix") {
    const RigParams p = default_params();
    const OrbitInput input{0.5, kTwoPi * 2.9, 0.0};
    RigState s{0.0, 0.0, 0.0};
    for (int k = 0; k < 200; ++k) s = integrate_one_period(p, input, s);
    s.t = 0.0;
    const RigState on_orbit = refine_orbit_shooting(p, input, s);
    const VariationalResult res = variational_multipliers(p, input, on_orbit);

    const Eigen::Matrix2d bf = brute_force_monodromy(p, input, on_orbit, 1e-6);
    CHECK((bf - res.monodromy).cwiseAbs().maxCoeff() < 1e-5);

    SUBCASE("central differences converge at second order") {
        const double e1 = (brute_force_monodromy(p, input, on_orbit, 4e-4) - res.monodromy)
                              .cwiseAbs()
                              .maxCoeff();
        const double e2 = (brute_force_monodromy(p, input, on_orbit, 1e-4) - res.monodromy)
                              .cwiseAbs()
                              .maxCoeff();
        CHECK(e2 < e1 / 8.0);  // O(eps^2) would give a factor 16
    }
}

TEST_CASE("multiplier moduli invariant under the section phase") {
    const RigParams p = default_params();
    const OrbitInput base{0.5, kTwoPi * 2.9, 0.0};
    RigState s{0.0, 0.0, 0.0};
    for (int k = 0; k < 200; ++k) s = integrate_one_period(p, base, s);
    s.t = 0.0;
    const RigState on_orbit = refine_orbit_shooting(p, base, s);
    const VariationalResult a = variational_multipliers(p, base, on_orbit);

    // Advance a third of a period along the orbit: same orbit, shifted section.
    const RigState shifted = integrate_flow(p, base, on_orbit, base.period() / 3.0);
    const VariationalResult b = variational_multipliers(p, base, shifted);
    CHECK(std::abs(std::abs(a.multipliers[0]) - std::abs(b.multipliers[0])) < 1e-10);
    CHECK(std::abs(std::abs(a.multipliers[1]) - std::abs(b.multipliers[1])) < 1e-10);
}

TEST_CASE("shooting refinement") {
    const RigParams p = default_params();
    const OrbitInput input{0.5, kTwoPi * 2.9, 0.0};
    RigState s{0.0, 0.0, 0.0};
    for (int k = 0; k < 300; ++k) s = integrate_one_period(p, input, s);
    s.t = 0.0;
    const RigState on_orbit = refine_orbit_shooting(p, input, s);

    SUBCASE("an exact guess is returned unchanged") {
        const RigState again = refine_orbit_shooting(p, input, on_orbit);
        CHECK(again.x == on_orbit.x);
        CHECK(again.xdot == on_orbit.xdot);
    }
    SUBCASE("a nearby guess converges quickly") {
        RigState guess = on_orbit;
        guess.x += 1e-4;
        guess.xdot -= 2e-4;
        const RigState refined = refine_orbit_shooting(p, input, guess);
        CHECK(std::abs(refined.x - on_orbit.x) < 1e-8);
    }
    SUBCASE("a far guess with a tight budget diverges") {
        OracleOptions opts;
        opts.max_newton_iter = 1;
        RigState guess{0.06, 0.5, 0.0};
        CHECK_THROWS_AS(refine_orbit_shooting(p, input, guess, opts), ShootingDiverged);
    }
}

TEST_CASE("variational_multipliers rejects off-orbit states") {
    const RigParams p = default_params();
    const OrbitInput input{0.5, kTwoPi * 2.9, 0.0};
    CHECK_THROWS_AS(variational_multipliers(p, input, RigState{0.05, 0.0, 0.0}), NotPeriodic);
}
