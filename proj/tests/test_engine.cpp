#include <doctest.h>

#include <cmath>

#include "cbc/engine.hpp"
#include "cbc/errors.hpp"
#include "cbc/oracle.hpp"
#include "test_helpers.hpp"

using namespace cbc;
using namespace cbc::testing;

namespace {

ControllerConfig default_gains() { return {500.0, 40.0, true}; }

EngineConfig fast_engine() {
    EngineConfig cfg;
    cfg.settle_periods = 20;
    cfg.measure_periods = 10;
    return cfg;
}

}  // namespace

TEST_CASE("noninvasiveness_residual counts non-fundamental content only") {
    FourierSeries u(1.0, 4);
    CHECK(noninvasiveness_residual(u) == 0.0);
    u.harmonics[0] = {5.0, 0.0};
    CHECK(noninvasiveness_residual(u) == 0.0);  // fundamental absorbed into gamma
    u.harmonics[0] = {0.0, 0.0};
    u.a0 = 2.0;
    u.harmonics[2] = {0.0, 1.0};
    CHECK(noninvasiveness_residual(u) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("settle_and_measure at the trivial equilibrium") {
    Rig rig(default_params(), default_gains());
    const double omega = kTwoPi * 2.6;
    const ControlTarget target(omega, 7);
    const Measurement m =
        settle_and_measure(rig, target, {0.0, 0.0, omega}, 5, 10, 7, 1e-10);
    CHECK(response_amplitude(m.response) == 0.0);
    CHECK(m.control.coefficient_norm() == 0.0);
}

TEST_CASE("a target equal to the open-loop orbit makes the controller idle") {
    const double omega = kTwoPi * 2.9;
    const Forcing open{0.5, 0.0, omega};

    // Measure the true periodic response of the open-loop system.
    Rig open_rig(default_params());
    open_rig.run_segment(FourierSeries(omega, 1), open, 300);
    const SampledRecord rec = open_rig.run_segment(FourierSeries(omega, 1), open, 10);
    const FourierSeries orbit = fourier_coeffs(rec.x, rec.dt, rec.t0, omega, 7);

    // Feed it back as the control target; the control action should vanish.
    Rig rig(default_params(), default_gains());
    rig.set_state(open_rig.state());
    ControlTarget target;
    target.series = orbit;
    const Measurement m = settle_and_measure(rig, target, open, 20, 10, 7, 1e-6);
    CHECK(m.control.a0 / 2.0 == doctest::Approx(0.0).epsilon(1e-6));
    for (const auto& [a, b] : m.control.harmonics) {
        CHECK(std::abs(a) <= 1e-6);
        CHECK(std::abs(b) <= 1e-6);
    }
}

TEST_CASE("a target displaced in harmonic 3 draws control action there") {
    const double omega = kTwoPi * 2.9;
    const Forcing open{0.5, 0.0, omega};
    Rig open_rig(default_params());
    open_rig.run_segment(FourierSeries(omega, 1), open, 300);
    const SampledRecord rec = open_rig.run_segment(FourierSeries(omega, 1), open, 10);
    FourierSeries orbit = fourier_coeffs(rec.x, rec.dt, rec.t0, omega, 7);
    orbit.harmonics[2].first += 2e-3;  // displace A3

    Rig rig(default_params(), default_gains());
    rig.set_state(open_rig.state());
    ControlTarget target;
    target.series = orbit;
    const Measurement m = settle_and_measure(rig, target, open, 20, 10, 7, 1e-3);
    CHECK(std::hypot(m.control.harmonics[2].first, m.control.harmonics[2].second) > 1e-4);
}

TEST_CASE("fixed point on the linear plant converges immediately") {
    RigParams params = linear_params();
    Rig rig(params, default_gains());
    const double omega = kTwoPi * 2.8;
    const ControlTarget target(omega, 7, 0.02, 0.0);
    EngineConfig cfg = fast_engine();
    const FixedPointResult fp =
        fixed_point_harmonics(rig, target, {0.0, 0.0, omega}, 1e-6 * 0.02, cfg.max_iter, cfg);
    CHECK(fp.iterations <= 1);
    CHECK(fp.residual <= 1e-6 * 0.02);
    for (std::size_t j = 1; j < fp.target.series.harmonics.size(); ++j) {
        CHECK(std::abs(fp.target.series.harmonics[j].first) < 1e-7);
        CHECK(std::abs(fp.target.series.harmonics[j].second) < 1e-7);
    }
}

TEST_CASE("fixed point on the Duffing plant") {
    Rig rig(default_params(), default_gains());
    const double omega = kTwoPi * 2.9;
    const double amplitude = 0.03;
    const ControlTarget target(omega, 7, amplitude, 0.0);
    EngineConfig cfg = fast_engine();

    SUBCASE("converges within a handful of iterations") {
        const FixedPointResult fp = fixed_point_harmonics(rig, target, {0.0, 0.0, omega},
                                                          1e-6 * amplitude, cfg.max_iter, cfg);
        CHECK(fp.iterations <= 5);
        CHECK(fp.residual <= 1e-6 * amplitude);
        // The fundamental pair is frozen bitwise.
        CHECK(fp.target.series.harmonics[0].first == amplitude);
        CHECK(fp.target.series.harmonics[0].second == 0.0);
    }
    SUBCASE("max_iter = 0 with a mismatch diverges") {
        CHECK_THROWS_AS(fixed_point_harmonics(rig, target, {0.0, 0.0, omega},
                                              1e-6 * amplitude, 0, cfg),
                        FixedPointDiverged);
    }
}

TEST_CASE("linear-plant sweep is a line through the origin with slope 1/|H|") {
    RigParams params = linear_params();
    Rig rig(params, default_gains());
    const double omega = kTwoPi * 2.8;
    EngineConfig cfg = fast_engine();
    const std::vector<double> grid{0.005, 0.01, 0.015, 0.02, 0.025};
    const ContinuationRun run = continuation_sweep(rig, omega, grid, cfg);
    REQUIRE(run.points.size() == grid.size());
    const double slope = 1.0 / linear_gain(params, omega);
    for (const auto& p : run.points) {
        const double amp = response_amplitude(p.response);
        CHECK(p.gamma / amp == doctest::Approx(slope).epsilon(0.01));
    }
}

TEST_CASE("Duffing sweep above resonance crosses a fold pair") {
    Rig rig(default_params(), default_gains());
    const double omega = kTwoPi * 2.9;
    EngineConfig cfg = fast_engine();
    std::vector<double> grid;
    for (double a = 0.006; a <= 0.0601; a += 0.002) grid.push_back(a);
    const ContinuationRun run = continuation_sweep(rig, omega, grid, cfg);
    REQUIRE(run.aborted_reason.empty());
    REQUIRE(run.points.size() == grid.size());

    int sign_changes = 0;
    for (std::size_t k = 2; k < run.points.size(); ++k) {
        const double d1 = run.points[k - 1].gamma - run.points[k - 2].gamma;
        const double d2 = run.points[k].gamma - run.points[k - 1].gamma;
        if ((d1 > 0) != (d2 > 0)) ++sign_changes;
    }
    CHECK(sign_changes == 2);  // S-shaped branch: the fold pair

    SUBCASE("reversed grid reproduces the same points") {
        Rig rev_rig(default_params(), default_gains());
        std::vector<double> rev(grid.rbegin(), grid.rend());
        const ContinuationRun back = continuation_sweep(rev_rig, omega, rev, cfg);
        REQUIRE(back.points.size() == grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto& fwd = run.points[k];
            const auto& bwd = back.points[grid.size() - 1 - k];
            CHECK(bwd.gamma == doctest::Approx(fwd.gamma).epsilon(1e-5));
        }
    }

    SUBCASE("open-loop replay stays on the orbit (non-invasiveness)") {
        const auto& p = run.points[2];  // a stable low-amplitude point
        const OrbitInput input{p.gamma, omega, p.phase};
        const RigState end = integrate_one_period(default_params(), input, p.state);
        const double divergence = std::hypot(end.x - p.state.x, (end.xdot - p.state.xdot) / omega);
        CHECK(divergence <= 10.0 * p.residual);
    }
}

TEST_CASE("halving the sweep step leaves shared points unchanged") {
    const double omega = kTwoPi * 2.85;
    EngineConfig cfg = fast_engine();
    std::vector<double> coarse{0.008, 0.012, 0.016, 0.02};
    std::vector<double> fine{0.008, 0.01, 0.012, 0.014, 0.016, 0.018, 0.02};
    Rig rig_a(default_params(), default_gains());
    Rig rig_b(default_params(), default_gains());
    const ContinuationRun a = continuation_sweep(rig_a, omega, coarse, cfg);
    const ContinuationRun b = continuation_sweep(rig_b, omega, fine, cfg);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        const auto& pa = a.points[i];
        const auto& pb = b.points[2 * i];
        const double tol = 2.0 * std::max(1e-6 * coarse[i], 1e-10);
        CHECK(std::abs(pa.gamma - pb.gamma) <= 10.0 * tol);
    }
}
