#include <doctest.h>

#include <cmath>
#include <complex>

#include "cbc/engine.hpp"
#include "cbc/errors.hpp"
#include "cbc/noise.hpp"
#include "cbc/oracle.hpp"
#include "cbc/sysid.hpp"
#include "test_helpers.hpp"

using namespace cbc;
using namespace cbc::testing;

namespace {

// Wraps plain (y, k) streams as a PerturbationRecord on a unit grid.
PerturbationRecord wrap_streams(std::vector<double> y, std::vector<double> k, int m,
                                int n_periods) {
    PerturbationRecord rec;
    rec.omega = kTwoPi;
    rec.dt = 1.0 / m;
    rec.rig_samples_per_period = m;
    rec.m_samples = m;
    rec.n_periods = n_periods;
    rec.y = std::move(y);
    rec.k = std::move(k);
    return rec;
}

ContinuationPoint stable_orbit(double omega, double amplitude, Rig& rig) {
    const EngineConfig cfg;
    const ContinuationRun run = continuation_sweep(rig, omega, {amplitude}, cfg);
    REQUIRE(run.points.size() == 1);
    return run.points[0];
}

}  // namespace

TEST_CASE("fit_arx recovers a known scalar recursion exactly") {
    const int m = 4, N = 200;
    SplitMix64 rng(5);
    std::vector<double> k(m * N), y(m * N, 0.0);
    for (auto& v : k) v = rng.next_closed_open() - 0.5;
    for (std::size_t g = 1; g < y.size(); ++g) y[g] = 0.9 * y[g - 1] + 0.1 * k[g - 1];

    const PerturbationRecord rec = wrap_streams(y, k, m, N);
    const ArxModel model = fit_arx(rec, m, 1);
    CHECK(model.coefficient_count() == m * 3);
    for (int s = 0; s < m; ++s) {
        CHECK(model.b(s, 0) == doctest::Approx(-0.9).epsilon(1e-8));
        CHECK(model.a(s, 0) == doctest::Approx(0.0).epsilon(1e-8));
        CHECK(model.a(s, 1) == doctest::Approx(0.1).epsilon(1e-8));
        CHECK(model.rss_per_phase[s] < 1e-16);
    }
}

TEST_CASE("pure-noise output with zero input") {
    const int m = 4, N = 100;
    SplitMix64 rng(11);
    std::vector<double> y(m * N), k(m * N, 0.0);
    GaussianSource gauss(3);
    for (auto& v : y) v = gauss.next();

    SUBCASE("default fit reports insufficient excitation") {
        CHECK_THROWS_AS(fit_arx(wrap_streams(y, k, m, N), m, 1), RankDeficient);
    }
    SUBCASE("ridge fallback returns near-zero coefficients") {
        ArxOptions opts;
        opts.ridge = true;
        const ArxModel model = fit_arx(wrap_streams(y, k, m, N), m, 1, opts);
        double var = 0.0;
        for (double v : y) var += v * v;
        var /= static_cast<double>(y.size());
        for (int s = 0; s < m; ++s) {
            CHECK(std::abs(model.b(s, 0)) < 0.2);  // white noise has no structure
            CHECK(std::abs(model.a(s, 0)) < 1e-6);
            const double rows = model.rows_per_phase[s];
            CHECK(model.rss_per_phase[s] / rows == doctest::Approx(var).epsilon(0.25));
        }
    }
}

TEST_CASE("monodromy of hand-built models") {
    SUBCASE("identity B gives zero multipliers") {
        ArxModel model;
        model.m_samples = 5;
        model.n_order = 2;
        model.b = Eigen::MatrixXd::Zero(5, 2);
        model.a = Eigen::MatrixXd::Zero(5, 3);
        model.rss_per_phase.assign(5, 0.0);
        model.rows_per_phase.assign(5, 10);
        const FloquetResult r = monodromy(model);
        for (const auto& mu : r.multipliers) CHECK(std::abs(mu) < 1e-15);
    }
    SUBCASE("m=2, n=1 period map y -> 0.8 y") {
        // Per-step factors 0.5 and 1.6 compose to 0.8 over the period.
        ArxModel model;
        model.m_samples = 2;
        model.n_order = 1;
        model.b.resize(2, 1);
        model.b(0, 0) = -0.5;
        model.b(1, 0) = -1.6;
        model.a = Eigen::MatrixXd::Zero(2, 2);
        model.rss_per_phase.assign(2, 0.0);
        model.rows_per_phase.assign(2, 10);
        const FloquetResult r = monodromy(model);
        REQUIRE(r.multipliers.size() == 1);
        CHECK(r.multipliers[0].real() == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(std::abs(r.multipliers[0].imag()) < 1e-12);
    }
}

TEST_CASE("perturbed data collection") {
    Rig rig(default_params(), {500.0, 40.0, true});
    const double omega = kTwoPi * 2.8;
    const ContinuationPoint orbit = stable_orbit(omega, 0.02, rig);

    SysidConfig cfg;
    cfg.n_periods = 30;
    cfg.repeats = 1;
    cfg.seed = 42;

    SUBCASE("zero perturbation leaves y and k at zero") {
        SysidConfig quiet = cfg;
        quiet.perturbation_amplitude = 0.0;
        Rig r2 = rig;
        const PerturbationRecord data = collect_perturbed_data(r2, orbit, quiet);
        for (double v : data.y) CHECK(std::abs(v) < 1e-9);
        for (double v : data.k) CHECK(std::abs(v) < 1e-9);
    }

    SUBCASE("k decomposes as eta + u - u_hat") {
        Rig r2 = rig;
        const PerturbationRecord data = collect_perturbed_data(r2, orbit, cfg);
        const std::size_t per = static_cast<std::size_t>(data.rig_samples_per_period);
        for (std::size_t g = 0; g < data.k.size(); g += 97) {
            const double expected = data.eta[g] + data.u[g] - data.ref_u[g % per];
            CHECK(data.k[g] == doctest::Approx(expected).epsilon(1e-9));
        }
    }

    SUBCASE("response scales about linearly with the perturbation") {
        auto rms_for = [&](double amplitude) {
            SysidConfig c = cfg;
            c.perturbation_amplitude = amplitude;
            Rig r2 = rig;
            const PerturbationRecord data = collect_perturbed_data(r2, orbit, c);
            double acc = 0.0;
            for (double v : data.y) acc += v * v;
            return std::sqrt(acc / static_cast<double>(data.y.size()));
        };
        const double r1 = rms_for(0.1), r2 = rms_for(0.2);
        CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(0.2));
    }

    SUBCASE("noise cutoff above the ARX Nyquist is rejected") {
        SysidConfig bad = cfg;
        bad.noise_cutoff_hz = 20.0;  // ARX Nyquist at m=10, 2.8 Hz is 14 Hz
        Rig r2 = rig;
        CHECK_THROWS_AS(collect_perturbed_data(r2, orbit, bad), std::invalid_argument);
    }
}

TEST_CASE("linear plant multipliers from the closed loop match the oracle") {
    RigParams params = linear_params();
    Rig rig(params, {500.0, 40.0, true});
    const double omega = kTwoPi * 2.8;
    const ContinuationPoint orbit = stable_orbit(omega, 0.02, rig);

    SysidConfig cfg;
    cfg.perturbation_amplitude = 0.1;
    cfg.n_periods = 200;
    cfg.repeats = 3;
    cfg.seed = 2024;

    const FloquetEstimate est = estimate_floquet(rig, orbit, cfg);
    const double period = kTwoPi / omega;
    const double w0 = params.natural_frequency, z = params.damping_ratio;
    const double expected_mod = std::exp(-z * w0 * period);
    const double expected_arg = w0 * std::sqrt(1.0 - z * z) * period;

    const auto& mu = est.result().multipliers;
    REQUIRE(mu.size() >= 2);
    CHECK(std::abs(mu[0]) == doctest::Approx(expected_mod).epsilon(0.02));
    const double arg = std::abs(std::arg(mu[0]));
    const double ref = std::abs(std::remainder(expected_arg, kTwoPi));
    CHECK(std::abs(arg - ref) < 0.05);
    CHECK(est.stable);
}

TEST_CASE("AIC selects the true order for the 2-D linear plant") {
    RigParams params = linear_params();
    Rig rig(params, {500.0, 40.0, true});
    const double omega = kTwoPi * 2.8;
    const ContinuationPoint orbit = stable_orbit(omega, 0.02, rig);

    int hits = 0;
    const int trials = 5;
    for (int trial = 0; trial < trials; ++trial) {
        SysidConfig cfg;
        cfg.perturbation_amplitude = 0.1;
        cfg.n_periods = 150;
        cfg.seed = 100 + trial;
        Rig r2 = rig;
        const PerturbationRecord data = collect_perturbed_data(r2, orbit, cfg);
        const OrderSelection sel = select_order(data, {10}, {1, 2, 3, 4, 5});
        if (sel.n_order == 2) ++hits;
    }
    CHECK(hits >= (trials + 1) / 2);
}
