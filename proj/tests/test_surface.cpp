#include <doctest.h>

#include <cmath>

#include "cbc/errors.hpp"
#include "cbc/noise.hpp"
#include "cbc/surface.hpp"
#include "test_helpers.hpp"

using namespace cbc;
using namespace cbc::testing;

namespace {

// G(A) = A^3 - A + 2, omega-independent: folds at A = +-1/sqrt(3).
struct CubicSurface : Surface {
    double value(double, double a) const override { return a * a * a - a + 2.0; }
    double d_amplitude(double, double a) const override { return 3.0 * a * a - 1.0; }
    double d2_amplitude(double, double a) const override { return 6.0 * a; }
    double d_omega(double, double) const override { return 0.0; }
};

// Linear-plant surface gamma = A / |H(i omega)|.
struct LinearSurface : Surface {
    RigParams p = linear_params();
    double value(double w, double a) const override { return a / linear_gain(p, w); }
    double d_amplitude(double w, double) const override { return 1.0 / linear_gain(p, w); }
    double d2_amplitude(double, double) const override { return 0.0; }
    double d_omega(double w, double a) const override {
        const double h = 1e-6 * w;
        return (value(w + h, a) - value(w - h, a)) / (2.0 * h);
    }
};

std::vector<SurfacePoint> plane_samples(int nw, int na) {
    std::vector<SurfacePoint> pts;
    for (int i = 0; i < nw; ++i)
        for (int j = 0; j < na; ++j) {
            const double w = 17.0 + 2.0 * i / (nw - 1);
            const double a = 0.01 + 0.04 * j / (na - 1);
            pts.push_back({w, a, a});  // G(omega, A) = A
        }
    return pts;
}

}  // namespace

TEST_CASE("gp interpolates a smooth plane") {
    const auto train = plane_samples(7, 7);
    GpOptions opts;
    opts.seed = 3;
    const GpSurface gp = GpSurface::fit(train, opts);

    // Held-out lattice midpoints.
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            const double w = 17.0 + 2.0 * (i + 0.5) / 6.0;
            const double a = 0.01 + 0.04 * (j + 0.5) / 6.0;
            CHECK(std::abs(gp.value(w, a) - a) < 1e-3);
        }

    SUBCASE("posterior mean reproduces training targets within 3 sigma_noise") {
        const double sigma = gp.hyperparameters().noise_sigma * gp.gamma_scale();
        for (const auto& p : train)
            CHECK(std::abs(gp.value(p.omega, p.amplitude) - p.gamma) <= 3.0 * sigma + 1e-9);
    }

    SUBCASE("analytic amplitude gradient matches finite differences") {
        const double w = 18.0, a = 0.03, h = 1e-6;
        const double fd = (gp.value(w, a + h) - gp.value(w, a - h)) / (2.0 * h);
        const double an = gp.d_amplitude(w, a);
        CHECK(std::abs(an - fd) / std::max(1.0, std::abs(an)) < 1e-6);
    }

    SUBCASE("far outside the hull the variance reverts to the prior") {
        const auto [mean_in, var_in] = gp.predict(18.0, 0.03);
        const auto [mean_out, var_out] = gp.predict(40.0, 0.5);
        const double sf = gp.hyperparameters().signal_sigma * gp.gamma_scale();
        CHECK(var_out >= 0.5 * sf * sf);
        CHECK(var_out > var_in);
    }
}

TEST_CASE("single noise-free training point is interpolated exactly") {
    GpOptions opts;
    opts.optimise = false;
    opts.initial = {1.0, 1.0, 1.0, 1e-7};
    const GpSurface gp = GpSurface::fit({{18.0, 0.03, 1.234}}, opts);
    const auto [mean, var] = gp.predict(18.0, 0.03);
    CHECK(mean == doctest::Approx(1.234).epsilon(1e-9));
    CHECK(var < 1e-6);
}

TEST_CASE("gp_fit with optimisation requires ten points") {
    CHECK_THROWS_AS(GpSurface::fit(plane_samples(2, 2)), std::invalid_argument);
}

TEST_CASE("fold_curve finds the cubic's stationary points") {
    const CubicSurface cubic;
    FoldOptions opts;
    opts.amplitude_range = {-2.0, 2.0};
    opts.omega_steps = 11;
    const auto curve = fold_curve(cubic, {0.0, 1.0}, opts);
    REQUIRE(!curve.empty());
    const double root = 1.0 / std::sqrt(3.0);
    for (const auto& p : curve) {
        CHECK(std::abs(std::abs(p.amplitude) - root) < 1e-6);
        CHECK(p.residual <= 1e-8);
        CHECK(p.gamma == doctest::Approx(cubic.value(p.omega, p.amplitude)).epsilon(1e-12));
    }
    // Both signs present: the two branches.
    bool has_pos = false, has_neg = false;
    for (const auto& p : curve) (p.amplitude > 0 ? has_pos : has_neg) = true;
    CHECK(has_pos);
    CHECK(has_neg);
}

TEST_CASE("fold_curve reports NoFold on a monotone surface") {
    const LinearSurface lin;
    FoldOptions opts;
    opts.amplitude_range = {0.005, 0.05};
    opts.omega_steps = 11;
    CHECK_THROWS_AS(fold_curve(lin, {kTwoPi * 2.4, kTwoPi * 3.0}, opts), NoFold);
}

TEST_CASE("frequency_response traces the linear resonance curve") {
    const LinearSurface lin;
    SliceOptions opts;
    opts.omega_range = {kTwoPi * 2.2, kTwoPi * 3.2};
    opts.amplitude_range = {0.001, 0.06};
    const double gamma = 0.3;
    const auto branches = frequency_response(lin, gamma, opts);
    REQUIRE(!branches.empty());

    std::size_t checked = 0;
    for (const auto& br : branches)
        for (std::size_t i = 0; i < br.omega.size(); i += 5) {
            const double expected = gamma * linear_gain(lin.p, br.omega[i]);
            if (expected < opts.amplitude_range.second) {
                CHECK(br.amplitude[i] == doctest::Approx(expected).epsilon(0.02));
                ++checked;
            }
        }
    CHECK(checked > 10);

    SUBCASE("no fold points on a single-valued curve") {
        for (const auto& br : branches)
            for (bool f : br.is_fold) CHECK_FALSE(f);
    }
}

TEST_CASE("frequency_response reports an empty level set") {
    const LinearSurface lin;
    SliceOptions opts;
    opts.omega_range = {kTwoPi * 2.2, kTwoPi * 3.2};
    opts.amplitude_range = {0.001, 0.06};
    CHECK_THROWS_AS(frequency_response(lin, 1e6, opts), NoIntersection);
}
