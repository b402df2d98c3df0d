// Fourier analysis/synthesis of periodic signals on uniform period-locked
// grids, effective-forcing computation and delay embedding.
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace cbc {

// Truncated Fourier series
//   value(t) = a0/2 + sum_j a[j-1] cos(j w t) + b[j-1] sin(j w t).
struct FourierSeries {
    double omega = 0.0;  // fundamental frequency [rad/s]
    double a0 = 0.0;     // mean coefficient (mean value is a0/2)
    std::vector<std::pair<double, double>> harmonics;  // (A_j, B_j), j = 1..n

    FourierSeries() = default;
    FourierSeries(double omega, std::size_t n_harmonics)
        : omega(omega), harmonics(n_harmonics, {0.0, 0.0}) {}

    std::size_t n_harmonics() const { return harmonics.size(); }
    double period() const;

    // Series value at time t.
    double value(double t) const;
    // Analytic time derivative at time t.
    double derivative(double t) const;

    // Euclidean norm of the full coefficient vector (a0/2 included).
    double coefficient_norm() const;
};

// Estimates Fourier coefficients of a uniformly sampled channel spanning an
// integer number of periods 2*pi/omega. Quadrature is the trapezoidal rule on
// the periodic extension of the grid (exact for band-limited content).
// `dt` is the sample spacing and `t0` the time of samples[0].
//
// Throws NonIntegerPeriodSpan when samples.size()*dt is not an integer
// multiple of the period within half a sample.
FourierSeries fourier_coeffs(std::span<const double> samples, double dt, double t0,
                             double omega, std::size_t n_harmonics);

// Same, restricted to the trailing `periods` periods of the channel
// (averaging window against noise).
FourierSeries fourier_coeffs_tail(std::span<const double> samples, double dt, double t0,
                                  double omega, std::size_t n_harmonics, int periods);

// Magnitude of the fundamental component, sqrt(A1^2 + B1^2).
double response_amplitude(const FourierSeries& series);

// Lumps the fundamental control-action coefficients into the forcing term:
//   gamma = sqrt((a + A1u)^2 + (b + B1u)^2),
// so the total fundamental input is gamma*cos(omega t + phase).
struct EffectiveForcing {
    double gamma;
    double phase;  // no contract attached; reported for replay convenience

    // (a, b) pair such that a*cos(w t) + b*sin(w t) = gamma*cos(w t + phase).
    double a() const;
    double b() const;
};
EffectiveForcing effective_forcing(double a, double b, double a1u, double b1u);

// Pairs (x(t), x(t - tau)) on the common grid; tau is a whole number of
// samples. Optionally carries t mod period for 3-D projections.
struct DelayEmbedding {
    double tau = 0.0;          // delay [s]
    std::size_t delay_samples = 0;
    std::vector<double> x;          // x(t)
    std::vector<double> x_delayed;  // x(t - tau)
    std::vector<double> t;          // sample times of the x channel
};

DelayEmbedding delay_embed(std::span<const double> samples, std::span<const double> times,
                           std::size_t delay_samples, double dt);

// Mean signal power predicted by the coefficients, a0^2/4 + 1/2 sum(Aj^2+Bj^2).
double parseval_power(const FourierSeries& series);

}  // namespace cbc
