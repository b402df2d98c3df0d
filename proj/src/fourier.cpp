#include "cbc/fourier.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cbc/errors.hpp"

namespace cbc {

double FourierSeries::period() const { return 2.0 * std::numbers::pi / omega; }

double FourierSeries::value(double t) const {
    double v = 0.5 * a0;
    for (std::size_t j = 0; j < harmonics.size(); ++j) {
        const double jwt = static_cast<double>(j + 1) * omega * t;
        v += harmonics[j].first * std::cos(jwt) + harmonics[j].second * std::sin(jwt);
    }
    return v;
}

double FourierSeries::derivative(double t) const {
    double v = 0.0;
    for (std::size_t j = 0; j < harmonics.size(); ++j) {
        const double jw = static_cast<double>(j + 1) * omega;
        v += jw * (-harmonics[j].first * std::sin(jw * t) + harmonics[j].second * std::cos(jw * t));
    }
    return v;
}

double FourierSeries::coefficient_norm() const {
    double s = 0.25 * a0 * a0;
    for (const auto& [aj, bj] : harmonics) s += aj * aj + bj * bj;
    return std::sqrt(s);
}

FourierSeries fourier_coeffs(std::span<const double> samples, double dt, double t0,
                             double omega, std::size_t n_harmonics) {
    const double period = 2.0 * std::numbers::pi / omega;
    const double span = static_cast<double>(samples.size()) * dt;
    const double periods = span / period;
    if (samples.empty() || std::abs(periods - std::round(periods)) * period > 0.5 * dt ||
        std::round(periods) < 1.0) {
        throw NonIntegerPeriodSpan("record spans " + std::to_string(periods) +
                                   " periods; an integer span >= 1 is required");
    }

    // On a period-locked uniform grid the trapezoidal rule reduces to the
    // rectangle sum over one pass of the periodic extension.
    FourierSeries series(omega, n_harmonics);
    const double scale = 2.0 / static_cast<double>(samples.size());
    double sum0 = 0.0;
    std::vector<double> sc(n_harmonics, 0.0), ss(n_harmonics, 0.0);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        const double v = samples[k];
        sum0 += v;
        for (std::size_t j = 0; j < n_harmonics; ++j) {
            const double jwt = static_cast<double>(j + 1) * omega * t;
            sc[j] += v * std::cos(jwt);
            ss[j] += v * std::sin(jwt);
        }
    }
    series.a0 = scale * sum0;
    for (std::size_t j = 0; j < n_harmonics; ++j) series.harmonics[j] = {scale * sc[j], scale * ss[j]};
    return series;
}

FourierSeries fourier_coeffs_tail(std::span<const double> samples, double dt, double t0,
                                  double omega, std::size_t n_harmonics, int periods) {
    const double period = 2.0 * std::numbers::pi / omega;
    const auto per_period = static_cast<std::size_t>(std::llround(period / dt));
    const std::size_t want = per_period * static_cast<std::size_t>(periods);
    if (want == 0 || want > samples.size())
        throw NonIntegerPeriodSpan("record shorter than the requested averaging window");
    const std::size_t offset = samples.size() - want;
    return fourier_coeffs(samples.subspan(offset), dt, t0 + static_cast<double>(offset) * dt,
                          omega, n_harmonics);
}

double response_amplitude(const FourierSeries& series) {
    if (series.harmonics.empty()) return 0.0;
    return std::hypot(series.harmonics[0].first, series.harmonics[0].second);
}

double EffectiveForcing::a() const { return gamma * std::cos(phase); }
double EffectiveForcing::b() const { return -gamma * std::sin(phase); }

EffectiveForcing effective_forcing(double a, double b, double a1u, double b1u) {
    const double ca = a + a1u;
    const double cb = b + b1u;
    return {std::hypot(ca, cb), std::atan2(-cb, ca)};
}

DelayEmbedding delay_embed(std::span<const double> samples, std::span<const double> times,
                           std::size_t delay_samples, double dt) {
    if (delay_samples == 0 || delay_samples >= samples.size())
        throw DelayTooLong("delay of " + std::to_string(delay_samples) +
                           " samples on a record of " + std::to_string(samples.size()));
    DelayEmbedding emb;
    emb.delay_samples = delay_samples;
    emb.tau = static_cast<double>(delay_samples) * dt;
    const std::size_t n = samples.size() - delay_samples;
    emb.x.reserve(n);
    emb.x_delayed.reserve(n);
    emb.t.reserve(n);
    for (std::size_t k = delay_samples; k < samples.size(); ++k) {
        emb.x.push_back(samples[k]);
        emb.x_delayed.push_back(samples[k - delay_samples]);
        emb.t.push_back(times.empty() ? static_cast<double>(k) * dt : times[k]);
    }
    return emb;
}

double parseval_power(const FourierSeries& series) {
    double p = 0.25 * series.a0 * series.a0;
    for (const auto& [aj, bj] : series.harmonics) p += 0.5 * (aj * aj + bj * bj);
    return p;
}

}  // namespace cbc
