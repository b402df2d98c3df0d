#include "cbc/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cbc {

double GaussianSource::next() {
    if (has_spare) {
        has_spare = false;
        return spare;
    }
    const double u1 = rng.next_open_closed();
    const double u2 = rng.next_closed_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare = r * std::sin(theta);
    has_spare = true;
    return r * std::cos(theta);
}

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
    if (order <= 0 || order % 2 != 0)
        throw std::invalid_argument("butterworth_lowpass: order must be a positive even number");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_rate_hz))
        throw std::invalid_argument("butterworth_lowpass: cutoff must lie in (0, Nyquist)");

    // Prewarp so the digital cutoff lands exactly at cutoff_hz.
    const double dt = 1.0 / sample_rate_hz;
    const double warped = 2.0 / dt * std::tan(std::numbers::pi * cutoff_hz * dt);
    const double k = 2.0 / dt;

    std::vector<Biquad> sections;
    sections.reserve(static_cast<std::size_t>(order / 2));
    for (int s = 0; s < order / 2; ++s) {
        // Analog section w^2 / (p^2 + 2 zeta w p + w^2) with the Butterworth
        // damping ratios zeta = sin((2s+1) pi / (2 order)).
        const double zeta = std::sin((2.0 * s + 1.0) * std::numbers::pi / (2.0 * order));
        const double w = warped;
        const double a0 = k * k + 2.0 * zeta * w * k + w * w;
        Biquad q;
        q.b0 = w * w / a0;
        q.b1 = 2.0 * w * w / a0;
        q.b2 = w * w / a0;
        q.a1 = (2.0 * w * w - 2.0 * k * k) / a0;
        q.a2 = (k * k - 2.0 * zeta * w * k + w * w) / a0;
        sections.push_back(q);
    }
    return sections;
}

NoiseChannel::NoiseChannel(const NoiseConfig& config, double sample_rate_hz)
    : config_(config), gauss_(config.seed) {
    if (config.amplitude != 0.0)
        sections_ = butterworth_lowpass(config.filter_order, config.cutoff_hz, sample_rate_hz);
}

double NoiseChannel::sample() {
    if (config_.amplitude == 0.0) return 0.0;
    double v = config_.amplitude * gauss_.next();
    for (auto& s : sections_) v = s.step(v);
    return v;
}

void NoiseChannel::reset_states() {
    for (auto& s : sections_) s.s1 = s.s2 = 0.0;
    gauss_ = GaussianSource(config_.seed);
}

std::vector<double> NoiseChannel::filter_state() const {
    std::vector<double> out;
    out.reserve(sections_.size() * 2);
    for (const auto& s : sections_) {
        out.push_back(s.s1);
        out.push_back(s.s2);
    }
    return out;
}

}  // namespace cbc
