// Filtered-Gaussian perturbation source: a counter-based 64-bit generator
// feeding a Box-Muller transform, shaped by a discretised Butterworth
// low-pass (bilinear transform, prewarped at the cutoff).
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cbc {

struct NoiseConfig {
    double amplitude = 0.0;       // std of the unfiltered Gaussian stream [input units]
    double cutoff_hz = 10.0;      // Butterworth cutoff [Hz]
    int filter_order = 6;         // even order, realised as second-order sections
    std::uint64_t seed = 0;
};

// Counter-based generator (splitmix64). State is the counter alone, so the
// stream is seekable and bitwise reproducible.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // Uniform in (0, 1].
    double next_open_closed() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }
    // Uniform in [0, 1).
    double next_closed_open() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }
};

// Box-Muller on top of SplitMix64; two uniforms per Gaussian pair, the spare
// value is cached.
struct GaussianSource {
    SplitMix64 rng;
    double spare = 0.0;
    bool has_spare = false;

    explicit GaussianSource(std::uint64_t seed = 0) : rng(seed) {}
    double next();
};

// One biquad in transposed direct form II: two state values per section.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;  // numerator
    double a1 = 0.0, a2 = 0.0;            // denominator (monic)
    double s1 = 0.0, s2 = 0.0;            // internal state

    double step(double in) {
        const double out = b0 * in + s1;
        s1 = b1 * in - a1 * out + s2;
        s2 = b2 * in - a2 * out;
        return out;
    }
};

// Low-pass Butterworth of even order as a cascade of second-order sections,
// discretised by the bilinear transform with prewarping at the cutoff.
std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz);

// Complete filtered-noise channel. `sample()` draws one Gaussian, scales by
// amplitude and runs the filter cascade; the full state (six filter values
// for order 6, plus the generator counter) lives here.
class NoiseChannel {
public:
    NoiseChannel() = default;
    NoiseChannel(const NoiseConfig& config, double sample_rate_hz);

    double sample();
    void reset_states();
    const NoiseConfig& config() const { return config_; }

    // Flat view of the cascade state (2 values per section).
    std::vector<double> filter_state() const;

private:
    NoiseConfig config_;
    GaussianSource gauss_;
    std::vector<Biquad> sections_;
};

}  // namespace cbc
