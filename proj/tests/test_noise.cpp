#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "cbc/noise.hpp"

using namespace cbc;

namespace {

// Mean periodogram power at one frequency over non-overlapping segments.
double band_power(const std::vector<double>& xs, double fs, double freq, std::size_t seg_len) {
    const double w = 2.0 * std::numbers::pi * freq / fs;
    double acc = 0.0;
    std::size_t segments = 0;
    for (std::size_t start = 0; start + seg_len <= xs.size(); start += seg_len, ++segments) {
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k < seg_len; ++k) {
            re += xs[start + k] * std::cos(w * k);
            im += xs[start + k] * std::sin(w * k);
        }
        acc += (re * re + im * im) / static_cast<double>(seg_len);
    }
    return acc / static_cast<double>(segments);
}

}  // namespace

TEST_CASE("zero amplitude produces exact zeros") {
    NoiseChannel ch(NoiseConfig{0.0, 10.0, 6, 123}, 1000.0);
    for (int k = 0; k < 100; ++k) CHECK(ch.sample() == 0.0);
}

TEST_CASE("box-muller stream has the right first two moments") {
    GaussianSource g(2024);
    const std::size_t n = 1'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double v = g.next();
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("butterworth(6) attenuates 2x cutoff by at least 35 dB") {
    const double fs = 1000.0, fc = 10.0;
    NoiseChannel ch(NoiseConfig{1.0, fc, 6, 7}, fs);
    const std::size_t n = 1u << 20;
    std::vector<double> xs(n);
    for (auto& v : xs) v = ch.sample();

    const std::size_t seg = 4000;  // 0.25 Hz bins align with the probe frequencies
    double passband = 0.0;
    const std::vector<double> pass_freqs{2.0, 3.0, 4.0, 5.0};
    for (double f : pass_freqs) passband += band_power(xs, fs, f, seg);
    passband /= static_cast<double>(pass_freqs.size());
    const double stopband = band_power(xs, fs, 2.0 * fc, seg);
    const double attenuation_db = 10.0 * std::log10(passband / stopband);
    CHECK(attenuation_db >= 35.0);
}

TEST_CASE("filter passes DC at unit gain") {
    auto sections = butterworth_lowpass(6, 10.0, 1000.0);
    double v = 0.0;
    for (int k = 0; k < 5000; ++k) {
        v = 1.0;
        for (auto& s : sections) v = s.step(v);
    }
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("identical seeds give identical streams") {
    NoiseChannel a(NoiseConfig{0.5, 10.0, 6, 42}, 1000.0);
    NoiseChannel b(NoiseConfig{0.5, 10.0, 6, 42}, 1000.0);
    for (int k = 0; k < 1000; ++k) CHECK(a.sample() == b.sample());
}
