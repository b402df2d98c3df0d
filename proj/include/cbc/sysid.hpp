// Closed-loop identification of the time-varying linearisation around a
// stabilised orbit via a periodic banded ARX model, and extraction of the
// monodromy matrix, Floquet multipliers and eigendirections.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "cbc/engine.hpp"
#include "cbc/rig.hpp"

namespace cbc {

// Perturbed closed- or open-loop data around a reference orbit, kept at the
// full rig grid (rig_samples_per_period divisible by the designed ARX phase
// count, so coarser phase grids can be formed by decimation).
struct PerturbationRecord {
    double omega = 0.0;
    double dt = 0.0;
    int rig_samples_per_period = 0;
    int m_samples = 0;  // designed ARX phase count
    int n_periods = 0;

    // Reference orbit and input over one period.
    std::vector<double> ref_x, ref_i, ref_u;
    // Deviations from the reference over n_periods, plus decomposition channels.
    std::vector<double> y, k, eta, u;

    // Deviation channels decimated to an m-point phase grid per period.
    struct Decimated {
        std::vector<double> y, k;
        int m = 0;
    };
    Decimated decimate(int m) const;  // requires m | rig_samples_per_period
};

struct ArxOptions {
    bool ridge = false;             // ridge fallback for rank-deficient rows
    double ridge_lambda_scale = 1e-8;  // lambda = scale * trace(X^T X)
    double condition_threshold = 1e10;
    double min_rows_factor = 3.0;   // rows per phase >= factor * (2n+1)
};

// Periodic banded ARX model B(q^-1) y = A(q^-1) k + e with first-order
// polynomial entries: exactly m(2n+1) free coefficients. Coefficients are
// stored per phase s = (sample index mod m); the row of the banded matrices
// carrying phase s is ((m - s) mod m) + 1 in 1-based terms.
struct ArxModel {
    int m_samples = 0;
    int n_order = 0;
    Eigen::MatrixXd b;  // m x n, paper sign convention (left-hand side)
    Eigen::MatrixXd a;  // m x (n+1), a(s,0) is the instantaneous input gain
    std::vector<double> rss_per_phase;
    std::vector<int> rows_per_phase;

    int coefficient_count() const { return m_samples * (2 * n_order + 1); }
    double rss() const;
    long total_rows() const;

    // Banded matrices with the backward-shift operator evaluated at z.
    Eigen::MatrixXd B_at(double z) const;
    Eigen::MatrixXd A_at(double z) const;
};

struct FloquetResult {
    Eigen::MatrixXd monodromy;  // n x n, acts on (y(T), y(T-1/m), ..., y(T-(n-1)/m))
    std::vector<std::complex<double>> multipliers;  // |mu| descending
    Eigen::MatrixXcd eigendirections;               // column j pairs with multipliers[j]
    bool stable = true;
    double condition_b0 = 0.0;
    double rss = 0.0;
    int m_samples = 0;
    int n_order = 0;
};

struct SysidConfig {
    int m_samples = 10;
    int n_order = 4;
    bool auto_order = false;  // run AIC selection instead of the fixed (m, n)
    std::vector<int> m_candidates = {10};
    std::vector<int> n_candidates = {1, 2, 3, 4, 5, 6};
    double perturbation_amplitude = 0.5;
    double noise_cutoff_hz = 10.0;
    int noise_filter_order = 6;
    double ambient_amplitude = 0.0;  // unmeasured disturbance floor (enters the
                                     // plant, not the recorded input channel)
    double ambient_cutoff_hz = 10.0;
    int n_periods = 200;
    int discard_periods = 5;   // filter/loop warm-up after the noise switches on
    int settle_periods = 10;   // noise-free re-settling onto the orbit
    int repeats = 10;
    std::uint64_t seed = 1;
    bool closed_loop = true;
    double stability_margin_scale = 3.0;  // unstable when mean > 1 + scale * ci
    ArxOptions arx;
};

// Re-establishes the orbit on the m-aligned grid, measures the reference
// (x_hat, i_hat) over one period, then injects filtered noise and collects
// n_periods of deviations. Requires the noise cutoff below the ARX Nyquist
// frequency m * omega / (4 pi).
PerturbationRecord collect_perturbed_data(Rig& rig, const ContinuationPoint& orbit,
                                          const SysidConfig& config);

// Per-phase ordinary least squares on the banded regression. Throws
// RankDeficient when a phase row is conditioned worse than the threshold and
// the ridge fallback is off.
ArxModel fit_arx(const PerturbationRecord& data, int m_samples, int n_order,
                 const ArxOptions& options = {});

struct OrderScore {
    int m_samples, n_order;
    double aic;
    double rss;
    long rows;
};
struct OrderSelection {
    int m_samples, n_order;
    std::vector<OrderScore> table;
};

// AIC = N ln(RSS/N) + 2 m (2n+1) over the candidate grid; ties break toward
// smaller n, then smaller m.
OrderSelection select_order(const PerturbationRecord& data, const std::vector<int>& m_range,
                            const std::vector<int>& n_range, const ArxOptions& options = {});

// One-period map from the fitted model: the leading n x n block of
// -B(0)^-1 (B(1) - B(0)). The sign makes the map y(T) <- q^-1 y(T) explicit
// (calibrated against the variational oracle on the linear plant).
FloquetResult monodromy(const ArxModel& model);

struct FloquetEstimate {
    std::vector<FloquetResult> repeats;
    // Mean and 95% confidence half-width of the two dominant multiplier moduli.
    double mean_abs[2] = {0.0, 0.0};
    double ci_half_width[2] = {0.0, 0.0};
    int representative = 0;  // repeat whose dominant modulus is nearest the mean
    bool stable = true;

    const FloquetResult& result() const { return repeats.at(representative); }
};

// collect -> fit -> monodromy, repeated with independent noise seeds.
FloquetEstimate estimate_floquet(const Rig& rig_template, const ContinuationPoint& orbit,
                                 const SysidConfig& config);

// Deterministic seed splitting for repeats/commands.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

}  // namespace cbc
