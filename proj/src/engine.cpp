#include "cbc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cbc/errors.hpp"

namespace cbc {

namespace {

// Coefficient-norm distance between two series of equal truncation.
double coeff_distance(const FourierSeries& a, const FourierSeries& b) {
    double s = 0.25 * (a.a0 - b.a0) * (a.a0 - b.a0);
    for (std::size_t j = 0; j < a.harmonics.size(); ++j) {
        const double da = a.harmonics[j].first - b.harmonics[j].first;
        const double db = a.harmonics[j].second - b.harmonics[j].second;
        s += da * da + db * db;
    }
    return std::sqrt(s);
}

}  // namespace

Measurement settle_and_measure(Rig& rig, const ControlTarget& target, const Forcing& forcing,
                               int settle_periods, int measure_periods,
                               std::size_t n_harmonics, double settle_tol) {
    if (measure_periods < 2) throw std::invalid_argument("measure_periods must be >= 2");
    if (settle_periods > 0) rig.run_segment(target.series, forcing, settle_periods);

    Measurement m;
    m.record = rig.run_segment(target.series, forcing, measure_periods);
    m.final_state = rig.state();

    const auto& rec = m.record;
    const std::size_t per = static_cast<std::size_t>(rec.samples_per_period);
    m.response = fourier_coeffs(rec.x, rec.dt, rec.t0, forcing.omega, n_harmonics);
    m.control = fourier_coeffs(rec.u, rec.dt, rec.t0, forcing.omega, n_harmonics);

    // Settled when the last two consecutive per-period coefficient vectors drift
    // below tolerance.
    const auto period_coeffs = [&](int k_from_end) {
        const std::size_t offset = rec.size() - per * static_cast<std::size_t>(k_from_end);
        return fourier_coeffs(std::span(rec.x).subspan(offset, per), rec.dt,
                              rec.t0 + static_cast<double>(offset) * rec.dt, forcing.omega,
                              n_harmonics);
    };
    const FourierSeries c1 = period_coeffs(3);
    const FourierSeries c2 = period_coeffs(2);
    const FourierSeries c3 = period_coeffs(1);
    const double drift = std::max(coeff_distance(c2, c1), coeff_distance(c3, c2));
    if (drift > settle_tol)
        throw NotSettled("periodic steady state not reached: per-period coefficient drift " +
                         std::to_string(drift) + " > " + std::to_string(settle_tol));
    return m;
}

double noninvasiveness_residual(const FourierSeries& control_action) {
    double s = 0.25 * control_action.a0 * control_action.a0;
    for (std::size_t j = 1; j < control_action.harmonics.size(); ++j) {
        const auto& [aj, bj] = control_action.harmonics[j];
        s += aj * aj + bj * bj;
    }
    return std::sqrt(s);
}

FixedPointResult fixed_point_harmonics(Rig& rig, const ControlTarget& initial,
                                       const Forcing& forcing, double tol, int max_iter,
                                       const EngineConfig& config) {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (!rig.controller().enabled)
        throw std::invalid_argument("fixed_point_harmonics requires the controller enabled");

    ControlTarget target = initial;
    const auto frozen = target.fundamental();
    const double settle_tol =
        std::max(config.settle_tol_rel * std::hypot(frozen.first, frozen.second), config.tol_floor);

    for (int iter = 0;; ++iter) {
        Measurement m = settle_and_measure(rig, target, forcing, config.settle_periods,
                                           config.measure_periods, config.n_harmonics, settle_tol);
        const double residual = noninvasiveness_residual(m.control);
        if (residual <= tol) {
            FixedPointResult result;
            result.target = target;
            result.response = m.response;
            result.control = m.control;
            result.residual = residual;
            result.iterations = iter;
            result.final_state = m.final_state;
            result.record = std::move(m.record);
            return result;
        }
        if (iter >= max_iter)
            throw FixedPointDiverged("fixed-point iteration on higher harmonics did not reach " +
                                         std::to_string(tol) + " (residual " +
                                         std::to_string(residual) + " after " +
                                         std::to_string(iter) + " iterations)",
                                     residual, iter);
        // Non-fundamental target coefficients take the measured response values;
        // the fundamental pair stays frozen.
        target.series.a0 = m.response.a0;
        for (std::size_t j = 1; j < target.series.harmonics.size(); ++j)
            target.series.harmonics[j] = m.response.harmonics[j];
        target.series.harmonics[0] = frozen;
    }
}

ContinuationRun continuation_sweep(Rig& rig, double omega,
                                   const std::vector<double>& amplitude_grid,
                                   const EngineConfig& config) {
    if (amplitude_grid.empty()) throw std::invalid_argument("amplitude grid is empty");
    const bool increasing = amplitude_grid.size() < 2 || amplitude_grid[1] >= amplitude_grid[0];
    for (std::size_t k = 1; k < amplitude_grid.size(); ++k) {
        if ((amplitude_grid[k] >= amplitude_grid[k - 1]) != increasing)
            throw std::invalid_argument("amplitude grid must be monotone");
    }

    ContinuationRun run;
    run.omega = omega;
    run.amplitude_grid = amplitude_grid;
    run.tol_rel = config.tol_rel;

    const Forcing forcing{0.0, 0.0, omega};  // the controller supplies the fundamental input
    ControlTarget target(omega, config.n_harmonics);

    for (std::size_t k = 0; k < amplitude_grid.size(); ++k) {
        const double amplitude = amplitude_grid[k];
        target.series.harmonics[0] = {amplitude, 0.0};  // phase convention B1* = 0
        const double tol = std::max(config.tol_rel * std::abs(amplitude), config.tol_floor);
        try {
            FixedPointResult fp = fixed_point_harmonics(rig, target, forcing, tol,
                                                        config.max_iter, config);
            target = fp.target;  // warm start for the next grid value

            ContinuationPoint pt;
            pt.omega = omega;
            const auto [a1u, b1u] = fp.control.harmonics.at(0);
            const EffectiveForcing eff = effective_forcing(forcing.a, forcing.b, a1u, b1u);
            pt.gamma = eff.gamma;
            pt.phase = eff.phase;
            pt.target_amplitude = amplitude;
            pt.response = fp.response;
            pt.control = fp.control;
            pt.target = fp.target;
            pt.residual = fp.residual;
            pt.state = fp.final_state;
            if (config.keep_records) {
                pt.record_index = static_cast<int>(run.records.size());
                run.records.push_back(std::move(fp.record));
            }
            run.points.push_back(std::move(pt));
        } catch (const DisplacementLimitExceeded& e) {
            run.aborted_reason = "displacement limit at grid index " + std::to_string(k) +
                                 " (amplitude " + std::to_string(amplitude) + "): " + e.what();
            break;
        } catch (const FixedPointDiverged& e) {
            throw FixedPointDiverged("grid index " + std::to_string(k) + " (amplitude " +
                                         std::to_string(amplitude) + "): " + e.what(),
                                     e.residual, e.iterations);
        }
    }
    return run;
}

}  // namespace cbc
