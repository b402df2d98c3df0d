#include "cbc/sysid.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cbc/errors.hpp"

namespace cbc {

PerturbationRecord::Decimated PerturbationRecord::decimate(int m) const {
    if (m < 1 || rig_samples_per_period % m != 0)
        throw std::invalid_argument("phase count " + std::to_string(m) +
                                    " does not divide the rig grid of " +
                                    std::to_string(rig_samples_per_period));
    const int stride = rig_samples_per_period / m;
    Decimated out;
    out.m = m;
    const std::size_t total = static_cast<std::size_t>(n_periods) * m;
    out.y.reserve(total);
    out.k.reserve(total);
    for (std::size_t g = 0; g < total; ++g) {
        out.y.push_back(y[g * stride]);
        out.k.push_back(k[g * stride]);
    }
    return out;
}

double ArxModel::rss() const {
    double s = 0.0;
    for (double r : rss_per_phase) s += r;
    return s;
}

long ArxModel::total_rows() const {
    long s = 0;
    for (int r : rows_per_phase) s += r;
    return s;
}

namespace {

// Paper row index (0-based) carrying the coefficients of stream phase s.
inline int phase_to_row(int s, int m) { return (m - s) % m; }

}  // namespace

Eigen::MatrixXd ArxModel::B_at(double z) const {
    const int m = m_samples, n = n_order;
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(m, m);
    for (int s = 0; s < m; ++s) {
        const int row = phase_to_row(s, m);
        for (int j = 1; j <= n; ++j) {
            const int col = row + j;
            if (col < m)
                B(row, col) += b(s, j - 1);
            else
                B(row, col - m) += b(s, j - 1) * z;  // wrap-around, one period back
        }
    }
    return B;
}

Eigen::MatrixXd ArxModel::A_at(double z) const {
    const int m = m_samples, n = n_order;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    for (int s = 0; s < m; ++s) {
        const int row = phase_to_row(s, m);
        A(row, row) += a(s, 0);
        for (int j = 1; j <= n; ++j) {
            const int col = row + j;
            if (col < m)
                A(row, col) += a(s, j);
            else
                A(row, col - m) += a(s, j) * z;
        }
    }
    return A;
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    SplitMix64 g(master ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    g.next_u64();
    g.state += index;
    return g.next_u64();
}

PerturbationRecord collect_perturbed_data(Rig& rig, const ContinuationPoint& orbit,
                                          const SysidConfig& config) {
    if (config.perturbation_amplitude < 0.0)
        throw std::invalid_argument("perturbation amplitude must be >= 0");
    const double omega = orbit.omega;
    const double arx_nyquist_hz = static_cast<double>(config.m_samples) * omega /
                                  (4.0 * std::numbers::pi);
    if (config.perturbation_amplitude > 0.0 && !(config.noise_cutoff_hz < arx_nyquist_hz))
        throw std::invalid_argument("noise cutoff " + std::to_string(config.noise_cutoff_hz) +
                                    " Hz must stay below the ARX Nyquist frequency " +
                                    std::to_string(arx_nyquist_hz) + " Hz");

    const Forcing forcing = rig.controller().enabled
                                ? Forcing{0.0, 0.0, omega}
                                : Forcing{orbit.gamma * std::cos(orbit.phase),
                                          -orbit.gamma * std::sin(orbit.phase), omega};

    rig.set_state(orbit.state);
    rig.set_noise(NoiseConfig{});  // reference measured noise-free

    // Re-settle on the m-aligned grid, then take the reference period.
    if (config.settle_periods > 0)
        rig.run_segment(orbit.target.series, forcing, config.settle_periods, config.m_samples);
    const SampledRecord ref = rig.run_segment(orbit.target.series, forcing, 1, config.m_samples);

    PerturbationRecord data;
    data.omega = omega;
    data.dt = ref.dt;
    data.rig_samples_per_period = ref.samples_per_period;
    data.m_samples = config.m_samples;
    data.ref_x = ref.x;
    data.ref_i = ref.i;
    data.ref_u = ref.u;

    NoiseConfig noise;
    noise.amplitude = config.perturbation_amplitude;
    noise.cutoff_hz = config.noise_cutoff_hz;
    noise.filter_order = config.noise_filter_order;
    noise.seed = config.seed;
    rig.set_noise(noise);

    if (config.discard_periods > 0)
        rig.run_segment(orbit.target.series, forcing, config.discard_periods, config.m_samples);

    const SampledRecord run =
        rig.run_segment(orbit.target.series, forcing, config.n_periods, config.m_samples);
    data.n_periods = config.n_periods;

    const std::size_t per = static_cast<std::size_t>(run.samples_per_period);
    const std::size_t total = run.size();
    data.y.resize(total);
    data.k.resize(total);
    data.eta = run.eta;
    data.u = run.u;
    for (std::size_t g = 0; g < total; ++g) {
        const std::size_t s = g % per;
        data.y[g] = run.x[g] - data.ref_x[s];
        data.k[g] = run.i[g] - data.ref_i[s];
    }
    return data;
}

ArxModel fit_arx(const PerturbationRecord& data, int m_samples, int n_order,
                 const ArxOptions& options) {
    if (n_order < 1) throw std::invalid_argument("n_order must be >= 1");
    if (!(n_order < m_samples))
        throw std::invalid_argument("ARX requires n_order < m_samples");
    const auto dec = data.decimate(m_samples);
    const int m = m_samples, n = n_order, width = 2 * n + 1;
    const long total = static_cast<long>(dec.y.size());

    ArxModel model;
    model.m_samples = m;
    model.n_order = n;
    model.b.resize(m, n);
    model.a.resize(m, n + 1);
    model.rss_per_phase.assign(m, 0.0);
    model.rows_per_phase.assign(m, 0);

    for (int s = 0; s < m; ++s) {
        // Regression rows: every stream sample g with g mod m == s and full history.
        std::vector<long> rows;
        for (long g = (s >= n) ? s : s + m; g < total; g += m) rows.push_back(g);
        const long nr = static_cast<long>(rows.size());
        if (nr < static_cast<long>(options.min_rows_factor * width))
            throw std::invalid_argument("insufficient data: " + std::to_string(nr) +
                                        " rows for " + std::to_string(width) +
                                        " unknowns at phase " + std::to_string(s));

        Eigen::MatrixXd X(nr, width);
        Eigen::VectorXd Y(nr);
        for (long r = 0; r < nr; ++r) {
            const long g = rows[r];
            Y(r) = dec.y[g];
            for (int j = 1; j <= n; ++j) X(r, j - 1) = dec.y[g - j];
            for (int j = 0; j <= n; ++j) X(r, n + j) = dec.k[g - j];
        }

        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
        const double smax = svd.singularValues()(0);
        const double smin = svd.singularValues()(width - 1);
        const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

        Eigen::VectorXd theta;
        if (cond > options.condition_threshold) {
            if (!options.ridge)
                throw RankDeficient("regressor matrix at phase " + std::to_string(s) +
                                        " has condition number " + std::to_string(cond) +
                                        " (insufficient excitation)",
                                    cond);
            const Eigen::MatrixXd gram = X.transpose() * X;
            const double lambda = options.ridge_lambda_scale * gram.trace();
            theta = (gram + lambda * Eigen::MatrixXd::Identity(width, width))
                        .ldlt()
                        .solve(X.transpose() * Y);
        } else {
            theta = X.colPivHouseholderQr().solve(Y);
        }

        for (int j = 1; j <= n; ++j) model.b(s, j - 1) = -theta(j - 1);  // left-hand-side sign
        for (int j = 0; j <= n; ++j) model.a(s, j) = theta(n + j);
        model.rss_per_phase[s] = (Y - X * theta).squaredNorm();
        model.rows_per_phase[s] = static_cast<int>(nr);
    }
    return model;
}

OrderSelection select_order(const PerturbationRecord& data, const std::vector<int>& m_range,
                            const std::vector<int>& n_range, const ArxOptions& options) {
    OrderSelection sel;
    bool have_best = false;
    double best = 0.0;
    for (int m : m_range) {
        for (int n : n_range) {
            if (!(n < m)) continue;
            const ArxModel model = fit_arx(data, m, n, options);
            const double neff = static_cast<double>(model.total_rows());
            const double aic = neff * std::log(model.rss() / neff) +
                               2.0 * static_cast<double>(model.coefficient_count());
            sel.table.push_back({m, n, aic, model.rss(), model.total_rows()});
            // ties break toward smaller n, then smaller m
            const bool better =
                !have_best || aic < best ||
                (aic == best && (n < sel.n_order || (n == sel.n_order && m < sel.m_samples)));
            if (better) {
                have_best = true;
                best = aic;
                sel.m_samples = m;
                sel.n_order = n;
            }
        }
    }
    if (!have_best) throw std::invalid_argument("no admissible (m, n) pair in the ranges");
    return sel;
}

namespace {

void sort_eigensystem(Eigen::VectorXcd& values, Eigen::MatrixXcd& vectors) {
    const int n = static_cast<int>(values.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        const double mi = std::abs(values(i)), mj = std::abs(values(j));
        if (mi != mj) return mi > mj;
        if (values(i).real() != values(j).real()) return values(i).real() > values(j).real();
        return values(i).imag() > values(j).imag();
    });
    Eigen::VectorXcd v(n);
    Eigen::MatrixXcd w(vectors.rows(), n);
    for (int i = 0; i < n; ++i) {
        v(i) = values(order[i]);
        Eigen::VectorXcd col = vectors.col(order[i]);
        // Deterministic phase: largest component real positive, unit norm.
        int arg_max = 0;
        for (int r = 1; r < col.size(); ++r)
            if (std::abs(col(r)) > std::abs(col(arg_max))) arg_max = r;
        if (std::abs(col(arg_max)) > 0.0) col *= std::abs(col(arg_max)) / col(arg_max);
        col.normalize();
        w.col(i) = col;
    }
    values = v;
    vectors = w;
}

}  // namespace

FloquetResult monodromy(const ArxModel& model) {
    const int n = model.n_order;
    const Eigen::MatrixXd B0 = model.B_at(0.0);
    const Eigen::MatrixXd B1diff = model.B_at(1.0) - B0;

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(B0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double cond = smin > 0.0 ? svd.singularValues()(0) / smin
                                   : std::numeric_limits<double>::infinity();
    if (!(cond < 1e12)) throw SingularB0("B(0) numerically singular", cond);

    // B0 y(T) = -B1diff y(T-1): the one-period map is -B0^-1 B1diff; only its
    // leading n x n block carries the nonzero spectrum.
    const Eigen::MatrixXd full = -B0.partialPivLu().solve(B1diff);
    FloquetResult result;
    result.monodromy = full.topLeftCorner(n, n);
    result.condition_b0 = cond;
    result.rss = model.rss();
    result.m_samples = model.m_samples;
    result.n_order = n;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(result.monodromy);
    Eigen::VectorXcd values = eig.eigenvalues();
    Eigen::MatrixXcd vectors = eig.eigenvectors();
    sort_eigensystem(values, vectors);
    result.multipliers.assign(values.data(), values.data() + values.size());
    result.eigendirections = vectors;
    result.stable = std::abs(values(0)) <= 1.0;
    return result;
}

namespace {

long lcm_of(const std::vector<int>& values) {
    long acc = 1;
    for (int v : values) acc = std::lcm(acc, static_cast<long>(v));
    return acc;
}

}  // namespace

FloquetEstimate estimate_floquet(const Rig& rig_template, const ContinuationPoint& orbit,
                                 const SysidConfig& config) {
    if (config.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    FloquetEstimate est;
    est.repeats.reserve(config.repeats);

    for (int r = 0; r < config.repeats; ++r) {
        Rig rig = rig_template;
        ControllerConfig ctrl = rig.controller();
        ctrl.enabled = config.closed_loop;
        rig.set_controller(ctrl);
        NoiseConfig ambient;
        ambient.amplitude = config.ambient_amplitude;
        ambient.cutoff_hz = config.ambient_cutoff_hz;
        ambient.filter_order = config.noise_filter_order;
        ambient.seed = split_seed(config.seed, 0x0DDF100D, static_cast<std::uint64_t>(r));
        rig.set_disturbance(ambient);

        SysidConfig run = config;
        run.seed = split_seed(config.seed, 0x5EED, static_cast<std::uint64_t>(r));
        // The collection grid must admit every candidate phase count.
        run.m_samples = config.auto_order ? static_cast<int>(lcm_of(config.m_candidates))
                                          : config.m_samples;
        const PerturbationRecord data = collect_perturbed_data(rig, orbit, run);
        int m = config.m_samples, n = config.n_order;
        if (config.auto_order) {
            const OrderSelection sel =
                select_order(data, config.m_candidates, config.n_candidates, config.arx);
            m = sel.m_samples;
            n = sel.n_order;
        }
        const ArxModel model = fit_arx(data, m, n, config.arx);
        est.repeats.push_back(monodromy(model));
    }

    const int R = config.repeats;
    for (int which = 0; which < 2; ++which) {
        std::vector<double> moduli;
        for (const auto& rep : est.repeats)
            if (static_cast<int>(rep.multipliers.size()) > which)
                moduli.push_back(std::abs(rep.multipliers[which]));
        if (moduli.empty()) continue;
        double mean = 0.0;
        for (double v : moduli) mean += v;
        mean /= static_cast<double>(moduli.size());
        est.mean_abs[which] = mean;
        if (moduli.size() > 1) {
            double var = 0.0;
            for (double v : moduli) var += (v - mean) * (v - mean);
            var /= static_cast<double>(moduli.size() - 1);
            const boost::math::students_t dist(static_cast<double>(moduli.size() - 1));
            const double tq = boost::math::quantile(dist, 0.975);
            est.ci_half_width[which] = tq * std::sqrt(var / static_cast<double>(moduli.size()));
        }
    }

    // Representative repeat: dominant modulus closest to the repeat mean.
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int r = 0; r < R; ++r) {
        const double d = std::abs(std::abs(est.repeats[r].multipliers[0]) - est.mean_abs[0]);
        if (d < best_dist) {
            best_dist = d;
            best = r;
        }
    }
    est.representative = best;
    est.stable = est.mean_abs[0] <= 1.0 + config.stability_margin_scale * est.ci_half_width[0];
    return est;
}

}  // namespace cbc
