#include "cbc/surface.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "cbc/errors.hpp"
#include "cbc/noise.hpp"

namespace cbc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Compact L-BFGS (two-loop recursion, Armijo backtracking) for the marginal
// likelihood ascent; works on the negative objective.
struct LbfgsResult {
    Eigen::VectorXd x;
    double f = kInf;
    bool converged = false;
};

LbfgsResult lbfgs_minimise(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& objective,
    Eigen::VectorXd x0, int max_iterations, double gradient_tol) {
    const int memory = 8;
    const int dim = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> s_hist, y_hist;
    std::vector<double> rho_hist;

    Eigen::VectorXd g(dim), g_new(dim);
    double f = objective(x0, g);
    if (!std::isfinite(f)) return {x0, f, false};
    Eigen::VectorXd x = x0;

    for (int iter = 0; iter < max_iterations; ++iter) {
        if (g.norm() <= gradient_tol) return {x, f, true};

        // Two-loop recursion for the search direction.
        Eigen::VectorXd q = g;
        const int h = static_cast<int>(s_hist.size());
        std::vector<double> alpha(h);
        for (int i = h - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (h > 0) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (int i = 0; i < h; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd direction = -q;
        if (direction.dot(g) >= 0.0) direction = -g;  // fall back on steepest descent

        // Armijo backtracking.
        double step = 1.0;
        const double slope = direction.dot(g);
        double f_new = kInf;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Eigen::VectorXd x_new = x + step * direction;
            f_new = objective(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                const Eigen::VectorXd s = x_new - x;
                const Eigen::VectorXd yv = g_new - g;
                const double sy = s.dot(yv);
                if (sy > 1e-12 * s.norm() * yv.norm()) {
                    s_hist.push_back(s);
                    y_hist.push_back(yv);
                    rho_hist.push_back(1.0 / sy);
                    if (static_cast<int>(s_hist.size()) > memory) {
                        s_hist.erase(s_hist.begin());
                        y_hist.erase(y_hist.begin());
                        rho_hist.erase(rho_hist.begin());
                    }
                }
                x = x_new;
                f = f_new;
                g = g_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return {x, f, true};  // no further descent possible
    }
    return {x, f, true};
}

Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& x, double l0, double l1, double sf) {
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = sf * sf;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d0 = (x(0, i) - x(0, j)) / l0;
            const double d1 = (x(1, i) - x(1, j)) / l1;
            const double v = sf * sf * std::exp(-0.5 * (d0 * d0 + d1 * d1));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

}  // namespace

Eigen::Vector2d GpSurface::standardise(double omega, double amplitude) const {
    return {(omega - x_mean_[0]) / x_scale_[0], (amplitude - x_mean_[1]) / x_scale_[1]};
}

Eigen::VectorXd GpSurface::kernel_column(const Eigen::Vector2d& xs) const {
    const Eigen::Index n = x_.cols();
    Eigen::VectorXd k(n);
    const double sf2 = hyper_.signal_sigma * hyper_.signal_sigma;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d0 = (xs(0) - x_(0, i)) / hyper_.length_omega;
        const double d1 = (xs(1) - x_(1, i)) / hyper_.length_amplitude;
        k(i) = sf2 * std::exp(-0.5 * (d0 * d0 + d1 * d1));
    }
    return k;
}

GpSurface GpSurface::fit(const std::vector<SurfacePoint>& points, const GpOptions& options) {
    if (points.empty()) throw std::invalid_argument("gp_fit: no training points");
    if (options.optimise && points.size() < 10)
        throw std::invalid_argument("gp_fit: hyperparameter optimisation needs >= 10 points");

    GpSurface gp;
    gp.points_ = points;
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    gp.x_.resize(2, n);
    gp.y_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        gp.x_(0, i) = points[i].omega;
        gp.x_(1, i) = points[i].amplitude;
        gp.y_(i) = points[i].gamma;
    }

    for (int d = 0; d < 2; ++d) {
        gp.x_mean_[d] = gp.x_.row(d).mean();
        const double var = (gp.x_.row(d).array() - gp.x_mean_[d]).square().mean();
        gp.x_scale_[d] = std::sqrt(var) > 1e-300 ? std::sqrt(var) : 1.0;
        gp.x_.row(d) = (gp.x_.row(d).array() - gp.x_mean_[d]) / gp.x_scale_[d];
    }
    gp.y_mean_ = gp.y_.mean();
    const double yvar = (gp.y_.array() - gp.y_mean_).square().mean();
    gp.y_scale_ = std::sqrt(yvar) > 1e-300 ? std::sqrt(yvar) : 1.0;
    gp.y_ = (gp.y_.array() - gp.y_mean_) / gp.y_scale_;

    // Negative log marginal likelihood and its gradient in log hyperparameters
    // (l0, l1, sf, sn).
    const double base_jitter = 1e-10;
    const auto objective = [&gp, n, base_jitter](const Eigen::VectorXd& theta,
                                                 Eigen::VectorXd& grad) -> double {
        const double l0 = std::exp(theta(0)), l1 = std::exp(theta(1));
        const double sf = std::exp(theta(2)), sn = std::exp(theta(3));
        if (!std::isfinite(l0) || !std::isfinite(l1) || !std::isfinite(sf) || !std::isfinite(sn))
            return kInf;
        const Eigen::MatrixXd kf = se_kernel(gp.x_, l0, l1, sf);
        Eigen::MatrixXd k = kf;
        k.diagonal().array() += sn * sn + base_jitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) return kInf;
        const Eigen::VectorXd alpha = llt.solve(gp.y_);
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
        const double nll = 0.5 * gp.y_.dot(alpha) + log_det +
                           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

        const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
        const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;  // d lml = 0.5 tr(w dK)
        grad.resize(4);
        Eigen::MatrixXd d0(n, n), d1(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const double a = (gp.x_(0, i) - gp.x_(0, j)) / l0;
                const double b = (gp.x_(1, i) - gp.x_(1, j)) / l1;
                d0(i, j) = kf(i, j) * a * a;
                d1(i, j) = kf(i, j) * b * b;
            }
        grad(0) = -0.5 * w.cwiseProduct(d0).sum();
        grad(1) = -0.5 * w.cwiseProduct(d1).sum();
        grad(2) = -0.5 * w.cwiseProduct(2.0 * kf).sum();
        grad(3) = -0.5 * w.trace() * 2.0 * sn * sn;
        return nll;
    };

    GpHyperparameters chosen = options.initial;
    if (options.optimise) {
        SplitMix64 rng(options.seed);
        const auto log_uniform = [&rng](std::pair<double, double> range) {
            const double lo = std::log(range.first), hi = std::log(range.second);
            return std::exp(lo + (hi - lo) * rng.next_closed_open());
        };
        double best = kInf;
        Eigen::VectorXd best_theta;
        for (int s = 0; s < options.starts; ++s) {
            Eigen::VectorXd theta(4);
            if (s == 0) {
                theta << std::log(options.initial.length_omega),
                    std::log(options.initial.length_amplitude),
                    std::log(options.initial.signal_sigma), std::log(options.initial.noise_sigma);
            } else {
                theta << std::log(log_uniform(options.length_range)),
                    std::log(log_uniform(options.length_range)),
                    std::log(log_uniform(options.signal_range)),
                    std::log(log_uniform(options.noise_range));
            }
            const LbfgsResult res =
                lbfgs_minimise(objective, theta, options.max_iterations, options.gradient_tol);
            if (res.converged && res.f < best) {
                best = res.f;
                best_theta = res.x;
            }
        }
        if (!std::isfinite(best)) throw OptimFailed("all marginal-likelihood starts diverged");
        chosen.length_omega = std::exp(best_theta(0));
        chosen.length_amplitude = std::exp(best_theta(1));
        chosen.signal_sigma = std::exp(best_theta(2));
        chosen.noise_sigma = std::exp(best_theta(3));
        gp.lml_ = -best;
    }
    gp.hyper_ = chosen;

    // Final factorisation with jitter escalation.
    const Eigen::MatrixXd kf =
        se_kernel(gp.x_, chosen.length_omega, chosen.length_amplitude, chosen.signal_sigma);
    const double mean_diag = kf.trace() / static_cast<double>(n);
    double jitter = 0.0;
    for (;;) {
        Eigen::MatrixXd k = kf;
        k.diagonal().array() += chosen.noise_sigma * chosen.noise_sigma + jitter;
        gp.chol_.compute(k);
        if (gp.chol_.info() == Eigen::Success) break;
        jitter = jitter == 0.0 ? 1e-12 * mean_diag : jitter * 10.0;
        if (jitter > options.max_jitter * mean_diag)
            throw IllConditionedKernel("kernel matrix not positive definite at maximum jitter");
    }
    gp.jitter_ = jitter;
    gp.alpha_ = gp.chol_.solve(gp.y_);

    if (!options.optimise) {
        // Report the likelihood of the fixed hyperparameters.
        Eigen::VectorXd unused(4);
        const Eigen::VectorXd theta =
            (Eigen::VectorXd(4) << std::log(chosen.length_omega),
             std::log(chosen.length_amplitude), std::log(chosen.signal_sigma),
             std::log(chosen.noise_sigma))
                .finished();
        const double nll = objective(theta, unused);
        gp.lml_ = std::isfinite(nll) ? -nll : -kInf;
    }
    return gp;
}

double GpSurface::value(double omega, double amplitude) const {
    const Eigen::VectorXd k = kernel_column(standardise(omega, amplitude));
    return y_mean_ + y_scale_ * k.dot(alpha_);
}

double GpSurface::d_amplitude(double omega, double amplitude) const {
    const Eigen::Vector2d xs = standardise(omega, amplitude);
    const Eigen::VectorXd k = kernel_column(xs);
    const double l2 = hyper_.length_amplitude * hyper_.length_amplitude;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < k.size(); ++i)
        acc += alpha_(i) * k(i) * (-(xs(1) - x_(1, i)) / l2);
    return acc * y_scale_ / x_scale_[1];
}

double GpSurface::d2_amplitude(double omega, double amplitude) const {
    const Eigen::Vector2d xs = standardise(omega, amplitude);
    const Eigen::VectorXd k = kernel_column(xs);
    const double l2 = hyper_.length_amplitude * hyper_.length_amplitude;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < k.size(); ++i) {
        const double d = (xs(1) - x_(1, i));
        acc += alpha_(i) * k(i) * (d * d / (l2 * l2) - 1.0 / l2);
    }
    return acc * y_scale_ / (x_scale_[1] * x_scale_[1]);
}

double GpSurface::d_omega(double omega, double amplitude) const {
    const Eigen::Vector2d xs = standardise(omega, amplitude);
    const Eigen::VectorXd k = kernel_column(xs);
    const double l2 = hyper_.length_omega * hyper_.length_omega;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < k.size(); ++i)
        acc += alpha_(i) * k(i) * (-(xs(0) - x_(0, i)) / l2);
    return acc * y_scale_ / x_scale_[0];
}

std::pair<double, double> GpSurface::predict(double omega, double amplitude) const {
    const Eigen::VectorXd k = kernel_column(standardise(omega, amplitude));
    const double mean = y_mean_ + y_scale_ * k.dot(alpha_);
    const Eigen::VectorXd v = chol_.matrixL().solve(k);
    const double sf2 = hyper_.signal_sigma * hyper_.signal_sigma;
    const double sn2 = hyper_.noise_sigma * hyper_.noise_sigma;
    const double var_s = std::max(0.0, sf2 - v.squaredNorm()) + sn2;
    return {mean, var_s * y_scale_ * y_scale_};
}

std::pair<double, double> GpSurface::omega_range() const {
    auto [lo, hi] = std::minmax_element(points_.begin(), points_.end(),
                                        [](const SurfacePoint& a, const SurfacePoint& b) {
                                            return a.omega < b.omega;
                                        });
    return {lo->omega, hi->omega};
}

std::pair<double, double> GpSurface::amplitude_range() const {
    auto [lo, hi] = std::minmax_element(points_.begin(), points_.end(),
                                        [](const SurfacePoint& a, const SurfacePoint& b) {
                                            return a.amplitude < b.amplitude;
                                        });
    return {lo->amplitude, hi->amplitude};
}

namespace {

// Newton on dG/dA at fixed omega; returns NaN when it fails to converge.
double newton_fold(const Surface& surface, double omega, double a0,
                   std::pair<double, double> range, double tol, int max_iter) {
    double a = a0;
    for (int i = 0; i < max_iter; ++i) {
        const double f = surface.d_amplitude(omega, a);
        if (std::abs(f) <= tol) return a;
        const double fp = surface.d2_amplitude(omega, a);
        if (fp == 0.0 || !std::isfinite(fp)) return std::numeric_limits<double>::quiet_NaN();
        a -= f / fp;
        if (!(a >= range.first && a <= range.second))
            return std::numeric_limits<double>::quiet_NaN();
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> scan_folds(const Surface& surface, double omega,
                               std::pair<double, double> range, int scan, double tol,
                               int max_iter) {
    std::vector<double> roots;
    double prev_a = range.first;
    double prev_f = surface.d_amplitude(omega, prev_a);
    for (int i = 1; i <= scan; ++i) {
        const double a = range.first + (range.second - range.first) * i / scan;
        const double f = surface.d_amplitude(omega, a);
        if (prev_f == 0.0 || (prev_f < 0.0) != (f < 0.0)) {
            const double root =
                newton_fold(surface, omega, 0.5 * (prev_a + a), range, tol, max_iter);
            if (std::isfinite(root)) roots.push_back(root);
        }
        prev_a = a;
        prev_f = f;
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [&](double x, double y) {
                                return std::abs(x - y) <
                                       1e-6 * (range.second - range.first);
                            }),
                roots.end());
    return roots;
}

}  // namespace

std::vector<FoldPoint> fold_curve(const Surface& surface, std::pair<double, double> omega_range,
                                  const FoldOptions& options) {
    if (!(options.amplitude_range.second > options.amplitude_range.first))
        throw std::invalid_argument("fold_curve: amplitude_range must be set");
    const int steps = std::max(2, options.omega_steps);
    const auto arange = options.amplitude_range;

    // March from the high-omega end (folds well separated for a hardening
    // characteristic) toward the cusp.
    std::vector<double> omegas(steps);
    for (int i = 0; i < steps; ++i)
        omegas[i] = omega_range.second -
                    (omega_range.second - omega_range.first) * i / (steps - 1);

    std::vector<FoldPoint> upper, lower;
    bool tracking = false;
    double seed_hi = 0.0, seed_lo = 0.0;
    for (double w : omegas) {
        std::vector<double> roots;
        if (!tracking) {
            roots = scan_folds(surface, w, arange, options.amplitude_scan, options.newton_tol,
                               options.max_newton);
            if (roots.size() < 2) continue;  // no fold pair at this frequency yet
        } else {
            const double hi = newton_fold(surface, w, seed_hi, arange, options.newton_tol,
                                          options.max_newton);
            const double lo = newton_fold(surface, w, seed_lo, arange, options.newton_tol,
                                          options.max_newton);
            if (std::isfinite(hi)) roots.push_back(hi);
            if (std::isfinite(lo) && (!std::isfinite(hi) ||
                                      std::abs(lo - hi) > 1e-5 * (arange.second - arange.first)))
                roots.push_back(lo);
            std::sort(roots.begin(), roots.end());
            if (roots.size() < 2) break;  // branches merged: past the cusp
        }
        tracking = true;
        seed_lo = roots.front();
        seed_hi = roots.back();
        upper.push_back({w, seed_hi, surface.value(w, seed_hi),
                         std::abs(surface.d_amplitude(w, seed_hi))});
        lower.push_back({w, seed_lo, surface.value(w, seed_lo),
                         std::abs(surface.d_amplitude(w, seed_lo))});
    }
    if (upper.empty()) throw NoFold("no stationary point of dG/dA in the requested window");

    // One continuous polyline: down the upper branch, back up the lower one.
    std::vector<FoldPoint> curve = upper;
    for (auto it = lower.rbegin(); it != lower.rend(); ++it) curve.push_back(*it);
    return curve;
}

namespace {

struct TracePoint {
    double w, a;  // natural units
};

}  // namespace

std::vector<SliceBranch> frequency_response(const Surface& surface, double gamma,
                                            const SliceOptions& options) {
    const auto wr = options.omega_range;
    const auto ar = options.amplitude_range;
    if (!(wr.second > wr.first) || !(ar.second > ar.first))
        throw std::invalid_argument("frequency_response: ranges must be set");
    const double sw = wr.second - wr.first;
    const double sa = ar.second - ar.first;
    const double tol_f = options.corrector_tol > 0.0
                             ? options.corrector_tol
                             : 1e-10 * std::max(1.0, std::abs(gamma));

    const auto residual = [&](double w, double a) { return surface.value(w, a) - gamma; };
    // Gradient in box-scaled coordinates.
    const auto scaled_grad = [&](double w, double a) -> Eigen::Vector2d {
        return {surface.d_omega(w, a) * sw, surface.d_amplitude(w, a) * sa};
    };
    const auto inside = [&](double w, double a) {
        return w >= wr.first - 1e-9 * sw && w <= wr.second + 1e-9 * sw &&
               a >= ar.first - 1e-9 * sa && a <= ar.second + 1e-9 * sa;
    };

    // Seed points from sign changes along amplitude columns.
    std::vector<TracePoint> seeds;
    const int grid = std::max(8, options.seed_grid);
    for (int i = 0; i <= grid; ++i) {
        const double w = wr.first + sw * i / grid;
        double prev_a = ar.first;
        double prev_f = residual(w, prev_a);
        for (int j = 1; j <= grid; ++j) {
            const double a = ar.first + sa * j / grid;
            const double f = residual(w, a);
            if ((prev_f <= 0.0) != (f <= 0.0)) {
                double lo = prev_a, hi = a, flo = prev_f;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = residual(w, mid);
                    if ((flo <= 0.0) == (fm <= 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                seeds.push_back({w, 0.5 * (lo + hi)});
            }
            prev_a = a;
            prev_f = f;
        }
    }
    if (seeds.empty()) throw NoIntersection("contour G = gamma is empty on the window");

    std::vector<std::vector<TracePoint>> traces;
    const double h = options.step;

    const auto correct = [&](TracePoint& p) -> bool {
        for (int it = 0; it < 12; ++it) {
            const double f = residual(p.w, p.a);
            if (std::abs(f) <= tol_f) return true;
            const Eigen::Vector2d g = scaled_grad(p.w, p.a);
            const double g2 = g.squaredNorm();
            if (g2 == 0.0 || !std::isfinite(g2)) return false;
            p.w -= f * g(0) / g2 * sw;
            p.a -= f * g(1) / g2 * sa;
        }
        return std::abs(residual(p.w, p.a)) <= 10.0 * tol_f;
    };

    const auto near_existing = [&](const TracePoint& p) {
        for (const auto& tr : traces)
            for (const auto& q : tr) {
                const double dw = (p.w - q.w) / sw, da = (p.a - q.a) / sa;
                if (dw * dw + da * da < (1.5 * h) * (1.5 * h)) return true;
            }
        return false;
    };

    for (const auto& seed : seeds) {
        TracePoint start = seed;
        if (!correct(start) || near_existing(start)) continue;

        std::vector<TracePoint> forward{start}, backward;
        for (int dir = 0; dir < 2; ++dir) {
            TracePoint p = start;
            Eigen::Vector2d t_prev(0.0, 0.0);
            for (int step = 0; step < options.max_steps; ++step) {
                const Eigen::Vector2d g = scaled_grad(p.w, p.a);
                if (g.norm() == 0.0) break;
                Eigen::Vector2d t(-g(1), g(0));
                t.normalize();
                if (step == 0) {
                    if (dir == 1) t = -t;
                } else if (t.dot(t_prev) < 0.0) {
                    t = -t;
                }
                t_prev = t;
                TracePoint q{p.w + h * t(0) * sw, p.a + h * t(1) * sa};
                if (!correct(q) || !inside(q.w, q.a)) break;
                // Closed loop: back near the start after some distance.
                const double dw = (q.w - start.w) / sw, da = (q.a - start.a) / sa;
                (dir == 0 ? forward : backward).push_back(q);
                if (step > 10 && dw * dw + da * da < h * h) break;
                p = q;
            }
        }
        std::vector<TracePoint> branch(backward.rbegin(), backward.rend());
        branch.insert(branch.end(), forward.begin(), forward.end());
        if (branch.size() >= 3) traces.push_back(std::move(branch));
    }
    if (traces.empty()) throw NoIntersection("contour tracing produced no branches");

    std::vector<SliceBranch> branches;
    for (const auto& tr : traces) {
        SliceBranch br;
        br.omega.reserve(tr.size());
        br.amplitude.reserve(tr.size());
        br.is_fold.assign(tr.size(), false);
        for (const auto& p : tr) {
            br.omega.push_back(p.w);
            br.amplitude.push_back(p.a);
        }
        // Vertical tangents in omega: sign change of the omega increment.
        for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
            const double d1 = br.omega[i] - br.omega[i - 1];
            const double d2 = br.omega[i + 1] - br.omega[i];
            if ((d1 <= 0.0) != (d2 <= 0.0)) br.is_fold[i] = true;
        }
        branches.push_back(std::move(br));
    }
    return branches;
}

}  // namespace cbc
