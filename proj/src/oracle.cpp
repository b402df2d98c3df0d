#include "cbc/oracle.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cbc/errors.hpp"

namespace cbc {

double OrbitInput::period() const { return 2.0 * std::numbers::pi / omega; }
double OrbitInput::value(double t) const { return gamma * std::cos(omega * t + phase); }

Forcing OrbitInput::as_forcing() const {
    return {gamma * std::cos(phase), -gamma * std::sin(phase), omega};
}

namespace {

// Joint state (x, v, Y) with dY/dt = A(x(t)) Y on the plant linearisation.
struct JointState {
    double x, v;
    Eigen::Matrix2d Y;
};

JointState rk4_span(const RigParams& params, const OrbitInput& input, const RigState& from,
                    double duration, int rate_multiplier) {
    const double nominal = params.sample_rate * duration;
    const long steps = rate_multiplier * std::max(1L, std::lround(nominal));
    const double dt = duration / static_cast<double>(steps);
    const double damping = 2.0 * params.damping_ratio * params.natural_frequency;

    struct Deriv {
        double dx, dv;
        Eigen::Matrix2d dY;
    };
    const auto rhs = [&](double t, const JointState& s) -> Deriv {
        const double acc = input.value(t) - damping * s.v - params.restoring(s.x);
        Eigen::Matrix2d A;
        A << 0.0, 1.0, -params.restoring_gradient(s.x), -damping;
        return {s.v, acc, A * s.Y};
    };
    const auto advance = [](const JointState& s, const Deriv& d, double h) -> JointState {
        return {s.x + h * d.dx, s.v + h * d.dv, s.Y + h * d.dY};
    };

    JointState s{from.x, from.xdot, Eigen::Matrix2d::Identity()};
    const double t0 = from.t;
    for (long k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        const Deriv k1 = rhs(t, s);
        const Deriv k2 = rhs(t + 0.5 * dt, advance(s, k1, 0.5 * dt));
        const Deriv k3 = rhs(t + 0.5 * dt, advance(s, k2, 0.5 * dt));
        const Deriv k4 = rhs(t + dt, advance(s, k3, dt));
        s.x += dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
        s.v += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
        s.Y += dt / 6.0 * (k1.dY + 2.0 * k2.dY + 2.0 * k3.dY + k4.dY);
    }
    return s;
}

double return_distance(const RigState& a, const JointState& b, double omega) {
    // Velocity scaled by omega so both components carry displacement units.
    return std::hypot(b.x - a.x, (b.v - a.xdot) / omega);
}

std::array<std::complex<double>, 2> eigenvalues_2x2(const Eigen::Matrix2d& m) {
    const double tr = m.trace();
    const double det = m.determinant();
    const double disc = tr * tr - 4.0 * det;
    std::array<std::complex<double>, 2> mu;
    if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        mu = {std::complex<double>((tr + r) / 2.0, 0.0), std::complex<double>((tr - r) / 2.0, 0.0)};
    } else {
        const double im = std::sqrt(-disc) / 2.0;
        mu = {std::complex<double>(tr / 2.0, im), std::complex<double>(tr / 2.0, -im)};
    }
    if (std::abs(mu[1]) > std::abs(mu[0])) std::swap(mu[0], mu[1]);
    return mu;
}

}  // namespace

RigState integrate_one_period(const RigParams& params, const OrbitInput& input,
                              const RigState& from, const OracleOptions& opts) {
    return integrate_flow(params, input, from, input.period(), opts);
}

RigState integrate_flow(const RigParams& params, const OrbitInput& input, const RigState& from,
                        double duration, const OracleOptions& opts) {
    const JointState s = rk4_span(params, input, from, duration, opts.rate_multiplier);
    return {s.x, s.v, from.t + duration};
}

VariationalResult variational_multipliers(const RigParams& params, const OrbitInput& input,
                                          const RigState& state_on_orbit, const OracleOptions& opts) {
    const JointState s = rk4_span(params, input, state_on_orbit, input.period(), opts.rate_multiplier);
    const double residual = return_distance(state_on_orbit, s, input.omega);
    if (residual > opts.return_tol)
        throw NotPeriodic("one-period return distance " + std::to_string(residual) +
                          " exceeds tolerance; refine the orbit by shooting first");
    VariationalResult result;
    result.monodromy = s.Y;
    result.multipliers = eigenvalues_2x2(s.Y);
    result.orbit_state = state_on_orbit;
    result.return_residual = residual;
    return result;
}

Eigen::Matrix2d brute_force_monodromy(const RigParams& params, const OrbitInput& input,
                                      const RigState& state_on_orbit, double eps,
                                      const OracleOptions& opts) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
    Eigen::Matrix2d m;
    for (int axis = 0; axis < 2; ++axis) {
        RigState plus = state_on_orbit, minus = state_on_orbit;
        (axis == 0 ? plus.x : plus.xdot) += eps;
        (axis == 0 ? minus.x : minus.xdot) -= eps;
        const RigState fp = integrate_one_period(params, input, plus, opts);
        const RigState fm = integrate_one_period(params, input, minus, opts);
        m(0, axis) = (fp.x - fm.x) / (2.0 * eps);
        m(1, axis) = (fp.xdot - fm.xdot) / (2.0 * eps);
    }
    return m;
}

RigState refine_orbit_shooting(const RigParams& params, const OrbitInput& input,
                               const RigState& initial_guess, const OracleOptions& opts) {
    RigState s = initial_guess;
    double prev_norm = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter <= opts.max_newton_iter; ++iter) {
        const JointState flow = rk4_span(params, input, s, input.period(), opts.rate_multiplier);
        const Eigen::Vector2d residual(flow.x - s.x, flow.v - s.xdot);
        const double norm = return_distance(s, flow, input.omega);
        if (norm <= opts.shooting_tol) return s;
        if (iter == opts.max_newton_iter || !(norm < 10.0 * prev_norm) || !std::isfinite(norm))
            throw ShootingDiverged("shooting residual " + std::to_string(norm) + " after " +
                                   std::to_string(iter) + " iterations");
        prev_norm = norm;
        const Eigen::Matrix2d jac = flow.Y - Eigen::Matrix2d::Identity();
        const Eigen::Vector2d delta = jac.partialPivLu().solve(residual);
        s.x -= delta(0);
        s.xdot -= delta(1);
    }
    throw ShootingDiverged("unreachable");
}

}  // namespace cbc
