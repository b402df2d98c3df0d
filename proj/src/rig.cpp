#include "cbc/rig.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cbc/errors.hpp"

namespace cbc {

void RigParams::validate() const {
    if (!(natural_frequency > 0.0)) throw std::invalid_argument("natural_frequency must be > 0");
    if (!(damping_ratio >= 0.0)) throw std::invalid_argument("damping_ratio must be >= 0");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be > 0");
    if (!(displacement_limit > 0.0)) throw std::invalid_argument("displacement_limit must be > 0");
    if (spring_geometry) {
        const auto& g = *spring_geometry;
        if (!(g.mount_length > 0.0) || !(g.spring_constant > 0.0) || !(g.rest_length >= 0.0))
            throw std::invalid_argument("spring_geometry parameters must be positive");
    }
}

double RigParams::restoring(double x) const {
    if (spring_geometry) {
        const auto& g = *spring_geometry;
        const double s = std::sqrt(g.mount_length * g.mount_length + x * x);
        return 2.0 * g.spring_constant * x * (1.0 - g.rest_length / s);
    }
    const double w2 = natural_frequency * natural_frequency;
    return w2 * x + cubic_stiffness * x * x * x;
}

double RigParams::restoring_gradient(double x) const {
    if (spring_geometry) {
        const auto& g = *spring_geometry;
        const double s2 = g.mount_length * g.mount_length + x * x;
        const double s = std::sqrt(s2);
        return 2.0 * g.spring_constant * (1.0 - g.rest_length / s + g.rest_length * x * x / (s2 * s));
    }
    const double w2 = natural_frequency * natural_frequency;
    return w2 + 3.0 * cubic_stiffness * x * x;
}

double RigParams::potential(double x) const {
    if (spring_geometry) {
        const auto& g = *spring_geometry;
        const double s = std::sqrt(g.mount_length * g.mount_length + x * x);
        return g.spring_constant * x * x - 2.0 * g.spring_constant * g.rest_length * (s - g.mount_length);
    }
    const double w2 = natural_frequency * natural_frequency;
    return 0.5 * w2 * x * x + 0.25 * cubic_stiffness * x * x * x * x;
}

double Forcing::period() const { return 2.0 * std::numbers::pi / omega; }
double Forcing::value(double t) const { return a * std::cos(omega * t) + b * std::sin(omega * t); }

Rig::Rig(const RigParams& params, const ControllerConfig& controller,
         const NoiseConfig& noise, const NoiseConfig& disturbance)
    : params_(params),
      controller_(controller),
      noise_(noise, params.sample_rate),
      disturbance_(disturbance, params.sample_rate) {
    params_.validate();
}

void Rig::set_noise(const NoiseConfig& c) { noise_ = NoiseChannel(c, params_.sample_rate); }
void Rig::set_disturbance(const NoiseConfig& c) { disturbance_ = NoiseChannel(c, params_.sample_rate); }

void Rig::reset(double x, double xdot, double t) {
    state_ = {x, xdot, t};
    noise_.reset_states();
    disturbance_.reset_states();
}

double Rig::acceleration(double x, double xdot, double input) const {
    return input - 2.0 * params_.damping_ratio * params_.natural_frequency * xdot -
           params_.restoring(x);
}

std::pair<double, double> Rig::step(const FourierSeries& target, const Forcing& forcing, double dt) {
    const double t = state_.t;
    double u = 0.0;
    if (controller_.enabled) {
        u = controller_.kp * (target.value(t) - state_.x) +
            controller_.kd * (target.derivative(t) - state_.xdot);
    }
    const double eta = noise_.sample();
    const double d = disturbance_.sample();
    const double held = u + eta + d;  // zero-order hold across the step

    const auto f = [&](double tau, double x, double v) {
        return acceleration(x, v, forcing.value(tau) + held);
    };

    const double x = state_.x, v = state_.xdot;
    const double k1x = v, k1v = f(t, x, v);
    const double k2x = v + 0.5 * dt * k1v, k2v = f(t + 0.5 * dt, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
    const double k3x = v + 0.5 * dt * k2v, k3v = f(t + 0.5 * dt, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
    const double k4x = v + dt * k3v, k4v = f(t + dt, x + dt * k3x, v + dt * k3v);

    state_.x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    state_.xdot = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    state_.t = t + dt;

    if (std::abs(state_.x) > params_.displacement_limit)
        throw DisplacementLimitExceeded(state_.x, params_.displacement_limit, state_.t);
    return {u, eta};
}

int Rig::samples_per_period(double omega, int grid_multiple) const {
    if (!(omega > 0.0)) throw std::invalid_argument("forcing frequency must be > 0");
    if (grid_multiple < 1) throw std::invalid_argument("grid_multiple must be >= 1");
    const double period = 2.0 * std::numbers::pi / omega;
    const double nominal = params_.sample_rate * period / grid_multiple;
    const int blocks = std::max(1, static_cast<int>(std::llround(nominal)));
    return blocks * grid_multiple;
}

SampledRecord Rig::run_segment(const FourierSeries& target, const Forcing& forcing,
                               int n_periods, int grid_multiple) {
    if (n_periods < 1) throw std::invalid_argument("n_periods must be >= 1");
    const double period = forcing.period();
    const int per = samples_per_period(forcing.omega, grid_multiple);
    const double dt = period / static_cast<double>(per);
    const std::size_t total = static_cast<std::size_t>(per) * static_cast<std::size_t>(n_periods);

    SampledRecord rec;
    rec.dt = dt;
    rec.t0 = state_.t;
    rec.samples_per_period = per;
    rec.forcing = forcing;
    rec.t.reserve(total);
    rec.x.reserve(total);
    rec.xdot.reserve(total);
    rec.u.reserve(total);
    rec.i.reserve(total);
    rec.eta.reserve(total);

    const double t0 = state_.t;
    for (std::size_t k = 0; k < total; ++k) {
        state_.t = t0 + static_cast<double>(k) * dt;  // avoid additive drift
        rec.t.push_back(state_.t);
        rec.x.push_back(state_.x);
        rec.xdot.push_back(state_.xdot);
        const auto [u, eta] = step(target, forcing, dt);
        rec.u.push_back(u);
        rec.eta.push_back(eta);
        rec.i.push_back(forcing.value(rec.t.back()) + u + eta);
    }
    state_.t = t0 + static_cast<double>(n_periods) * period;  // phase-aligned
    return rec;
}

}  // namespace cbc
