// Exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace cbc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// virtual rig
struct DisplacementLimitExceeded : Error {
    DisplacementLimitExceeded(double x, double limit, double t)
        : Error("displacement limit exceeded: |x|=" + std::to_string(x) + " > " +
                std::to_string(limit) + " at t=" + std::to_string(t)),
          x(x), limit(limit), t(t) {}
    double x, limit, t;
};

// signals
struct NonIntegerPeriodSpan : Error {
    using Error::Error;
};
struct DelayTooLong : Error {
    using Error::Error;
};

// cbc engine
struct NotSettled : Error {
    using Error::Error;
};
struct FixedPointDiverged : Error {
    FixedPointDiverged(const std::string& what, double residual, int iterations)
        : Error(what), residual(residual), iterations(iterations) {}
    double residual;
    int iterations;
};

// sysid
struct RankDeficient : Error {
    RankDeficient(const std::string& what, double condition)
        : Error(what), condition(condition) {}
    double condition;
};
struct SingularB0 : Error {
    SingularB0(const std::string& what, double condition)
        : Error(what), condition(condition) {}
    double condition;
};

// oracle
struct NotPeriodic : Error {
    using Error::Error;
};
struct ShootingDiverged : Error {
    using Error::Error;
};

// surface
struct IllConditionedKernel : Error {
    using Error::Error;
};
struct OptimFailed : Error {
    using Error::Error;
};
struct NoIntersection : Error {
    using Error::Error;
};
struct NoFold : Error {
    using Error::Error;
};

// cli scenarios
struct EscapeTimeout : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace cbc
