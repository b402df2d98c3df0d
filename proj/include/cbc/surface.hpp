// Gaussian-process regression of swept continuation data into a solution
// surface gamma = G(omega, amplitude), plus contour and fold-curve tracers
// operating on any twice-differentiable surface.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace cbc {

struct SurfacePoint {
    double omega;      // [rad/s]
    double amplitude;  // response amplitude [m]
    double gamma;      // forcing amplitude [input units]
};

// Minimal surface interface for the tracers: value and the derivatives the
// fold solver needs.
class Surface {
public:
    virtual ~Surface() = default;
    virtual double value(double omega, double amplitude) const = 0;
    virtual double d_amplitude(double omega, double amplitude) const = 0;
    virtual double d2_amplitude(double omega, double amplitude) const = 0;
    virtual double d_omega(double omega, double amplitude) const = 0;
};

struct GpHyperparameters {
    double length_omega = 1.0;    // standardised-input length scales
    double length_amplitude = 1.0;
    double signal_sigma = 1.0;    // standardised-output signal std
    double noise_sigma = 1e-2;    // standardised-output noise std
};

struct GpOptions {
    int starts = 8;               // multi-start count, log-uniform draws
    std::uint64_t seed = 7;
    int max_iterations = 200;     // per L-BFGS start
    double gradient_tol = 1e-7;
    std::pair<double, double> length_range = {0.2, 5.0};
    std::pair<double, double> signal_range = {0.3, 3.0};
    std::pair<double, double> noise_range = {1e-4, 0.3};
    double max_jitter = 1e-4;     // relative to the mean kernel diagonal
    bool optimise = true;         // false: keep the provided initial values
    GpHyperparameters initial;    // used when optimise == false (or as extra start)
};

// Squared-exponential GP with independent length scales per input, trained by
// maximising the log marginal likelihood (multi-start L-BFGS on log
// hyperparameters). Inputs and targets are standardised internally.
class GpSurface : public Surface {
public:
    static GpSurface fit(const std::vector<SurfacePoint>& points, const GpOptions& options = {});

    double value(double omega, double amplitude) const override;
    double d_amplitude(double omega, double amplitude) const override;
    double d2_amplitude(double omega, double amplitude) const override;
    double d_omega(double omega, double amplitude) const override;

    // Posterior mean and predictive variance (noise included).
    std::pair<double, double> predict(double omega, double amplitude) const;

    const GpHyperparameters& hyperparameters() const { return hyper_; }
    double log_marginal_likelihood() const { return lml_; }
    double jitter_used() const { return jitter_; }
    const std::vector<SurfacePoint>& training_points() const { return points_; }
    std::pair<double, double> omega_range() const;
    std::pair<double, double> amplitude_range() const;
    // Output-standardisation scale, for turning relative tolerances into
    // natural units.
    double gamma_scale() const { return y_scale_; }

private:
    std::vector<SurfacePoint> points_;
    Eigen::MatrixXd x_;       // 2 x N standardised inputs
    Eigen::VectorXd y_;       // standardised targets
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
    GpHyperparameters hyper_;
    double x_mean_[2] = {0, 0}, x_scale_[2] = {1, 1};
    double y_mean_ = 0, y_scale_ = 1;
    double lml_ = 0, jitter_ = 0;

    Eigen::Vector2d standardise(double omega, double amplitude) const;
    Eigen::VectorXd kernel_column(const Eigen::Vector2d& xs) const;
};

inline std::pair<double, double> gp_predict(const GpSurface& surface, double omega,
                                            double amplitude) {
    return surface.predict(omega, amplitude);
}

struct FoldPoint {
    double omega, amplitude, gamma;
    double residual;  // |dG/dA| after Newton convergence
};

struct FoldOptions {
    int omega_steps = 161;
    std::pair<double, double> amplitude_range = {0.0, 0.0};  // scan window; must be set
    int amplitude_scan = 240;
    double newton_tol = 1e-8;  // on |dG/dA|
    int max_newton = 60;
};

// Zero set of dG/dA traced by continuation in omega from the high end of the
// range toward the cusp where the two branches merge. The returned points
// run down the upper branch and back up the lower one. Throws NoFold when no
// stationary point exists in the window.
std::vector<FoldPoint> fold_curve(const Surface& surface, std::pair<double, double> omega_range,
                                  const FoldOptions& options);

struct SliceBranch {
    std::vector<double> omega, amplitude;
    std::vector<bool> is_fold;  // vertical-tangent points along the branch
};

struct SliceOptions {
    std::pair<double, double> omega_range = {0.0, 0.0};
    std::pair<double, double> amplitude_range = {0.0, 0.0};
    int seed_grid = 48;        // lattice density for locating contour seeds
    double step = 0.01;        // arclength step in scaled coordinates
    int max_steps = 20000;
    double corrector_tol = 0.0;  // on |G - gamma|; 0 -> 1e-10 * gamma scale
};

// Traces the contour G(omega, A) = gamma by predictor-corrector arclength
// stepping, returning the possibly multivalued branches of the frequency
// response at fixed forcing amplitude. Throws NoIntersection when the level
// set is empty on the window.
std::vector<SliceBranch> frequency_response(const Surface& surface, double gamma,
                                            const SliceOptions& options);

}  // namespace cbc
