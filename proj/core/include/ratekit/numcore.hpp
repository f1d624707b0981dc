#pragma once

#include <array>
#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ratekit/errors.hpp"

namespace ratekit::numcore {

using Vec = std::vector<double>;
using Complex = std::complex<double>;

/// Dense row-major matrix, sized for the small systems this engine deals
/// with (dimension <= 64 plus the compactification coordinate).
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n);
};

double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);
double mat_norm1(const Mat& m);

/// LU factorisation with partial pivoting. Throws NumericsError on exact
/// singularity.
struct Lu {
    explicit Lu(Mat m);
    Vec solve(Vec b) const;
    Mat inverse() const;
    int n() const { return m_.rows; }

private:
    Mat m_;
    std::vector<int> piv_;
};

/// 1-norm condition estimate via the explicit inverse (fine at this scale).
double condition_estimate(const Mat& m);

// ---------------------------------------------------------------------------
// Adaptive Runge-Kutta integration (Dormand-Prince 5(4)) with dense output
// and event detection.
// ---------------------------------------------------------------------------

enum class StopReason { TimeLimit, Event, Blowup, StepFailure };

using FieldFn = std::function<void(double t, const Vec& x, Vec& dx)>;
using EventFn = std::function<double(double t, const Vec& x)>;

struct IntegrateOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-11;
    double blowup_norm = 1e6;
    double max_step = 0.0;          // 0 = unlimited
    double initial_step = 0.0;      // 0 = automatic
    double event_refine_tol = 1e-10;
    long max_steps = 50'000'000;
};

/// Solution samples plus the embedded pair's 4th-order continuous extension,
/// stored per accepted step.
class Trajectory {
public:
    static constexpr int interpolation_order = 4;

    const std::vector<double>& times() const { return t_; }
    const std::vector<Vec>& states() const { return x_; }
    StopReason reason() const { return reason_; }
    int event_index() const { return event_index_; }
    double start_time() const { return t_.front(); }
    double end_time() const { return t_.back(); }
    const Vec& start_state() const { return x_.front(); }
    const Vec& end_state() const { return x_.back(); }
    int dim() const { return x_.empty() ? 0 : static_cast<int>(x_.front().size()); }

    /// Dense output; `t` must lie within [start_time, end_time].
    Vec at(double t) const;

private:
    std::vector<double> t_;
    std::vector<Vec> x_;
    std::vector<std::array<Vec, 5>> cont_;  // dense coefficients per step
    StopReason reason_ = StopReason::TimeLimit;
    int event_index_ = -1;

    friend Trajectory integrate(const FieldFn&, Vec, double, double, const IntegrateOptions&,
                                const std::vector<EventFn>&);
};

/// Integrates dx/dt = field(t, x) from t0 to t_end (t_end > t0). Stops at the
/// first sign change of any event function (refined to event_refine_tol in t),
/// when the sup-norm of the state exceeds blowup_norm, or when the step size
/// underflows / the derivative stays non-finite (StepFailure).
Trajectory integrate(const FieldFn& field, Vec x0, double t0, double t_end,
                     const IntegrateOptions& opts = {},
                     const std::vector<EventFn>& events = {});

// ---------------------------------------------------------------------------
// Newton iteration
// ---------------------------------------------------------------------------

using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;

struct NewtonOptions {
    double tol = 1e-12;
    int max_iter = 50;
    double cond_limit = 1e12;
};

struct NewtonResult {
    bool converged = false;
    bool singular = false;
    Vec x;
    double residual_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

/// Damped Newton with halving line search; never throws on non-convergence.
NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, Vec x0,
                          const NewtonOptions& opts = {});

/// Throwing wrapper: NumericsError on non-convergence or a singular Jacobian
/// (condition estimate above cond_limit).
Vec newton(const ResidualFn& residual, const JacobianFn& jacobian, Vec x0,
           const NewtonOptions& opts = {});

// ---------------------------------------------------------------------------
// Eigenvalues / eigenvectors of small dense real matrices
// ---------------------------------------------------------------------------

struct EigenDecomposition {
    std::vector<Complex> values;                 // sorted by descending real part
    std::vector<std::vector<Complex>> vectors;   // unit 2-norm, one per value
    Complex leading() const { return values.front(); }
    double max_real() const;
    double min_abs_real() const;
};

/// Hessenberg reduction + shifted QR; eigenvectors by inverse iteration.
/// Dimension must be <= 64.
EigenDecomposition eigen(const Mat& a);

/// Real part of an eigenvector for a real eigenvalue, sign-normalised so the
/// largest-magnitude component is positive.
Vec real_eigenvector(const EigenDecomposition& d, int index);

}  // namespace ratekit::numcore
