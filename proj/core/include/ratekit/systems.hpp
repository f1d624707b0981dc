#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ratekit/expr.hpp"
#include "ratekit/numcore.hpp"

namespace ratekit::systems {

using numcore::Mat;
using numcore::Vec;

/// Autonomous vector field f(x, lambda) given as parsed expressions over
/// x1..xn, lam1..lamd plus optional named constants. Immutable; evaluation
/// is re-entrant.
class FrozenSystem {
public:
    FrozenSystem(int n, int d, const std::vector<std::string>& component_sources,
                 const std::vector<std::string>& constant_names = {},
                 const Vec& constant_values = {});

    int n() const { return n_; }
    int d() const { return d_; }

    Vec f(const Vec& x, const Vec& lambda) const;
    Mat jac_x(const Vec& x, const Vec& lambda) const;       // n x n
    Mat jac_lambda(const Vec& x, const Vec& lambda) const;  // n x d

    const std::vector<std::string>& constant_names() const { return const_names_; }
    const Vec& constant_values() const { return const_values_; }
    const std::vector<std::string>& component_sources() const { return sources_; }

    /// Copy with one named constant replaced (used by parameter sweeps).
    FrozenSystem with_constant(const std::string& name, double value) const;

private:
    void fill_buffer(const Vec& x, const Vec& lambda, Vec& buf) const;

    int n_, d_;
    std::vector<std::string> sources_;
    std::vector<expr::ExprAst> comps_;
    std::vector<std::string> const_names_;
    Vec const_values_;
};

// ---------------------------------------------------------------------------
// External inputs
// ---------------------------------------------------------------------------

/// Lambda_i(tau) = past + (future-past)(1+tanh(steepness*tau/2))/2
struct TanhComponent {
    double past = 0, future = 0, steepness = 1;
};

/// Lambda_i(tau) = base + amplitude * sech(tau/width)
struct SechPulseComponent {
    double base = 0, amplitude = 0, width = 1;
};

/// User expression in tau with declared limits; verified numerically.
struct ExprComponent {
    std::string source;
    double past = 0, future = 0;
};

using InputComponent = std::variant<TanhComponent, SechPulseComponent, ExprComponent>;

/// Time-varying input with declared limits lambda+- and exponential decay
/// coefficient rho > 0. Construction verifies the declared limits at
/// tau = +-T_check (T_check = 40/rho) and checks that ||Lambda'(tau)|| e^{rho|tau|}
/// stays bounded on |tau| in [T_check/2, T_check]; for the tanh shape a
/// declared rho above the steepness is rejected outright.
class ExternalInput {
public:
    ExternalInput(std::vector<InputComponent> components, double rho,
                  const std::vector<std::string>& constant_names = {},
                  const Vec& constant_values = {});

    int dim() const { return static_cast<int>(comps_.size()); }
    double rho() const;

    /// Componentwise value; tau = +-infinity returns the declared limits
    /// exactly.
    Vec value(double tau) const;
    Vec derivative(double tau) const;
    /// Declared limit; sign > 0 gives lambda+, sign < 0 gives lambda-.
    Vec limit(int sign) const;

    double t_check() const { return 40.0 / rho_; }

    /// Input with time reparametrised through sigma_{tau_a,tau_b,eps}; the
    /// decay coefficient becomes eps * rho.
    ExternalInput reparametrized(double tau_alpha, double tau_beta, double eps) const;

    bool is_reparametrized() const { return reparam_.has_value(); }

    const std::vector<InputComponent>& components() const { return comps_; }

private:
    struct Sigma {
        double tau_alpha, tau_beta, eps;
    };

    double base_value(int i, double tau) const;
    double base_derivative(int i, double tau) const;
    void verify() const;

    std::vector<InputComponent> comps_;
    std::vector<std::optional<expr::ExprAst>> asts_;  // parsed ExprComponent bodies
    double rho_;
    std::vector<std::string> const_names_;
    Vec const_values_;
    std::optional<Sigma> reparam_;
};

/// Smooth reparametrisation sigma(tau) with sigma(0)=tau_alpha,
/// sigma(eps)=tau_beta, linear tails of slope eps. Requires tau_alpha < tau_beta
/// and 0 < eps^2 < tau_beta - tau_alpha.
double sigma_reparam_value(double tau_alpha, double tau_beta, double eps, double tau);
double sigma_reparam_derivative(double tau_alpha, double tau_beta, double eps, double tau);

// ---------------------------------------------------------------------------
// Parameter paths
// ---------------------------------------------------------------------------

/// Path traced by an input on a time interval (tau_lo, tau_hi), either of
/// which may be infinite.
struct PathOfInput {
    ExternalInput input;
    double tau_lo = -std::numeric_limits<double>::infinity();
    double tau_hi = std::numeric_limits<double>::infinity();
};

/// Explicit curve u in [0,1] -> R^d given as d expressions in "u".
struct ExplicitCurve {
    std::vector<std::string> component_sources;
    std::vector<expr::ExprAst> comps;  // filled by ParameterPath

    static ExplicitCurve parse(const std::vector<std::string>& sources,
                               const std::vector<std::string>& constant_names = {},
                               const Vec& constant_values = {});
    Vec at(double u, const Vec& constant_values) const;
};

class ParameterPath {
public:
    static ParameterPath of_input(ExternalInput input,
                                  double tau_lo = -std::numeric_limits<double>::infinity(),
                                  double tau_hi = std::numeric_limits<double>::infinity());
    static ParameterPath explicit_curve(const std::vector<std::string>& sources, int d,
                                        const std::vector<std::string>& constant_names = {},
                                        const Vec& constant_values = {});

    int dim() const;
    bool is_input_path() const { return std::holds_alternative<PathOfInput>(rep_); }
    const PathOfInput& input_path() const { return std::get<PathOfInput>(rep_); }

    /// lambda at path parameter; for input paths the parameter is tau (with
    /// +-infinity allowed on unbounded intervals), for explicit curves it is
    /// u in [0,1].
    Vec at(double param) const;

    /// Parameter grid of m points covering the path; input paths on
    /// unbounded intervals are sampled with tanh-style clustering so the
    /// limits are included.
    std::vector<double> param_grid(int m) const;

private:
    using Rep = std::variant<PathOfInput, ExplicitCurve>;
    explicit ParameterPath(Rep rep) : rep_(std::move(rep)) {}

    Rep rep_;
    Vec curve_consts_;
};

/// m sampled lambda points whose closure approximates the path; duplicate
/// points (within tolerance) are removed.
std::vector<Vec> trace_path(const ParameterPath& path, int m);

// ---------------------------------------------------------------------------
// The r-parametrised nonautonomous system x' = f(x, Lambda(tau))/r
// ---------------------------------------------------------------------------

struct NonautonomousSystem {
    FrozenSystem frozen;
    ExternalInput input;
    double r = 1.0;

    NonautonomousSystem(FrozenSystem f, ExternalInput in, double rate);

    Vec rhs(double tau, const Vec& x) const;

    /// Field adapter for numcore::integrate; evaluation domain errors become
    /// non-finite entries, which the integrator treats as a rejected step.
    numcore::FieldFn field() const;

    /// Autonomous limit-system field at lambda+- (sign > 0: future).
    numcore::FieldFn limit_field(int sign) const;
};

/// Frozen-system field at fixed lambda on the system time scale.
numcore::FieldFn frozen_field(const FrozenSystem& frozen, const Vec& lambda);

}  // namespace ratekit::systems
