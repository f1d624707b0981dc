#pragma once

#include "ratekit/equilibria.hpp"
#include "ratekit/systems.hpp"

namespace ratekit::compact {

using equilibria::EquilibriumRecord;
using numcore::Mat;
using numcore::Vec;
using systems::ExternalInput;
using systems::FrozenSystem;

/// s = g_alpha(tau) = tanh(alpha tau / 2), the time compactification.
double g_alpha(double alpha, double tau);
/// Inverse: tau = (1/alpha) ln((1+s)/(1-s)); requires |s| < 1.
double h_alpha(double alpha, double s);
/// d tau / d s = 2 / (alpha (1 - s^2)).
double h_alpha_prime(double alpha, double s);

/// alpha = half of min{rho, -Re(l1)/r} (just rho when no leading sink
/// eigenvalue is supplied); always strictly below rho.
double choose_alpha(const ExternalInput& input, double r,
                    std::optional<double> leading_sink_eig = std::nullopt);

/// Jacobian of the compactified flow plus a flag recording whether the
/// boundary column limit is analytically zero (requires alpha < rho).
struct CompactJacobian {
    Mat m;
    bool limit_entry_exact = true;
};

enum class Side { Past, Future };

/// Lifted limit equilibrium (x, s=+-1) with the eigen-data of the
/// (n+1)x(n+1) Jacobian and the extra eigenvector transverse to S+-.
struct LiftedEquilibrium {
    EquilibriumRecord base;
    Side side = Side::Future;
    Vec point;  // (x, s)
    numcore::EigenDecomposition eigen;
    int extra_index = -1;  // eigenpair transverse to the invariant subspace
    numcore::Complex extra_value;
    Vec extra_vector;       // real; unit norm
    bool v_normal_to_S = false;
    bool v_is_leading = false;
};

/// Autonomous flow on R^n x [-1,1]:
///   x' = f(x, Lambda_alpha(s)) / r,   s' = alpha (1 - s^2) / 2,
/// with Lambda_alpha(+-1) = lambda+- exactly and the subspaces s = +-1
/// invariant. Immutable; safe to share across sweep workers.
class CompactifiedSystem {
public:
    CompactifiedSystem(FrozenSystem frozen, ExternalInput input, double r,
                       std::optional<double> alpha_override = std::nullopt,
                       std::optional<double> leading_sink_eig = std::nullopt);

    const FrozenSystem& frozen() const { return frozen_; }
    const ExternalInput& input() const { return input_; }
    double r() const { return r_; }
    double alpha() const { return alpha_; }
    int n() const { return frozen_.n(); }

    /// Glued input: Lambda(h_alpha(s)) on the interior, the declared limits
    /// at s = +-1.
    Vec lambda_at(double s) const;
    /// d Lambda_alpha / d s by the chain rule; the analytic limit 0 at the
    /// boundary when alpha < rho.
    Vec dlambda_ds(double s) const;

    /// Field value at (x, s); size n+1. s is clipped into [-1,1] when within
    /// roundoff (1e-15) of the boundary.
    Vec rhs(const Vec& xs) const;
    numcore::FieldFn field() const;
    /// Backward-time field (for stable-manifold runs).
    numcore::FieldFn reversed_field() const;

    /// x-only field along the invariant graph s = g_alpha(tau): the s
    /// equation decouples and has that exact solution, so trajectories of the
    /// compactified flow are integrated in x with tau as the clock. This
    /// avoids the relative error the boundary tail of s would otherwise
    /// accumulate.
    numcore::FieldFn x_field() const;
    /// Backward x-only field around the reference time: sigma -> tau_ref - sigma.
    numcore::FieldFn x_field_reversed(double tau_ref) const;

    CompactJacobian jacobian(const Vec& xs) const;

    LiftedEquilibrium lift_equilibrium(const EquilibriumRecord& base, Side side) const;

    /// Maps a moving-equilibrium branch (tau, x) onto the critical set
    /// {(x, g_alpha(tau))}; infinite-tau records land on s = +-1.
    std::vector<Vec> critical_manifold_sample(const equilibria::Branch& branch) const;

private:
    FrozenSystem frozen_;
    ExternalInput input_;
    double r_;
    double alpha_;
};

}  // namespace ratekit::compact
