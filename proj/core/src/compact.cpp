#include "ratekit/compact.hpp"

#include <algorithm>
#include <cmath>

namespace ratekit::compact {

namespace {
constexpr double kBoundaryClip = 1e-15;
}

double g_alpha(double alpha, double tau) {
    if (!(alpha > 0)) throw ValidationError("alpha must be positive");
    if (std::isinf(tau)) return tau > 0 ? 1.0 : -1.0;
    return std::tanh(alpha * tau / 2);
}

double h_alpha(double alpha, double s) {
    if (!(alpha > 0)) throw ValidationError("alpha must be positive");
    if (!(std::fabs(s) < 1.0)) throw ValidationError("h_alpha requires |s| < 1");
    return 2.0 * std::atanh(s) / alpha;
}

double h_alpha_prime(double alpha, double s) {
    return 2.0 / (alpha * (1.0 - s * s));
}

double choose_alpha(const ExternalInput& input, double r, std::optional<double> leading) {
    const double rho = input.rho();
    double bound = rho;
    if (leading) {
        if (!(*leading < 0)) throw ValidationError("leading sink eigenvalue must be negative");
        bound = std::min(bound, -*leading / r);
    }
    return 0.5 * bound;
}

CompactifiedSystem::CompactifiedSystem(FrozenSystem frozen, ExternalInput input, double r,
                                       std::optional<double> alpha_override,
                                       std::optional<double> leading_sink_eig)
    : frozen_(std::move(frozen)), input_(std::move(input)), r_(r) {
    if (!(r_ > 0)) throw ValidationError("rate parameter r must be positive");
    if (frozen_.d() != input_.dim())
        throw ValidationError("input dimension does not match the field");
    alpha_ = alpha_override ? *alpha_override
                            : choose_alpha(input_, r_, leading_sink_eig);
    if (!(alpha_ > 0) || alpha_ > input_.rho())
        throw ValidationError("compactification parameter alpha must lie in (0, rho]");
}

Vec CompactifiedSystem::lambda_at(double s) const {
    if (s >= 1.0 - kBoundaryClip) return input_.limit(+1);
    if (s <= -1.0 + kBoundaryClip) return input_.limit(-1);
    return input_.value(h_alpha(alpha_, s));
}

Vec CompactifiedSystem::dlambda_ds(double s) const {
    if (std::fabs(s) >= 1.0 - kBoundaryClip) {
        // analytic limit: Lambda' decays like e^{-rho|tau|} while dtau/ds
        // grows like e^{alpha|tau|}, so the product vanishes for alpha < rho
        return Vec(input_.dim(), 0.0);
    }
    const double tau = h_alpha(alpha_, s);
    Vec d = input_.derivative(tau);
    const double hp = h_alpha_prime(alpha_, s);
    for (double& v : d) v *= hp;
    return d;
}

Vec CompactifiedSystem::rhs(const Vec& xs) const {
    const int n = frozen_.n();
    if (static_cast<int>(xs.size()) != n + 1)
        throw ValidationError("compactified state must have n+1 entries");
    double s = xs[n];
    if (s > 1.0 && s <= 1.0 + kBoundaryClip) s = 1.0;
    if (s < -1.0 && s >= -1.0 - kBoundaryClip) s = -1.0;
    Vec x(xs.begin(), xs.begin() + n);
    Vec out(n + 1);
    Vec fx = frozen_.f(x, lambda_at(s));
    for (int i = 0; i < n; ++i) out[i] = fx[i] / r_;
    out[n] = alpha_ * (1.0 - s * s) / 2;
    return out;
}

numcore::FieldFn CompactifiedSystem::field() const {
    const auto cs = *this;
    return [cs](double, const Vec& xs, Vec& dxs) {
        try {
            dxs = cs.rhs(xs);
        } catch (const Error&) {
            std::fill(dxs.begin(), dxs.end(), std::numeric_limits<double>::quiet_NaN());
        }
    };
}

numcore::FieldFn CompactifiedSystem::reversed_field() const {
    const auto cs = *this;
    return [cs](double, const Vec& xs, Vec& dxs) {
        try {
            dxs = cs.rhs(xs);
            for (double& v : dxs) v = -v;
        } catch (const Error&) {
            std::fill(dxs.begin(), dxs.end(), std::numeric_limits<double>::quiet_NaN());
        }
    };
}

numcore::FieldFn CompactifiedSystem::x_field() const {
    const auto frozen = frozen_;
    const auto input = input_;
    const double r = r_;
    return [frozen, input, r](double tau, const Vec& x, Vec& dx) {
        try {
            dx = frozen.f(x, input.value(tau));
            for (double& v : dx) v /= r;
        } catch (const Error&) {
            std::fill(dx.begin(), dx.end(), std::numeric_limits<double>::quiet_NaN());
        }
    };
}

numcore::FieldFn CompactifiedSystem::x_field_reversed(double tau_ref) const {
    const auto frozen = frozen_;
    const auto input = input_;
    const double r = r_;
    return [frozen, input, r, tau_ref](double sigma, const Vec& x, Vec& dx) {
        try {
            dx = frozen.f(x, input.value(tau_ref - sigma));
            for (double& v : dx) v = -v / r;
        } catch (const Error&) {
            std::fill(dx.begin(), dx.end(), std::numeric_limits<double>::quiet_NaN());
        }
    };
}

CompactJacobian CompactifiedSystem::jacobian(const Vec& xs) const {
    const int n = frozen_.n();
    double s = std::clamp(xs[n], -1.0, 1.0);
    Vec x(xs.begin(), xs.begin() + n);
    const Vec lam = lambda_at(s);

    CompactJacobian out;
    out.m = Mat(n + 1, n + 1);
    const Mat jx = frozen_.jac_x(x, lam);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.m(i, j) = jx(i, j) / r_;

    const Vec dls = dlambda_ds(s);
    const Mat jl = frozen_.jac_lambda(x, lam);
    for (int i = 0; i < n; ++i) {
        double v = 0;
        for (int k = 0; k < frozen_.d(); ++k) v += jl(i, k) * dls[k];
        out.m(i, n) = v / r_;
    }
    for (int j = 0; j < n; ++j) out.m(n, j) = 0.0;
    out.m(n, n) = -alpha_ * s;

    if (std::fabs(s) >= 1.0 - kBoundaryClip && alpha_ >= input_.rho())
        out.limit_entry_exact = false;  // boundary column limit not guaranteed zero
    return out;
}

LiftedEquilibrium CompactifiedSystem::lift_equilibrium(const EquilibriumRecord& base,
                                                       Side side) const {
    if (base.cls == equilibria::StabilityClass::NonHyperbolic)
        throw NumericsError("cannot lift a non-hyperbolic equilibrium");
    const int n = frozen_.n();
    LiftedEquilibrium out;
    out.base = base;
    out.side = side;
    out.point = base.x;
    out.point.push_back(side == Side::Future ? 1.0 : -1.0);

    const auto cj = jacobian(out.point);
    out.eigen = numcore::eigen(cj.m);

    // the transverse eigenpair carries the dominant s-component
    int best = 0;
    double best_s = -1.0;
    for (int k = 0; k <= n; ++k) {
        const double sc = std::abs(out.eigen.vectors[k][n]);
        if (sc > best_s) {
            best_s = sc;
            best = k;
        }
    }
    out.extra_index = best;
    out.extra_value = out.eigen.values[best];
    out.extra_vector = numcore::real_eigenvector(out.eigen, best);

    double xpart = 0;
    for (int i = 0; i < n; ++i) xpart += out.extra_vector[i] * out.extra_vector[i];
    out.v_normal_to_S = std::sqrt(xpart) <= 1e-8;

    double others = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k)
        if (k != best) others = std::max(others, out.eigen.values[k].real());
    out.v_is_leading = out.extra_value.real() > others;
    return out;
}

std::vector<Vec> CompactifiedSystem::critical_manifold_sample(
    const equilibria::Branch& branch) const {
    std::vector<Vec> pts;
    pts.reserve(branch.size());
    for (std::size_t k = 0; k < branch.size(); ++k) {
        Vec p = branch.records[k].x;
        p.push_back(g_alpha(alpha_, branch.param[k]));
        pts.push_back(std::move(p));
    }
    return pts;
}

}  // namespace ratekit::compact
