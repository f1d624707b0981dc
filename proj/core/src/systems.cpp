#include "ratekit/systems.hpp"

#include <algorithm>
#include <cmath>

namespace ratekit::systems {

namespace {

std::vector<std::string> state_variable_names(int n, int d,
                                              const std::vector<std::string>& constants) {
    std::vector<std::string> names;
    names.reserve(n + d + constants.size());
    for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
    for (int i = 1; i <= d; ++i) names.push_back("lam" + std::to_string(i));
    for (const auto& c : constants) names.push_back(c);
    return names;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

FrozenSystem::FrozenSystem(int n, int d, const std::vector<std::string>& component_sources,
                           const std::vector<std::string>& constant_names,
                           const Vec& constant_values)
    : n_(n), d_(d), sources_(component_sources), const_names_(constant_names),
      const_values_(constant_values) {
    if (n <= 0) throw ValidationError("state dimension must be positive");
    if (d < 0) throw ValidationError("input dimension must be non-negative");
    if (static_cast<int>(component_sources.size()) != n)
        throw ValidationError("field needs exactly n component expressions");
    if (const_names_.size() != const_values_.size())
        throw ValidationError("constant names/values size mismatch");
    const auto vars = state_variable_names(n, d, const_names_);
    comps_.reserve(n);
    for (const auto& src : component_sources) comps_.push_back(expr::ExprAst::parse(src, vars));
}

void FrozenSystem::fill_buffer(const Vec& x, const Vec& lambda, Vec& buf) const {
    buf.resize(n_ + d_ + const_values_.size());
    std::copy(x.begin(), x.end(), buf.begin());
    std::copy(lambda.begin(), lambda.end(), buf.begin() + n_);
    std::copy(const_values_.begin(), const_values_.end(), buf.begin() + n_ + d_);
}

Vec FrozenSystem::f(const Vec& x, const Vec& lambda) const {
    Vec buf;
    fill_buffer(x, lambda, buf);
    Vec out(n_);
    for (int i = 0; i < n_; ++i) out[i] = comps_[i].eval(buf);
    return out;
}

Mat FrozenSystem::jac_x(const Vec& x, const Vec& lambda) const {
    Vec buf;
    fill_buffer(x, lambda, buf);
    Mat j(n_, n_);
    for (int i = 0; i < n_; ++i) {
        const auto d = comps_[i].eval_dual(buf);
        for (int k = 0; k < n_; ++k) j(i, k) = d.partials[k];
    }
    return j;
}

Mat FrozenSystem::jac_lambda(const Vec& x, const Vec& lambda) const {
    Vec buf;
    fill_buffer(x, lambda, buf);
    Mat j(n_, d_);
    for (int i = 0; i < n_; ++i) {
        const auto d = comps_[i].eval_dual(buf);
        for (int k = 0; k < d_; ++k) j(i, k) = d.partials[n_ + k];
    }
    return j;
}

FrozenSystem FrozenSystem::with_constant(const std::string& name, double value) const {
    auto values = const_values_;
    auto it = std::find(const_names_.begin(), const_names_.end(), name);
    if (it == const_names_.end())
        throw ValidationError("unknown constant '" + name + "'");
    values[static_cast<std::size_t>(it - const_names_.begin())] = value;
    return FrozenSystem(n_, d_, sources_, const_names_, values);
}

// ---------------------------------------------------------------------------
// sigma reparametrisation family
// ---------------------------------------------------------------------------

namespace {

double chi(double v) { return v > 0 ? std::exp(-1.0 / v) : 0.0; }
double chi_prime(double v) { return v > 0 ? std::exp(-1.0 / v) / (v * v) : 0.0; }

double xi(double v) {
    const double a = chi(v), b = chi(1.0 - v);
    return a / (a + b);
}

double xi_prime(double v) {
    const double a = chi(v), b = chi(1.0 - v);
    const double ap = chi_prime(v), bp = chi_prime(1.0 - v);
    const double s = a + b;
    return (ap * b + a * bp) / (s * s);
}

void check_sigma_domain(double tau_alpha, double tau_beta, double eps) {
    if (!(tau_alpha < tau_beta))
        throw ValidationError("sigma reparametrisation requires tau_alpha < tau_beta");
    if (!(eps > 0) || !(eps * eps < tau_beta - tau_alpha))
        throw ValidationError("sigma reparametrisation requires 0 < eps^2 < tau_beta - tau_alpha");
}

}  // namespace

double sigma_reparam_value(double tau_alpha, double tau_beta, double eps, double tau) {
    check_sigma_domain(tau_alpha, tau_beta, eps);
    if (tau <= 0.0) return tau_alpha + eps * tau;
    if (tau >= eps) return tau_beta + eps * (tau - eps);
    return tau_alpha + eps * tau + (tau_beta - tau_alpha - eps * eps) * xi(tau / eps);
}

double sigma_reparam_derivative(double tau_alpha, double tau_beta, double eps, double tau) {
    check_sigma_domain(tau_alpha, tau_beta, eps);
    if (tau <= 0.0 || tau >= eps) return eps;
    return eps + (tau_beta - tau_alpha - eps * eps) * xi_prime(tau / eps) / eps;
}

// ---------------------------------------------------------------------------
// ExternalInput
// ---------------------------------------------------------------------------

ExternalInput::ExternalInput(std::vector<InputComponent> components, double rho,
                             const std::vector<std::string>& constant_names,
                             const Vec& constant_values)
    : comps_(std::move(components)), rho_(rho), const_names_(constant_names),
      const_values_(constant_values) {
    if (comps_.empty()) throw ValidationError("input needs at least one component");
    if (!(rho_ > 0)) throw ValidationError("decay coefficient rho must be positive");
    asts_.resize(comps_.size());
    std::vector<std::string> vars{"tau"};
    for (const auto& c : const_names_) vars.push_back(c);
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        if (const auto* e = std::get_if<ExprComponent>(&comps_[i]))
            asts_[i] = expr::ExprAst::parse(e->source, vars);
    }
    verify();
}

double ExternalInput::rho() const { return reparam_ ? reparam_->eps * rho_ : rho_; }

double ExternalInput::base_value(int i, double tau) const {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, TanhComponent>) {
                return c.past + (c.future - c.past) * 0.5 * (1.0 + std::tanh(c.steepness * tau / 2));
            } else if constexpr (std::is_same_v<T, SechPulseComponent>) {
                return c.base + c.amplitude / std::cosh(tau / c.width);
            } else {
                Vec buf(1 + const_values_.size());
                buf[0] = tau;
                std::copy(const_values_.begin(), const_values_.end(), buf.begin() + 1);
                return asts_[i]->eval(buf);
            }
        },
        comps_[i]);
}

double ExternalInput::base_derivative(int i, double tau) const {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, TanhComponent>) {
                const double s = 1.0 / std::cosh(c.steepness * tau / 2);
                return (c.future - c.past) * c.steepness * 0.25 * s * s;
            } else if constexpr (std::is_same_v<T, SechPulseComponent>) {
                const double u = tau / c.width;
                return -c.amplitude / c.width * std::tanh(u) / std::cosh(u);
            } else {
                Vec buf(1 + const_values_.size());
                buf[0] = tau;
                std::copy(const_values_.begin(), const_values_.end(), buf.begin() + 1);
                return asts_[i]->eval_dual(buf).partials[0];
            }
        },
        comps_[i]);
}

Vec ExternalInput::limit(int sign) const {
    Vec out(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        out[i] = std::visit(
            [&](const auto& c) -> double {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, TanhComponent>) {
                    return sign > 0 ? c.future : c.past;
                } else if constexpr (std::is_same_v<T, SechPulseComponent>) {
                    return c.base;
                } else {
                    return sign > 0 ? c.future : c.past;
                }
            },
            comps_[i]);
    }
    return out;
}

Vec ExternalInput::value(double tau) const {
    if (std::isinf(tau)) return limit(tau > 0 ? +1 : -1);
    const double t = reparam_
                         ? sigma_reparam_value(reparam_->tau_alpha, reparam_->tau_beta,
                                               reparam_->eps, tau)
                         : tau;
    Vec out(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = base_value(static_cast<int>(i), t);
    return out;
}

Vec ExternalInput::derivative(double tau) const {
    if (std::isinf(tau)) return Vec(comps_.size(), 0.0);
    double t = tau, factor = 1.0;
    if (reparam_) {
        t = sigma_reparam_value(reparam_->tau_alpha, reparam_->tau_beta, reparam_->eps, tau);
        factor =
            sigma_reparam_derivative(reparam_->tau_alpha, reparam_->tau_beta, reparam_->eps, tau);
    }
    Vec out(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i)
        out[i] = factor * base_derivative(static_cast<int>(i), t);
    return out;
}

void ExternalInput::verify() const {
    // closed-form decay rates bound the admissible rho for builtin shapes
    for (const auto& c : comps_) {
        if (const auto* t = std::get_if<TanhComponent>(&c)) {
            if (!(t->steepness > 0)) throw ValidationError("tanh steepness must be positive");
            if (rho_ > t->steepness)
                throw ValidationError(
                    "declared rho exceeds the tanh component decay rate (steepness)");
        } else if (const auto* s = std::get_if<SechPulseComponent>(&c)) {
            if (!(s->width > 0)) throw ValidationError("sech pulse width must be positive");
            if (rho_ > 1.0 / s->width)
                throw ValidationError(
                    "declared rho exceeds the sech pulse decay rate (1/width)");
        }
    }

    const double T = t_check();
    for (int sign : {-1, +1}) {
        const Vec lim = limit(sign);
        double err = 0;
        for (std::size_t i = 0; i < comps_.size(); ++i) {
            const double v = base_value(static_cast<int>(i), sign * T);
            err = std::max(err, std::fabs(v - lim[i]) / (1.0 + std::fabs(lim[i])));
        }
        if (err > 1e-6)
            throw ValidationError("input does not reach its declared limit at tau = " +
                                  std::to_string(sign * T));

        // ||Lambda'(tau)|| e^{rho|tau|} must not grow across [T/2, T]
        const int K = 9;
        double first = -1, last = -1;
        for (int k = 0; k < K; ++k) {
            const double tau = sign * (T / 2 + (T / 2) * k / (K - 1));
            double dn = 0;
            for (std::size_t i = 0; i < comps_.size(); ++i)
                dn += std::pow(base_derivative(static_cast<int>(i), tau), 2);
            dn = std::sqrt(dn);
            const double m = dn == 0.0 ? 0.0 : std::exp(std::log(dn) + rho_ * std::fabs(tau));
            if (k == 0) first = m;
            if (k == K - 1) last = m;
        }
        if (last > 10.0 * (first + 1e-9))
            throw ValidationError(
                "||Lambda'|| e^{rho|tau|} grows across the check window; declared rho is too "
                "large for the actual decay");
    }
}

ExternalInput ExternalInput::reparametrized(double tau_alpha, double tau_beta,
                                            double eps) const {
    check_sigma_domain(tau_alpha, tau_beta, eps);
    if (reparam_) throw ValidationError("input is already reparametrized");
    ExternalInput out = *this;
    out.reparam_ = Sigma{tau_alpha, tau_beta, eps};
    return out;
}

// ---------------------------------------------------------------------------
// Parameter paths
// ---------------------------------------------------------------------------

ExplicitCurve ExplicitCurve::parse(const std::vector<std::string>& sources,
                                   const std::vector<std::string>& constant_names,
                                   const Vec& constant_values) {
    (void)constant_values;
    ExplicitCurve c;
    c.component_sources = sources;
    std::vector<std::string> vars{"u"};
    for (const auto& n : constant_names) vars.push_back(n);
    for (const auto& s : sources) c.comps.push_back(expr::ExprAst::parse(s, vars));
    return c;
}

Vec ExplicitCurve::at(double u, const Vec& constant_values) const {
    Vec buf(1 + constant_values.size());
    buf[0] = u;
    std::copy(constant_values.begin(), constant_values.end(), buf.begin() + 1);
    Vec out(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) out[i] = comps[i].eval(buf);
    return out;
}

ParameterPath ParameterPath::of_input(ExternalInput input, double tau_lo, double tau_hi) {
    if (!(tau_lo < tau_hi)) throw ValidationError("path interval must be non-empty");
    return ParameterPath(Rep{PathOfInput{std::move(input), tau_lo, tau_hi}});
}

ParameterPath ParameterPath::explicit_curve(const std::vector<std::string>& sources, int d,
                                            const std::vector<std::string>& constant_names,
                                            const Vec& constant_values) {
    if (static_cast<int>(sources.size()) != d)
        throw ValidationError("explicit curve needs d component expressions");
    ParameterPath p(Rep{ExplicitCurve::parse(sources, constant_names, constant_values)});
    p.curve_consts_ = constant_values;
    return p;
}

int ParameterPath::dim() const {
    if (const auto* in = std::get_if<PathOfInput>(&rep_)) return in->input.dim();
    return static_cast<int>(std::get<ExplicitCurve>(rep_).comps.size());
}

Vec ParameterPath::at(double param) const {
    if (const auto* in = std::get_if<PathOfInput>(&rep_)) return in->input.value(param);
    return std::get<ExplicitCurve>(rep_).at(param, curve_consts_);
}

std::vector<double> ParameterPath::param_grid(int m) const {
    if (m < 2) throw ValidationError("sample count must be at least 2");
    std::vector<double> grid;
    grid.reserve(m);
    if (const auto* in = std::get_if<PathOfInput>(&rep_)) {
        const bool lo_inf = std::isinf(in->tau_lo);
        const bool hi_inf = std::isinf(in->tau_hi);
        if (!lo_inf && !hi_inf) {
            for (int k = 0; k < m; ++k)
                grid.push_back(in->tau_lo + (in->tau_hi - in->tau_lo) * k / (m - 1.0));
            return grid;
        }
        // tanh-style clustering: uniform in s = tanh(rho tau / 2), limits
        // included as infinities
        const double rho = in->input.rho();
        auto tau_of_s = [&](double s) { return (2.0 / rho) * std::atanh(s); };
        const double s_lo = lo_inf ? -1.0 : std::tanh(rho * in->tau_lo / 2);
        const double s_hi = hi_inf ? 1.0 : std::tanh(rho * in->tau_hi / 2);
        for (int k = 0; k < m; ++k) {
            const double s = s_lo + (s_hi - s_lo) * k / (m - 1.0);
            if (k == 0 && lo_inf)
                grid.push_back(-kInf);
            else if (k == m - 1 && hi_inf)
                grid.push_back(kInf);
            else
                grid.push_back(tau_of_s(s));
        }
        return grid;
    }
    for (int k = 0; k < m; ++k) grid.push_back(k / (m - 1.0));
    return grid;
}

std::vector<Vec> trace_path(const ParameterPath& path, int m) {
    const auto grid = path.param_grid(m);
    std::vector<Vec> pts;
    pts.reserve(grid.size());
    double scale = 0;
    for (double p : grid) {
        Vec v = path.at(p);
        for (double x : v) scale = std::max(scale, std::fabs(x));
        pts.push_back(std::move(v));
    }
    // de-duplicate near-identical samples (non-monotone inputs revisit values)
    const double tol = 1e-9 * (1.0 + scale);
    std::vector<Vec> out;
    for (auto& v : pts) {
        bool dup = false;
        for (const auto& w : out) {
            double d = 0;
            for (std::size_t i = 0; i < v.size(); ++i) d = std::max(d, std::fabs(v[i] - w[i]));
            if (d <= tol) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// NonautonomousSystem
// ---------------------------------------------------------------------------

NonautonomousSystem::NonautonomousSystem(FrozenSystem f, ExternalInput in, double rate)
    : frozen(std::move(f)), input(std::move(in)), r(rate) {
    if (!(r > 0)) throw ValidationError("rate parameter r must be positive");
    if (frozen.d() != input.dim())
        throw ValidationError("input dimension does not match the field");
}

Vec NonautonomousSystem::rhs(double tau, const Vec& x) const {
    Vec out = frozen.f(x, input.value(tau));
    for (double& v : out) v /= r;
    return out;
}

numcore::FieldFn NonautonomousSystem::field() const {
    const auto sys = *this;  // immutable copy, safe across threads
    return [sys](double tau, const Vec& x, Vec& dx) {
        try {
            dx = sys.rhs(tau, x);
        } catch (const EvalError&) {
            std::fill(dx.begin(), dx.end(), std::numeric_limits<double>::quiet_NaN());
        }
    };
}

numcore::FieldFn NonautonomousSystem::limit_field(int sign) const {
    return frozen_field(frozen, input.limit(sign));
}

numcore::FieldFn frozen_field(const FrozenSystem& frozen, const Vec& lambda) {
    const auto f = frozen;
    const Vec lam = lambda;
    return [f, lam](double, const Vec& x, Vec& dx) {
        try {
            dx = f.f(x, lam);
        } catch (const EvalError&) {
            std::fill(dx.begin(), dx.end(), std::numeric_limits<double>::quiet_NaN());
        }
    };
}

}  // namespace ratekit::systems
