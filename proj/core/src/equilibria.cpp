#include "ratekit/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ratekit::equilibria {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// eigenvalue magnitude below which a stopped continuation counts as a fold
constexpr double kFoldEigWindow = 1e-3;

std::string fmt(double v) {
    char buf[40];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string class_name(StabilityClass c, int unstable_count) {
    switch (c) {
        case StabilityClass::Sink: return "Sink";
        case StabilityClass::Source: return "Source";
        case StabilityClass::NonHyperbolic: return "NonHyperbolic";
        case StabilityClass::Saddle: return "Saddle(" + std::to_string(unstable_count) + ")";
    }
    return "?";
}

StabilityClass classify(const EigenDecomposition& eigen, int& unstable_count, double tol) {
    unstable_count = 0;
    bool nonhyp = false;
    const int n = static_cast<int>(eigen.values.size());
    for (const auto& v : eigen.values) {
        if (std::fabs(v.real()) < tol) nonhyp = true;
        if (v.real() > 0) ++unstable_count;
    }
    if (nonhyp) return StabilityClass::NonHyperbolic;
    if (unstable_count == 0) return StabilityClass::Sink;
    if (unstable_count == n) return StabilityClass::Source;
    return StabilityClass::Saddle;
}

namespace {

EquilibriumRecord make_record(const FrozenSystem& frozen, const Vec& lambda, Vec x) {
    EquilibriumRecord rec;
    rec.x = std::move(x);
    rec.lambda = lambda;
    rec.eigen = numcore::eigen(frozen.jac_x(rec.x, lambda));
    rec.cls = classify(rec.eigen, rec.unstable_count);
    return rec;
}

numcore::NewtonResult solve_at(const FrozenSystem& frozen, const Vec& lambda, Vec guess) {
    auto res = [&](const Vec& x) { return frozen.f(x, lambda); };
    auto jac = [&](const Vec& x) { return frozen.jac_x(x, lambda); };
    return numcore::newton_solve(res, jac, std::move(guess));
}

}  // namespace

EquilibriumRecord find_equilibrium(const FrozenSystem& frozen, const Vec& lambda,
                                   const Vec& guess) {
    auto res = [&](const Vec& x) { return frozen.f(x, lambda); };
    auto jac = [&](const Vec& x) { return frozen.jac_x(x, lambda); };
    Vec x = numcore::newton(res, jac, guess);
    return make_record(frozen, lambda, std::move(x));
}

std::optional<EquilibriumRecord> try_find_equilibrium(const FrozenSystem& frozen,
                                                      const Vec& lambda, const Vec& guess) {
    auto nr = solve_at(frozen, lambda, guess);
    if (!nr.converged) return std::nullopt;
    return make_record(frozen, lambda, std::move(nr.x));
}

EquilibriumRecord Branch::at(const FrozenSystem& frozen, double p) const {
    if (records.empty()) throw NumericsError("empty branch");
    if (!lambda_of_param) throw NumericsError("branch lacks a path parametrisation");
    // bracket among the finite entries
    std::size_t lo = 0, hi = param.size() - 1;
    while (lo < param.size() && std::isinf(param[lo])) ++lo;
    while (hi > 0 && std::isinf(param[hi])) --hi;
    if (lo >= hi) {
        if (lo < param.size() && !std::isinf(param[lo])) {
            const Vec lambda = lambda_of_param(p);
            auto nr = solve_at(frozen, lambda, records[lo].x);
            if (!nr.converged) throw NumericsError("branch interpolation: Newton polish failed");
            return make_record(frozen, lambda, std::move(nr.x));
        }
        throw NumericsError("branch has no finite records");
    }
    const double pc = std::clamp(p, param[lo], param[hi]);
    auto it = std::upper_bound(param.begin() + lo, param.begin() + hi + 1, pc);
    std::size_t k = static_cast<std::size_t>(it - param.begin());
    k = std::clamp<std::size_t>(k, lo + 1, hi);
    const double p0 = param[k - 1], p1 = param[k];
    const double w = (p1 == p0) ? 0.0 : (pc - p0) / (p1 - p0);
    Vec guess(records[k].x.size());
    for (std::size_t i = 0; i < guess.size(); ++i)
        guess[i] = (1 - w) * records[k - 1].x[i] + w * records[k].x[i];
    const Vec lambda = lambda_of_param(pc);
    auto nr = solve_at(frozen, lambda, std::move(guess));
    if (!nr.converged) throw NumericsError("branch interpolation: Newton polish failed");
    return make_record(frozen, lambda, std::move(nr.x));
}

std::string Branch::to_csv() const {
    std::string out = "u_or_tau";
    if (!records.empty()) {
        const int d = static_cast<int>(records.front().lambda.size());
        const int n = static_cast<int>(records.front().x.size());
        for (int i = 1; i <= d; ++i) out += ",lam" + std::to_string(i);
        for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
        for (int i = 1; i <= n; ++i) out += ",re_eig" + std::to_string(i);
        out += ",class\n";
        for (std::size_t k = 0; k < records.size(); ++k) {
            out += fmt(param[k]);
            for (double v : records[k].lambda) out += "," + fmt(v);
            for (double v : records[k].x) out += "," + fmt(v);
            for (const auto& e : records[k].eigen.values) out += "," + fmt(e.real());
            out += "," + class_name(records[k].cls, records[k].unstable_count) + "\n";
        }
    } else {
        out += ",class\n";
    }
    return out;
}

namespace {

struct WalkResult {
    std::vector<double> param;
    std::vector<EquilibriumRecord> records;
    BranchEnd end = BranchEnd::PathEnd;
    double fold_param = std::numeric_limits<double>::quiet_NaN();
};

// advances from (p_start, start) toward p_end in either direction; records
// exclude the start point
WalkResult walk(const FrozenSystem& frozen, const std::function<Vec(double)>& lambda_of,
                const EquilibriumRecord& start, double p_start, double p_end,
                const ContinuationControl& ctrl) {
    WalkResult out;
    const double dir = p_end > p_start ? 1.0 : -1.0;
    const StabilityClass branch_cls = start.cls;
    const int branch_k = start.unstable_count;

    double p = p_start;
    EquilibriumRecord prev = start;
    double p_prev = p_start;
    bool have_prev2 = false;
    Vec x_prev2;
    double p_prev2 = 0;

    double h = std::min(ctrl.initial_step, ctrl.max_step);
    enum class Reject { None, Newton, Jump, Class, NonHyp };
    Reject last_reject = Reject::None;

    while (dir * (p_end - p) > 0) {
        h = std::min(h, std::fabs(p_end - p));
        const double p_try = p + dir * h;

        // secant predictor
        Vec guess = prev.x;
        if (have_prev2 && p_prev != p_prev2) {
            const double w = (p_try - p_prev) / (p_prev - p_prev2);
            for (std::size_t i = 0; i < guess.size(); ++i)
                guess[i] = prev.x[i] + w * (prev.x[i] - x_prev2[i]);
        }

        auto nr = solve_at(frozen, lambda_of(p_try), std::move(guess));
        Reject reject = Reject::None;
        EquilibriumRecord rec;
        if (!nr.converged) {
            reject = Reject::Newton;
        } else {
            double jump = 0;
            for (std::size_t i = 0; i < nr.x.size(); ++i)
                jump = std::max(jump, std::fabs(nr.x[i] - prev.x[i]));
            rec = make_record(frozen, lambda_of(p_try), std::move(nr.x));
            if (jump > ctrl.max_dx)
                reject = Reject::Jump;
            else if (rec.cls == StabilityClass::NonHyperbolic)
                reject = Reject::NonHyp;
            else if (rec.cls != branch_cls || rec.unstable_count != branch_k)
                reject = Reject::Class;
        }

        if (reject == Reject::None) {
            out.param.push_back(p_try);
            out.records.push_back(rec);
            x_prev2 = prev.x;
            p_prev2 = p_prev;
            have_prev2 = true;
            prev = std::move(rec);
            p_prev = p_try;
            p = p_try;
            h = std::min(h * 1.4, ctrl.max_step);
            last_reject = Reject::None;
            continue;
        }

        last_reject = reject;
        h *= 0.5;
        if (h < std::max(ctrl.min_step, kFoldTol * 0.01)) {
            const double eig_small = prev.eigen.min_abs_real();
            if (last_reject == Reject::NonHyp ||
                (last_reject == Reject::Newton && eig_small < kFoldEigWindow)) {
                out.end = BranchEnd::Fold;
                out.fold_param = p;
            } else if (last_reject == Reject::Class) {
                out.end = BranchEnd::ClassChange;
            } else {
                out.end = BranchEnd::NewtonFailure;
            }
            return out;
        }
    }
    out.end = BranchEnd::PathEnd;
    return out;
}

}  // namespace

Branch continue_branch(const FrozenSystem& frozen, const EquilibriumRecord& seed,
                       const ParameterPath& path, const ContinuationControl& ctrl) {
    double p_lo = 0.0, p_hi = 1.0;
    if (path.is_input_path()) {
        const auto& ip = path.input_path();
        const double t_far = ip.input.t_check();
        p_lo = std::isinf(ip.tau_lo) ? -t_far : ip.tau_lo;
        p_hi = std::isinf(ip.tau_hi) ? t_far : ip.tau_hi;
    }
    auto lambda_of = [path](double p) { return path.at(p); };

    // correct the seed at the path start
    auto nr = solve_at(frozen, lambda_of(p_lo), seed.x);
    if (!nr.converged) throw NumericsError("continuation seed did not converge at the path start");
    EquilibriumRecord start = make_record(frozen, lambda_of(p_lo), std::move(nr.x));
    if (start.cls == StabilityClass::NonHyperbolic)
        throw NumericsError("continuation seed is not hyperbolic");

    Branch b;
    b.lambda_of_param = lambda_of;
    b.param.push_back(p_lo);
    b.records.push_back(start);
    if (p_hi == p_lo) return b;  // degenerate path

    auto w = walk(frozen, lambda_of, start, p_lo, p_hi, ctrl);
    b.param.insert(b.param.end(), w.param.begin(), w.param.end());
    b.records.insert(b.records.end(), w.records.begin(), w.records.end());
    b.begin_end = BranchEnd::PathEnd;
    b.end_end = w.end;
    b.fold_param = w.fold_param;
    return b;
}

Branch moving_equilibrium(const FrozenSystem& frozen, const ExternalInput& input,
                          const EquilibriumRecord& seed, const ContinuationControl& ctrl) {
    const double rho = input.rho();
    const double t_far = input.t_check();
    auto lambda_of = [input](double tau) { return input.value(tau); };

    auto nr = solve_at(frozen, input.value(0.0), seed.x);
    if (!nr.converged) throw NumericsError("moving equilibrium seed did not converge at tau=0");
    EquilibriumRecord start = make_record(frozen, input.value(0.0), std::move(nr.x));
    if (start.cls == StabilityClass::NonHyperbolic)
        throw NumericsError("moving equilibrium seed is not hyperbolic");

    // tau steps sized to the input time scale; the adaptive growth gives the
    // log-like coarsening into the flat tails
    ContinuationControl c = ctrl;
    c.initial_step = 0.1 / rho;
    c.max_step = 2.5 / rho;

    auto wplus = walk(frozen, lambda_of, start, 0.0, t_far, c);
    auto wminus = walk(frozen, lambda_of, start, 0.0, -t_far, c);

    Branch b;
    b.lambda_of_param = lambda_of;
    for (std::size_t i = wminus.param.size(); i-- > 0;) {
        b.param.push_back(wminus.param[i]);
        b.records.push_back(wminus.records[i]);
    }
    b.param.push_back(0.0);
    b.records.push_back(start);
    for (std::size_t i = 0; i < wplus.param.size(); ++i) {
        b.param.push_back(wplus.param[i]);
        b.records.push_back(wplus.records[i]);
    }
    b.begin_end = wminus.end;
    b.end_end = wplus.end;
    if (wminus.end == BranchEnd::Fold || wplus.end == BranchEnd::Fold)
        b.fold_param = wminus.end == BranchEnd::Fold ? wminus.fold_param : wplus.fold_param;

    // attach the limit-system equilibria when the interval is unbounded
    if (wminus.end == BranchEnd::PathEnd) {
        if (auto rec = try_find_equilibrium(frozen, input.limit(-1), b.records.front().x)) {
            b.param.insert(b.param.begin(), -kInf);
            b.records.insert(b.records.begin(), std::move(*rec));
            b.begin_end = BranchEnd::LimitAttached;
        }
    }
    if (wplus.end == BranchEnd::PathEnd) {
        if (auto rec = try_find_equilibrium(frozen, input.limit(+1), b.records.back().x)) {
            b.param.push_back(kInf);
            b.records.push_back(std::move(*rec));
            b.end_end = BranchEnd::LimitAttached;
        }
    }
    return b;
}

}  // namespace ratekit::equilibria
