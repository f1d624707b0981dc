#include "ratekit/tipping.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

namespace ratekit::tipping {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    char buf[40];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::optional<double> catalogue_leading(const AttractorCatalogue& catalogue) {
    std::optional<double> l1;
    for (const auto& e : catalogue.entries) {
        const double m = e.sink.eigen.max_real();
        if (!l1 || m > *l1) l1 = m;
    }
    return l1;
}

// trajectory of the rate-r solution up to the handover time, in x with tau
// as the clock
struct HandoverRun {
    numcore::Trajectory traj;
    bool blew_up = false;
    bool failed = false;
    double tau_hand = 0;
    double min_probe = kInf;
};

HandoverRun run_to_handover(const FrozenSystem& frozen, const ExternalInput& input, double r,
                            const TrajectorySource& source, const AttractorCatalogue& catalogue,
                            const RateSearchOptions& opts) {
    compact::CompactifiedSystem cs(frozen, input, r, opts.alpha_override,
                                   catalogue_leading(catalogue));
    // handover when the input is settled to machine precision: the earlier of
    // s = s_hand and tau = 2 T_check
    const double tau_hand =
        std::min(compact::h_alpha(cs.alpha(), opts.s_hand), 2.0 * input.t_check());

    HandoverRun out;
    out.tau_hand = tau_hand;
    if (source.e_minus) {
        const double delta =
            opts.seed_delta.value_or(std::min(manifolds::kSeedDeltaMax,
                                              manifolds::default_seed_delta(source.e_minus->x)));
        auto pr = manifolds::pullback_attractor(cs, *source.e_minus, delta,
                                                compact::g_alpha(cs.alpha(), tau_hand));
        out.blew_up = pr.blew_up;
        out.traj = std::move(pr.traj);
    } else if (source.point) {
        if (source.point->tau0 >= tau_hand)
            throw ValidationError("start time must precede the handover time");
        auto trj = numcore::integrate(cs.x_field(), source.point->x0, source.point->tau0,
                                      tau_hand);
        out.blew_up = trj.reason() == numcore::StopReason::Blowup;
        out.failed = trj.reason() == numcore::StopReason::StepFailure;
        out.traj = std::move(trj);
    } else {
        throw ValidationError("trajectory source is empty");
    }
    return out;
}

double min_probe_distance(const numcore::Trajectory& trj, const Vec& probe) {
    if (probe.empty()) return kInf;
    double best = kInf;
    const auto& ts = trj.times();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        auto d2 = [&](const Vec& x) {
            double s = 0;
            for (std::size_t i = 0; i < probe.size(); ++i)
                s += (x[i] - probe[i]) * (x[i] - probe[i]);
            return s;
        };
        best = std::min(best, d2(trj.states()[k]));
        if (k + 1 < ts.size()) {
            for (int q = 1; q <= 3; ++q)
                best = std::min(best, d2(trj.at(ts[k] + (ts[k + 1] - ts[k]) * q / 4.0)));
        }
    }
    return std::sqrt(best);
}

}  // namespace

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Reversible: return "Reversible";
        case Verdict::Irreversible: return "Irreversible";
        case Verdict::Degenerate: return "Degenerate";
        case Verdict::NoTippingFound: return "NoTippingFound";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// tracking
// ---------------------------------------------------------------------------

TrackingReport check_tracking(const FrozenSystem& frozen, const ExternalInput& input,
                              const Branch& sink_branch, double r, double delta,
                              const std::optional<StartPoint>& start,
                              const AttractorCatalogue& catalogue,
                              const TrackingOptions& opts) {
    TrackingReport rep;
    rep.r = r;
    rep.delta = delta;

    TrajectorySource source;
    if (start) {
        source = TrajectorySource::from_point(start->x0, start->tau0);
    } else {
        if (sink_branch.param.empty() || !std::isinf(sink_branch.param.front()))
            throw ValidationError(
                "tracking from the past sink needs a branch reaching tau = -infinity");
        source = TrajectorySource::from_past_sink(sink_branch.front());
    }

    RateSearchOptions ropts;
    ropts.alpha_override = opts.alpha_override;
    ropts.seed_delta = opts.seed_delta;
    ropts.t_max = opts.t_max;
    auto run = run_to_handover(frozen, input, r, source, catalogue, ropts);

    // deviation over the branch grid restricted to the trajectory's domain
    double sup = 0, sup_tau = 0;
    double lo = kInf, hi = -kInf;
    for (std::size_t k = 0; k < sink_branch.param.size(); ++k) {
        const double tau = sink_branch.param[k];
        if (std::isinf(tau)) continue;
        if (tau < run.traj.start_time() || tau > run.traj.end_time()) continue;
        const Vec x = run.traj.at(tau);
        double d2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            d2 += std::pow(x[i] - sink_branch.records[k].x[i], 2);
        const double d = std::sqrt(d2);
        lo = std::min(lo, tau);
        hi = std::max(hi, tau);
        if (d > sup) {
            sup = d;
            sup_tau = tau;
        }
    }
    rep.interval_lo = lo;
    rep.interval_hi = hi;
    rep.sup_deviation = sup;
    rep.sup_deviation_tau = sup_tau;
    rep.delta_close = sup < delta;

    if (run.blew_up || run.failed) {
        rep.end_outcome.kind = OmegaOutcome::Kind::Divergent;
        rep.end_point = false;
        return rep;
    }

    manifolds::ClassifyOptions copts;
    copts.t_max = opts.t_max;
    rep.end_outcome = manifolds::classify_omega_limit(frozen, input.limit(+1),
                                                      run.traj.end_state(), catalogue, copts);

    // end-point tracking means convergence to the branch's own future limit
    rep.end_point = false;
    if (rep.end_outcome.is_attractor() && !sink_branch.param.empty() &&
        std::isinf(sink_branch.param.back())) {
        const auto& e_plus = sink_branch.back().x;
        const auto& hit = catalogue.entries[rep.end_outcome.attractor].sink.x;
        double d2 = 0;
        for (std::size_t i = 0; i < e_plus.size(); ++i)
            d2 += std::pow(e_plus[i] - hit[i], 2);
        rep.end_point = std::sqrt(d2) <= catalogue.entries[rep.end_outcome.attractor].eps_cap;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// scans
// ---------------------------------------------------------------------------

SideOracle prepare_side_oracle(const FrozenSystem& frozen, const ExternalInput& input,
                               const Branch& edge_branch, double arclength, int m) {
    (void)m;
    if (edge_branch.param.empty() || !std::isinf(edge_branch.param.back()))
        throw ValidationError("side oracle needs an edge branch reaching the future limit");
    SideOracle oracle;
    const auto& eta = edge_branch.back();
    oracle.theta_plus = manifolds::frozen_threshold(frozen, input.limit(+1), eta, arclength);
    return oracle;
}

std::string InstabilityScan::to_csv() const {
    std::string out = forward ? "tau1,tau2,signed_distance\n" : "p1,p2,signed_distance\n";
    for (std::size_t i = 0; i < grid1.size(); ++i)
        for (std::size_t j = 0; j < grid2.size(); ++j) {
            out += fmt(grid1[i]);
            out += ",";
            out += fmt(grid2[j]);
            out += ",";
            out += fmt(value(i, j));
            out += "\n";
        }
    return out;
}

namespace {

// shared scan core over two parameter grids
InstabilityScan scan_core(const FrozenSystem& frozen, const Branch& sink_branch,
                          const Branch& edge_branch, const AttractorCatalogue& catalogue,
                          const std::vector<double>& grid1, const std::vector<double>& grid2,
                          bool forward, const ScanOptions& opts) {
    InstabilityScan scan;
    scan.forward = forward;
    scan.grid1 = grid1;
    scan.grid2 = grid2;
    scan.values.assign(grid1.size() * grid2.size(), std::numeric_limits<double>::quiet_NaN());

    // sink positions and thresholds along their grids
    std::vector<Vec> sinks(grid1.size());
    for (std::size_t i = 0; i < grid1.size(); ++i)
        sinks[i] = sink_branch.at(frozen, grid1[i]).x;
    std::vector<manifolds::ManifoldSample> thresholds;
    std::vector<EquilibriumRecord> edges;
    thresholds.reserve(grid2.size());
    for (std::size_t j = 0; j < grid2.size(); ++j) {
        auto edge = edge_branch.at(frozen, grid2[j]);
        thresholds.push_back(
            manifolds::frozen_threshold(frozen, edge.lambda, edge, opts.arclength));
        edges.push_back(std::move(edge));
    }

    for (std::size_t i = 0; i < grid1.size(); ++i)
        for (std::size_t j = 0; j < grid2.size(); ++j) {
            if (forward && !(grid1[i] < grid2[j])) continue;
            scan.values[i * grid2.size() + j] =
                manifolds::signed_distance(sinks[i], thresholds[j]);
        }

    // sign changes between adjacent finite neighbours
    auto straddle = [&](std::size_t i1, std::size_t j1, std::size_t i2, std::size_t j2) {
        const double a = scan.value(i1, j1), b = scan.value(i2, j2);
        if (!std::isfinite(a) || !std::isfinite(b)) return;
        if (a == 0.0 || a * b < 0.0) {
            ScanPair p;
            p.a = 0.5 * (grid1[i1] + grid1[i2]);
            p.b = 0.5 * (grid2[j1] + grid2[j2]);
            scan.sign_changes.push_back(p);
        }
    };
    for (std::size_t i = 0; i < grid1.size(); ++i)
        for (std::size_t j = 0; j + 1 < grid2.size(); ++j) straddle(i, j, i, j + 1);
    for (std::size_t i = 0; i + 1 < grid1.size(); ++i)
        for (std::size_t j = 0; j < grid2.size(); ++j) straddle(i, j, i + 1, j);
    scan.unstable = !scan.sign_changes.empty();

    // basin instability: classify the two sides of theta(lambda_b) against
    // the frozen system's own attractors at lambda_b
    if (scan.unstable) {
        const auto& pair = scan.sign_changes.front();
        auto edge = edge_branch.at(frozen, pair.b);
        auto th = manifolds::frozen_threshold(frozen, edge.lambda, edge, opts.arclength);
        // local catalogue: catalogue sinks continued to lambda_b
        manifolds::AttractorCatalogue local;
        for (const auto& e : catalogue.entries) {
            if (auto rec = equilibria::try_find_equilibrium(frozen, edge.lambda, e.sink.x)) {
                if (rec->is_sink()) {
                    try {
                        local.add(std::move(*rec), e.eps_cap);
                    } catch (const ValidationError&) {
                        // sinks collapsing onto an existing ball: skip
                    }
                }
            }
        }
        if (local.size() > 0) {
            const Vec& anchor = th.points[th.points.size() / 2];
            const Vec& nu = th.normals[th.normals.size() / 2];
            Vec up = anchor, dn = anchor;
            for (std::size_t i = 0; i < up.size(); ++i) {
                up[i] += opts.side_offset * nu[i];
                dn[i] -= opts.side_offset * nu[i];
            }
            auto ou = manifolds::classify_omega_limit(frozen, edge.lambda, up, local);
            auto od = manifolds::classify_omega_limit(frozen, edge.lambda, dn, local);
            scan.basin_unstable = ou.is_attractor() && od.is_attractor() &&
                                  ou.attractor != od.attractor;
        }
    }
    return scan;
}

std::vector<double> finite_param_grid(const Branch& b, int m) {
    double lo = kInf, hi = -kInf;
    for (double p : b.param) {
        if (std::isinf(p)) continue;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    if (!(lo < hi)) throw ValidationError("branch has no usable parameter range");
    std::vector<double> g(m);
    for (int k = 0; k < m; ++k) g[k] = lo + (hi - lo) * k / (m - 1.0);
    return g;
}

}  // namespace

InstabilityScan scan_threshold_instability(const FrozenSystem& frozen, const Branch& sink_branch,
                                           const Branch& edge_branch,
                                           const AttractorCatalogue& catalogue,
                                           const ScanOptions& opts) {
    // common finite parameter range of the two branches
    auto g1 = finite_param_grid(sink_branch, opts.m);
    auto g2 = finite_param_grid(edge_branch, opts.m);
    return scan_core(frozen, sink_branch, edge_branch, catalogue, g1, g2, false, opts);
}

InstabilityScan scan_forward_threshold_instability(const FrozenSystem& frozen,
                                                   const ExternalInput& input,
                                                   const Branch& sink_branch,
                                                   const Branch& edge_branch,
                                                   const AttractorCatalogue& catalogue,
                                                   const ScanOptions& opts) {
    // tau grid clustered like the compactification: uniform in tanh(rho tau/2)
    const double rho = input.rho();
    double lo = -input.t_check(), hi = input.t_check();
    auto branch_range = [&](const Branch& b, double& l, double& h) {
        double bl = kInf, bh = -kInf;
        for (double p : b.param) {
            if (std::isinf(p)) continue;
            bl = std::min(bl, p);
            bh = std::max(bh, p);
        }
        l = std::max(l, bl);
        h = std::min(h, bh);
    };
    branch_range(sink_branch, lo, hi);
    branch_range(edge_branch, lo, hi);
    if (!(lo < hi)) throw ValidationError("branches share no tau range");

    const double s_lo = std::tanh(rho * lo / 2), s_hi = std::tanh(rho * hi / 2);
    std::vector<double> g(opts.m);
    for (int k = 0; k < opts.m; ++k) {
        const double s = s_lo + (s_hi - s_lo) * k / (opts.m - 1.0);
        // clamp against tanh saturating to +-1 in double precision
        g[k] = (2.0 / rho) * std::atanh(std::clamp(s, -1.0 + 1e-16, 1.0 - 1e-16));
        g[k] = std::clamp(g[k], lo, hi);
    }
    g.front() = lo;
    g.back() = hi;
    return scan_core(frozen, sink_branch, edge_branch, catalogue, g, g, true, opts);
}

// ---------------------------------------------------------------------------
// critical rates
// ---------------------------------------------------------------------------

RateClassification rate_classification(const FrozenSystem& frozen, const ExternalInput& input,
                                       double r, const TrajectorySource& source,
                                       const AttractorCatalogue& catalogue,
                                       const RateSearchOptions& opts, const Vec& probe) {
    auto run = run_to_handover(frozen, input, r, source, catalogue, opts);
    RateClassification rc;
    const double pb = min_probe_distance(run.traj, probe);
    if (run.blew_up || run.failed) {
        const bool big = numcore::norm_inf(run.traj.end_state()) > 1e5;
        rc.outcome.kind = (run.blew_up || big) ? OmegaOutcome::Kind::Divergent
                                               : OmegaOutcome::Kind::Unresolved;
        rc.outcome.min_dist_to_probe = pb;
        return rc;
    }
    if (opts.side_oracle) {
        const auto& oracle = *opts.side_oracle;
        double min_ds = kInf;
        auto probe_ds = [&](const Vec& x) {
            const double ds = manifolds::signed_distance(x, oracle.theta_plus);
            if (std::isfinite(ds)) min_ds = std::min(min_ds, ds);
        };
        auto sample_traj = [&](const numcore::Trajectory& trj, double from) {
            const auto& ts = trj.times();
            for (std::size_t k = 0; k < ts.size(); ++k) {
                if (ts[k] < from) continue;
                probe_ds(trj.states()[k]);
                if (k + 1 < ts.size())
                    for (int q = 1; q <= 3; ++q)
                        probe_ds(trj.at(ts[k] + (ts[k + 1] - ts[k]) * q / 4.0));
            }
        };

        // theta+ becomes invariant once the input has settled; sampling from
        // tau_settle keeps the sign oracle unbiased while catching excursions
        // that finish before the handover
        const Vec lam_plus = input.limit(+1);
        double lam_scale = 1.0;
        for (double v : lam_plus) lam_scale = std::max(lam_scale, std::fabs(v));
        double tau_settle = run.tau_hand;
        for (double tau = 0; tau < run.tau_hand; tau += 0.5 / input.rho()) {
            const Vec lam = input.value(tau);
            double gap = 0;
            for (std::size_t i = 0; i < lam.size(); ++i)
                gap = std::max(gap, std::fabs(lam[i] - lam_plus[i]));
            if (gap <= 1e-9 * lam_scale) {
                tau_settle = tau;
                break;
            }
        }
        sample_traj(run.traj, tau_settle);

        // continuation until captured or divergent
        auto field = systems::frozen_field(frozen, input.limit(+1));
        std::vector<numcore::EventFn> stops;
        for (const auto& e : catalogue.entries) {
            const Vec target = e.sink.x;
            const double eps = e.eps_cap;
            stops.push_back([target, eps](double, const Vec& x) {
                double d2 = 0;
                for (std::size_t i = 0; i < x.size(); ++i)
                    d2 += (x[i] - target[i]) * (x[i] - target[i]);
                return std::sqrt(d2) - eps;
            });
        }
        auto leg = numcore::integrate(field, run.traj.end_state(), 0.0,
                                      std::min(opts.t_max, 1e3), {}, stops);
        sample_traj(leg, -kInf);

        rc.min_ds = min_ds;
        if (std::isfinite(min_ds)) rc.side = min_ds > 0 ? +1 : (min_ds < 0 ? -1 : 0);
    }
    manifolds::ClassifyOptions copts;
    copts.t_max = opts.t_max;
    copts.probe = probe;
    rc.outcome = manifolds::classify_omega_limit(frozen, input.limit(+1),
                                                 run.traj.end_state(), catalogue, copts);
    rc.outcome.min_dist_to_probe = std::min(rc.outcome.min_dist_to_probe, pb);
    return rc;
}

OmegaOutcome rate_outcome(const FrozenSystem& frozen, const ExternalInput& input, double r,
                          const TrajectorySource& source, const AttractorCatalogue& catalogue,
                          const RateSearchOptions& opts, const Vec& probe) {
    return rate_classification(frozen, input, r, source, catalogue, opts, probe).outcome;
}

namespace {

CriticalRate bisect_bracket(const FrozenSystem& frozen, const ExternalInput& input,
                            const TrajectorySource& source, const AttractorCatalogue& catalogue,
                            const RateSearchOptions& opts, double r_lo, RateClassification o_lo,
                            double r_hi, RateClassification o_hi) {
    int unresolved_sides = 0;
    while (r_hi - r_lo > opts.tol_r) {
        const double mid = 0.5 * (r_lo + r_hi);
        auto om = rate_classification(frozen, input, mid, source, catalogue, opts);
        if (om.outcome.kind == OmegaOutcome::Kind::Unresolved &&
            o_lo.outcome.kind == OmegaOutcome::Kind::Unresolved &&
            o_hi.outcome.kind == OmegaOutcome::Kind::Unresolved) {
            ++unresolved_sides;
            break;
        }
        if (om.same_as(o_lo)) {
            r_lo = mid;
            o_lo = om;
        } else {
            r_hi = mid;
            o_hi = om;
        }
    }
    CriticalRate out;
    out.r_lo = r_lo;
    out.r_hi = r_hi;
    out.below = o_lo.outcome;
    out.above = o_hi.outcome;
    out.below_side = o_lo.side;
    out.above_side = o_hi.side;
    out.unresolved_refinement = unresolved_sides > 0;
    return out;
}

}  // namespace

TippingReport find_critical_rate(const FrozenSystem& frozen, const ExternalInput& input,
                                 const TrajectorySource& source,
                                 const AttractorCatalogue& catalogue,
                                 const RateSearchOptions& opts) {
    if (!(opts.r_lo > 0) || !(opts.r_lo < opts.r_hi))
        throw ValidationError("rate range must satisfy 0 < r_lo < r_hi");
    TippingReport report;

    auto o_lo = rate_classification(frozen, input, opts.r_lo, source, catalogue, opts);
    auto o_hi = rate_classification(frozen, input, opts.r_hi, source, catalogue, opts);

    std::vector<std::pair<double, RateClassification>> knots;
    if (!o_lo.same_as(o_hi)) {
        knots = {{opts.r_lo, o_lo}, {opts.r_hi, o_hi}};
    } else {
        // geometric coarse scan; every outcome change spawns its own bisection
        const int K = std::max(2, opts.coarse_points);
        knots.reserve(K);
        for (int k = 0; k < K; ++k) {
            const double r =
                opts.r_lo * std::pow(opts.r_hi / opts.r_lo, k / (K - 1.0));
            if (k == 0) {
                knots.emplace_back(r, o_lo);
            } else if (k == K - 1) {
                knots.emplace_back(r, o_hi);
            } else {
                knots.emplace_back(
                    r, rate_classification(frozen, input, r, source, catalogue, opts));
            }
        }
    }

    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        if (knots[k].second.same_as(knots[k + 1].second)) continue;
        report.rates.push_back(bisect_bracket(frozen, input, source, catalogue, opts,
                                              knots[k].first, knots[k].second,
                                              knots[k + 1].first, knots[k + 1].second));
    }

    if (report.rates.empty()) {
        report.verdict = Verdict::NoTippingFound;
    } else if (std::any_of(report.rates.begin(), report.rates.end(),
                           [](const CriticalRate& c) { return c.unresolved_refinement; })) {
        report.verdict = Verdict::Degenerate;
        report.degenerate_reason = "unresolved outcomes during bracket refinement";
    } else {
        report.verdict = Verdict::Degenerate;  // refined by classify_tipping
        report.degenerate_reason = "not classified";
    }
    return report;
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

namespace {

// dwell times of the near-critical trajectory within the capture ball of each
// candidate saddle; the shadowing happens mostly before the handover, so the
// compactified run and the future-system continuation both count
struct EtaIdentification {
    int candidate = -1;
    double dwell = 0;
};

EtaIdentification identify_eta(const std::vector<const numcore::Trajectory*>& runs,
                               const std::vector<EquilibriumRecord>& candidates) {
    EtaIdentification best;
    if (candidates.empty()) return best;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto& eta = candidates[c].x;
        double dwell = 0;
        for (const auto* trj : runs) {
            const auto& ts = trj->times();
            for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
                // sample each step densely enough for short passages
                const int sub = 4;
                for (int q = 0; q < sub; ++q) {
                    const double t0 = ts[k] + (ts[k + 1] - ts[k]) * q / sub;
                    const double t1 = ts[k] + (ts[k + 1] - ts[k]) * (q + 1) / sub;
                    const Vec x = trj->at(t0);
                    double d2 = 0;
                    for (std::size_t i = 0; i < x.size(); ++i)
                        d2 += std::pow(x[i] - eta[i], 2);
                    if (std::sqrt(d2) <= kEtaCapture) dwell += t1 - t0;
                }
            }
        }
        if (dwell > best.dwell) {
            best.dwell = dwell;
            best.candidate = static_cast<int>(c);
        }
    }
    return best;
}

// which tail the rate-r trajectory escapes along: sign of the exit
// displacement projected on the unstable eigenvector
int escape_side(const FrozenSystem& frozen, const ExternalInput& input,
                const TrajectorySource& source, const AttractorCatalogue& catalogue,
                const RateSearchOptions& opts, double r, const EquilibriumRecord& eta,
                const Vec& v_u) {
    auto run = run_to_handover(frozen, input, r, source, catalogue, opts);
    if (run.blew_up || run.failed) {
        // escape already happened before the handover: project the endpoint
        double acc = 0;
        for (std::size_t i = 0; i < v_u.size(); ++i)
            acc += (run.traj.end_state()[i] - eta.x[i]) * v_u[i];
        return acc >= 0 ? +1 : -1;
    }
    auto field = systems::frozen_field(frozen, input.limit(+1));
    auto trj = numcore::integrate(field, run.traj.end_state(), 0.0, opts.t_max);
    bool was_inside = false;
    const auto& ts = trj.times();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const Vec& x = trj.states()[k];
        double d2 = 0, proj = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d2 += std::pow(x[i] - eta.x[i], 2);
            proj += (x[i] - eta.x[i]) * v_u[i];
        }
        const bool inside = std::sqrt(d2) <= kEtaCapture;
        if (was_inside && !inside) return proj >= 0 ? +1 : -1;
        was_inside = inside;
    }
    // never entered: project the closest approach
    double best = kInf, best_proj = 0;
    for (const auto& x : trj.states()) {
        double d2 = 0, proj = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d2 += std::pow(x[i] - eta.x[i], 2);
            proj += (x[i] - eta.x[i]) * v_u[i];
        }
        if (d2 < best) {
            best = d2;
            best_proj = proj;
        }
    }
    return best_proj >= 0 ? +1 : -1;
}

}  // namespace

void classify_tipping(const FrozenSystem& frozen, const ExternalInput& input,
                      const TrajectorySource& source, const AttractorCatalogue& catalogue,
                      const std::vector<EquilibriumRecord>& saddle_candidates,
                      const RateSearchOptions& opts, TippingReport& report) {
    if (report.rates.empty()) {
        report.verdict = Verdict::NoTippingFound;
        return;
    }
    auto& rate = report.rates.front();

    // filter candidates to admissible edge states
    std::vector<EquilibriumRecord> candidates;
    for (const auto& c : saddle_candidates)
        if (c.is_edge_candidate()) candidates.push_back(c);

    // the near-critical trajectory shadows the edge state it converges to;
    // a blowup after the dwell (divergent tail) still carries the evidence
    auto mid_run = run_to_handover(frozen, input, rate.r_c(), source, catalogue, opts);
    std::vector<const numcore::Trajectory*> runs{&mid_run.traj};
    numcore::Trajectory extension;
    if (!mid_run.blew_up && !mid_run.failed) {
        auto future_field = systems::frozen_field(frozen, input.limit(+1));
        extension = numcore::integrate(future_field, mid_run.traj.end_state(), 0.0,
                                       std::min(opts.t_max, 1e3));
        runs.push_back(&extension);
    }
    auto eta_id = identify_eta(runs, candidates);
    if (eta_id.candidate < 0 || eta_id.dwell <= 0) {
        report.verdict = Verdict::Degenerate;
        report.degenerate_reason = "no regular edge state identified near the critical rate";
        return;
    }
    const EquilibriumRecord eta = candidates[eta_id.candidate];
    report.eta_plus = eta;

    // connection evidence at the bracket edges
    rate.below = rate_outcome(frozen, input, rate.r_lo, source, catalogue, opts, eta.x);
    rate.above = rate_outcome(frozen, input, rate.r_hi, source, catalogue, opts, eta.x);
    rate.min_dist_eta_below = rate.below.min_dist_to_probe;
    rate.min_dist_eta_above = rate.above.min_dist_to_probe;

    const double delta = manifolds::default_seed_delta(eta.x);
    auto tails =
        manifolds::edge_tails(frozen, input.limit(+1), eta, catalogue, delta, opts.t_max);

    // label upper/lower by matching the bracket sides to the tails
    int above_side = 0;
    if (tails.plus.outcome.same_as(tails.minus.outcome)) {
        // same attractor on both branches: match geometrically via the escape
        // direction along the unstable eigenvector
        Vec v_u = numcore::real_eigenvector(eta.eigen, 0);
        above_side =
            escape_side(frozen, input, source, catalogue, opts, rate.r_hi, eta, v_u);
    } else {
        if (rate.above.same_as(tails.plus.outcome))
            above_side = +1;
        else if (rate.above.same_as(tails.minus.outcome))
            above_side = -1;
        else if (rate.below.same_as(tails.plus.outcome))
            above_side = -1;
        else if (rate.below.same_as(tails.minus.outcome))
            above_side = +1;
    }
    if (above_side == 0) {
        report.verdict = Verdict::Degenerate;
        report.degenerate_reason = "bracket outcomes do not match the edge tails";
        return;
    }
    auto upper = above_side > 0 ? tails.plus : tails.minus;
    auto lower = above_side > 0 ? tails.minus : tails.plus;
    upper.sample.kind = manifolds::ManifoldKind::EdgeTailUpper;
    lower.sample.kind = manifolds::ManifoldKind::EdgeTailLower;
    report.upper_tail = upper;
    report.lower_tail = lower;

    if (!upper.outcome.is_attractor() || !lower.outcome.is_attractor()) {
        report.verdict = Verdict::Degenerate;
        report.degenerate_reason = "an edge tail does not connect to a catalogued attractor";
        return;
    }
    const double tail_gap =
        manifolds::hausdorff_distance(upper.sample.points, lower.sample.points);
    if (tail_gap <= kIdenticalTailTol) {
        report.verdict = Verdict::Degenerate;
        report.degenerate_reason = "upper and lower edge tails coincide";
        return;
    }
    report.verdict = upper.outcome.attractor == lower.outcome.attractor
                         ? Verdict::Reversible
                         : Verdict::Irreversible;
    report.degenerate_reason.clear();
}

// ---------------------------------------------------------------------------
// sigma construction
// ---------------------------------------------------------------------------

ConstructedInput construct_tipping_input(const FrozenSystem& frozen, const ExternalInput& input,
                                         const Branch& sink_branch, const Branch& edge_branch,
                                         double r_star, const InstabilityScan& scan,
                                         const AttractorCatalogue& catalogue,
                                         const ConstructControls& controls) {
    if (!scan.forward || !scan.unstable)
        throw ValidationError(
            "construct_tipping_input requires a forward-threshold-unstable scan");

    // pick the detected pair with the largest tau_b: anchoring the threshold
    // close to its future limit sharpens the connection evidence
    ScanPair pair = scan.sign_changes.front();
    for (const auto& p : scan.sign_changes)
        if (p.b > pair.b) pair = p;
    if (controls.pair) pair = *controls.pair;

    const double rho = input.rho();
    const double w = controls.neighbourhood > 0 ? controls.neighbourhood : 1.0 / rho;

    // local Delta sampling over the neighbourhood N
    auto theta_at = [&](double tau2) {
        auto edge = edge_branch.at(frozen, tau2);
        return manifolds::frozen_threshold(frozen, edge.lambda, edge, 2.0);
    };
    auto delta_at = [&](double tau1, double tau2) {
        return manifolds::signed_distance(sink_branch.at(frozen, tau1).x, theta_at(tau2));
    };

    const int G = 21;
    double best_pos = -kInf, best_neg = kInf;
    std::array<double, 2> pos_at{pair.a, pair.b}, neg_at{pair.a, pair.b};
    for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
            const double t1 = pair.a - w + 2 * w * i / (G - 1.0);
            const double t2 = pair.b - w + 2 * w * j / (G - 1.0);
            if (!(t1 < t2)) continue;
            double v;
            try {
                v = delta_at(t1, t2);
            } catch (const Error&) {
                continue;
            }
            if (!std::isfinite(v)) continue;
            if (v > best_pos) {
                best_pos = v;
                pos_at = {t1, t2};
            }
            if (v < best_neg) {
                best_neg = v;
                neg_at = {t1, t2};
            }
        }
    const double attainable = std::min(best_pos, -best_neg);
    if (!(attainable > 0))
        throw NumericsError(
            "signed distance does not take both signs over the sampled neighbourhood");
    double delta_target = controls.delta_target > 0 ? controls.delta_target : 0.5 * attainable;
    if (delta_target > attainable)
        throw ValidationError("delta_target " + fmt(delta_target) +
                              " exceeds the attainable |Delta| range " + fmt(attainable) +
                              " over the neighbourhood");

    // walk the segment between the extremes to pin Delta = +-delta_target
    auto delta_on_segment = [&](double zeta) {
        const double t1 = neg_at[0] + zeta * (pos_at[0] - neg_at[0]);
        const double t2 = neg_at[1] + zeta * (pos_at[1] - neg_at[1]);
        return delta_at(t1, t2);
    };
    auto solve_for = [&](double target) {
        double lo = 0, hi = 1;  // Delta(lo) = best_neg < target < best_pos = Delta(hi)
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (delta_on_segment(mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        const double z = 0.5 * (lo + hi);
        return std::array<double, 2>{neg_at[0] + z * (pos_at[0] - neg_at[0]),
                                     neg_at[1] + z * (pos_at[1] - neg_at[1])};
    };
    const auto p_plus = solve_for(+delta_target);
    const auto p_minus = solve_for(-delta_target);

    // eta+ and e+ shared by all reparametrisations (the limits are unchanged)
    if (edge_branch.param.empty() || !std::isinf(edge_branch.param.back()))
        throw ValidationError("edge branch must reach its future limit");
    const EquilibriumRecord eta = edge_branch.back();

    // pullback of the reparametrised input up to tau, via the sink branch
    // composed with sigma for the deviation checks
    struct ZetaRun {
        double ds = 0;
        OmegaOutcome outcome;
        double min_eta = kInf;
    };
    RateSearchOptions ropts;
    ropts.t_max = manifolds::kDefaultTMax;

    auto run_pair = [&](const std::array<double, 2>& p, double eps,
                        bool want_outcome) -> ZetaRun {
        ZetaRun out;
        auto tilde = input.reparametrized(p[0], p[1], eps);
        compact::CompactifiedSystem cs(frozen, tilde, r_star, {},
                                       catalogue_leading(catalogue));
        auto source = TrajectorySource::from_past_sink(sink_branch.front());
        auto run = run_to_handover(frozen, tilde, r_star, source, catalogue, ropts);
        // signed distance to the rate-dependent threshold section at tau = eps;
        // a later blowup (divergent branch) does not invalidate x(eps)
        if (run.traj.end_time() >= eps) {
            auto section = manifolds::threshold_section(cs, eta, eps, 2.0);
            out.ds = manifolds::signed_distance(run.traj.at(eps), section);
        } else {
            out.ds = std::numeric_limits<double>::quiet_NaN();
        }
        if (want_outcome) {
            out.outcome = rate_outcome(frozen, tilde, r_star, source, catalogue, ropts, eta.x);
            out.min_eta = out.outcome.min_dist_to_probe;
        }
        return out;
    };

    // shrink eps until the three proof bounds hold at both segment ends
    const double gap = pair.b - pair.a;
    double eps = controls.eps_initial > 0 ? controls.eps_initial
                                          : std::min(0.8 * std::sqrt(gap), 1.0 / rho);
    std::string failing;
    while (true) {
        failing.clear();
        for (const auto& p : {p_plus, p_minus}) {
            auto tilde = input.reparametrized(p[0], p[1], eps);
            compact::CompactifiedSystem cs(frozen, tilde, r_star, {},
                                           catalogue_leading(catalogue));
            auto src = TrajectorySource::from_past_sink(sink_branch.front());
            // (i) pullback deviation from the moving sink for tau <= 0
            const double delta_seed = manifolds::default_seed_delta(sink_branch.front().x);
            auto pr = manifolds::pullback_attractor(
                cs, sink_branch.front(), delta_seed,
                compact::g_alpha(cs.alpha(), eps + 1e-9));
            if (pr.blew_up) {
                failing = "pullback left the tracking region before tau = 0";
                break;
            }
            double dev = 0;
            for (double tau = pr.traj.start_time(); tau <= 0; tau += std::max(0.5, eps)) {
                const Vec x = pr.traj.at(tau);
                const Vec e = sink_branch
                                  .at(frozen, systems::sigma_reparam_value(p[0], p[1], eps, tau))
                                  .x;
                double d2 = 0;
                for (std::size_t i = 0; i < x.size(); ++i) d2 += std::pow(x[i] - e[i], 2);
                dev = std::max(dev, std::sqrt(d2));
            }
            if (dev > delta_target / 3) {
                failing = "pullback deviation " + fmt(dev) + " above delta/3 for tau <= 0";
                break;
            }
            // (ii) threshold deviation at tau = eps
            auto section = manifolds::threshold_section(cs, eta, eps, 2.0);
            auto frozen_th = theta_at(systems::sigma_reparam_value(p[0], p[1], eps, eps));
            const double th_gap =
                manifolds::hausdorff_distance(section.points, frozen_th.points);
            if (th_gap > delta_target / 3) {
                failing = "threshold deviation " + fmt(th_gap) + " above delta/3 at tau = eps";
                break;
            }
            // (iii) continuity gap across the fast segment
            const Vec x0 = pr.traj.at(0.0);
            const Vec xe = pr.traj.at(std::min(eps, pr.traj.end_time()));
            double d2 = 0;
            for (std::size_t i = 0; i < x0.size(); ++i) d2 += std::pow(xe[i] - x0[i], 2);
            if (std::sqrt(d2) > delta_target / 3) {
                failing = "continuity gap " + fmt(std::sqrt(d2)) + " above delta/3";
                break;
            }
        }
        if (failing.empty()) break;
        eps *= 0.5;
        if (eps < controls.eps_floor)
            throw NumericsError("sigma construction: eps floor reached; last failing bound: " +
                                failing);
    }

    // intermediate-value bisection on the segment between p_minus and p_plus
    ConstructedInput result(input.reparametrized(p_minus[0], p_minus[1], eps));
    result.eps = eps;
    result.delta_target = delta_target;

    auto at_zeta = [&](double z) {
        return std::array<double, 2>{p_minus[0] + z * (p_plus[0] - p_minus[0]),
                                     p_minus[1] + z * (p_plus[1] - p_minus[1])};
    };
    double z_lo = 0, z_hi = 1;
    auto run_lo = run_pair(at_zeta(z_lo), eps, true);
    auto run_hi = run_pair(at_zeta(z_hi), eps, true);
    if (!(run_lo.ds < 0) || !(run_hi.ds > 0))
        throw NumericsError("segment ends do not produce opposite signed distances (" +
                            fmt(run_lo.ds) + ", " + fmt(run_hi.ds) + ")");
    result.outcome_minus = run_lo.outcome;
    result.outcome_plus = run_hi.outcome;
    result.ds_trace.push_back({z_lo, run_lo.ds});
    result.ds_trace.push_back({z_hi, run_hi.ds});

    double best_min_eta = kInf;
    std::array<double, 2> best_pairv = at_zeta(0.5);
    for (int it = 0; it < 64 && z_hi - z_lo > 1e-15; ++it) {
        const double mid = 0.5 * (z_lo + z_hi);
        const bool want_outcome = true;
        auto rm = run_pair(at_zeta(mid), eps, want_outcome);
        if (static_cast<int>(result.ds_trace.size()) < controls.trace_limit)
            result.ds_trace.push_back({mid, rm.ds});
        if (rm.min_eta < best_min_eta) {
            best_min_eta = rm.min_eta;
            best_pairv = at_zeta(mid);
        }
        if (std::isnan(rm.ds)) break;
        if (rm.ds < 0) {
            z_lo = mid;
            result.outcome_minus = rm.outcome;
        } else {
            z_hi = mid;
            result.outcome_plus = rm.outcome;
        }
        if (std::fabs(rm.ds) <= controls.connect_tol && best_min_eta <= 1e-4) break;
    }

    result.tau_alpha = best_pairv[0];
    result.tau_beta = best_pairv[1];
    result.min_dist_eta = best_min_eta;
    result.lambda_tilde = input.reparametrized(result.tau_alpha, result.tau_beta, eps);
    return result;
}

// ---------------------------------------------------------------------------
// diagrams
// ---------------------------------------------------------------------------

AttractorCatalogue build_catalogue(const FrozenSystem& frozen, const ExternalInput& input,
                                   const Branch& sink_branch,
                                   const std::vector<Vec>& attractor_seeds, double eps_cap) {
    AttractorCatalogue cat;
    const Vec lam_plus = input.limit(+1);
    if (!sink_branch.param.empty() && std::isinf(sink_branch.param.back()))
        cat.add(sink_branch.back(), eps_cap);
    for (const auto& seed : attractor_seeds) {
        if (auto rec = equilibria::try_find_equilibrium(frozen, lam_plus, seed)) {
            if (!rec->is_sink()) continue;
            bool duplicate = false;
            for (const auto& e : cat.entries) {
                double d2 = 0;
                for (std::size_t i = 0; i < seed.size(); ++i)
                    d2 += std::pow(rec->x[i] - e.sink.x[i], 2);
                if (std::sqrt(d2) <= 2 * eps_cap) duplicate = true;
            }
            if (!duplicate) cat.add(std::move(*rec), eps_cap);
        }
    }
    if (cat.size() == 0)
        throw ValidationError("no future-limit attractors found for the catalogue");
    return cat;
}

std::vector<DiagramPoint> tipping_diagram(const DiagramRequest& req) {
    if (req.grid.empty()) throw ValidationError("diagram grid is empty");
    if (!req.instantiate) throw ValidationError("diagram needs an instantiation callback");
    std::vector<DiagramPoint> out(req.grid.size());

    auto run_range = [&](std::size_t begin, std::size_t end) {
        std::optional<double> warm_rc;
        for (std::size_t k = begin; k < end; ++k) {
            DiagramPoint& pt = out[k];
            pt.p = req.grid[k];
            try {
                const auto [f, in] = req.instantiate(pt.p);
                auto sink_seed = equilibria::find_equilibrium(f, in.value(0.0), req.sink_seed);
                auto sink_branch = equilibria::moving_equilibrium(f, in, sink_seed);
                auto cat = build_catalogue(f, in, sink_branch, req.attractor_seeds);
                if (!std::isinf(sink_branch.param.front()))
                    throw ValidationError("moving sink does not reach the past limit");
                auto source = TrajectorySource::from_past_sink(sink_branch.front());

                RateSearchOptions ropts = req.rate;
                std::vector<EquilibriumRecord> cands;
                if (auto edge =
                        equilibria::try_find_equilibrium(f, in.limit(+1), req.edge_seed)) {
                    if (edge->is_edge_candidate()) {
                        try {
                            auto eb = equilibria::moving_equilibrium(f, in, *edge);
                            ropts.side_oracle = prepare_side_oracle(f, in, eb);
                        } catch (const Error&) {
                            // outcome-only search when the edge branch fails
                        }
                    }
                    cands.push_back(std::move(*edge));
                }
                if (warm_rc) {
                    // warm-started bracket around the neighbouring critical rate
                    ropts.r_lo = std::max(req.rate.r_lo, *warm_rc / 4);
                    ropts.r_hi = std::min(req.rate.r_hi, *warm_rc * 4);
                }
                pt.report = find_critical_rate(f, in, source, cat, ropts);
                if (pt.report.rates.empty() && warm_rc) {
                    // warm bracket missed: fall back to the full range
                    RateSearchOptions full = req.rate;
                    full.side_oracle = ropts.side_oracle;
                    pt.report = find_critical_rate(f, in, source, cat, full);
                }
                if (req.classify && !pt.report.rates.empty())
                    classify_tipping(f, in, source, cat, cands, ropts, pt.report);
                if (!pt.report.rates.empty())
                    warm_rc = pt.report.rates.front().r_c();
            } catch (const Error& e) {
                pt.error = e.what();
            }
        }
    };

    const int jobs = std::max(1, req.jobs);
    if (jobs == 1 || req.grid.size() < 2) {
        run_range(0, out.size());
    } else {
        // static index chunks keep the output deterministic for a given jobs
        // setting; warm starts apply within each chunk
        std::vector<std::thread> workers;
        const std::size_t chunk = (out.size() + jobs - 1) / jobs;
        for (int w = 0; w < jobs; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(out.size(), b + chunk);
            if (b >= e) break;
            workers.emplace_back(run_range, b, e);
        }
        for (auto& t : workers) t.join();
    }
    return out;
}

}  // namespace ratekit::tipping
