#include "ratekit/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ratekit::manifolds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    char buf[40];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* kind_name(ManifoldKind k) {
    switch (k) {
        case ManifoldKind::UnstableOfPastSink: return "unstable_of_past_sink";
        case ManifoldKind::StableOfEdgeState: return "stable_of_edge_state";
        case ManifoldKind::EdgeTailUpper: return "edge_tail_upper";
        case ManifoldKind::EdgeTailLower: return "edge_tail_lower";
        case ManifoldKind::FrozenThreshold: return "frozen_threshold";
    }
    return "?";
}

double dist2(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

Vec unit_sign_normalized(Vec v) {
    const double n = numcore::norm2(v);
    if (n == 0) throw NumericsError("zero vector cannot be normalised");
    int dom = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::fabs(v[i]) > std::fabs(v[dom])) dom = static_cast<int>(i);
    const double sgn = v[dom] >= 0 ? 1.0 : -1.0;
    for (double& x : v) x = sgn * x / n;
    return v;
}

// orientation transport along a polyline: rotate tangents by +90 degrees and
// flip signs for continuity, anchored at `anchor_idx` with `anchor_normal`
std::vector<Vec> transported_normals(const std::vector<Vec>& pts, std::size_t anchor_idx,
                                     const Vec& anchor_normal) {
    const std::size_t m = pts.size();
    std::vector<Vec> normals(m, Vec(2, 0.0));
    auto tangent = [&](std::size_t i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 < m ? i + 1 : i;
        Vec t{pts[b][0] - pts[a][0], pts[b][1] - pts[a][1]};
        const double n = std::hypot(t[0], t[1]);
        if (n > 0) {
            t[0] /= n;
            t[1] /= n;
        }
        return t;
    };
    auto perp = [](const Vec& t) { return Vec{-t[1], t[0]}; };

    Vec nu = perp(tangent(anchor_idx));
    if (nu[0] * anchor_normal[0] + nu[1] * anchor_normal[1] < 0) {
        nu[0] = -nu[0];
        nu[1] = -nu[1];
    }
    normals[anchor_idx] = nu;
    for (std::size_t i = anchor_idx + 1; i < m; ++i) {
        Vec v = perp(tangent(i));
        const auto& prev = normals[i - 1];
        if (v[0] * prev[0] + v[1] * prev[1] < 0) {
            v[0] = -v[0];
            v[1] = -v[1];
        }
        normals[i] = v;
    }
    for (std::size_t i = anchor_idx; i-- > 0;) {
        Vec v = perp(tangent(i));
        const auto& prev = normals[i + 1];
        if (v[0] * prev[0] + v[1] * prev[1] < 0) {
            v[0] = -v[0];
            v[1] = -v[1];
        }
        normals[i] = v;
    }
    return normals;
}

}  // namespace

double default_seed_delta(const Vec& equilibrium) {
    return 1e-6 * (1.0 + numcore::norm2(equilibrium));
}

std::string ManifoldSample::to_csv(const std::string& branch_label) const {
    std::string out = "kind,branch,tau_or_t";
    const int dim = points.empty() ? state_dim : static_cast<int>(points.front().size());
    for (int i = 1; i <= std::min(dim, state_dim); ++i) out += ",x" + std::to_string(i);
    if (dim > state_dim) out += ",s";
    out += "\n";
    for (std::size_t k = 0; k < points.size(); ++k) {
        out += kind_name(kind);
        out += "," + branch_label;
        out += "," + fmt(k < times.size() ? times[k] : std::numeric_limits<double>::quiet_NaN());
        for (double v : points[k]) out += "," + fmt(v);
        out += "\n";
    }
    return out;
}

ManifoldSample ManifoldSample::flipped() const {
    ManifoldSample out = *this;
    for (auto& nu : out.normals)
        for (double& v : nu) v = -v;
    return out;
}

// ---------------------------------------------------------------------------
// pullback attractor
// ---------------------------------------------------------------------------

PullbackResult pullback_attractor(const CompactifiedSystem& cs,
                                  const EquilibriumRecord& e_minus, double delta,
                                  double s_stop, const numcore::IntegrateOptions& opts) {
    if (!(delta >= kSeedDeltaMin && delta <= kSeedDeltaMax))
        throw ValidationError("pullback seed offset must lie in [1e-8, 1e-3]");
    if (!e_minus.is_sink())
        throw ValidationError("pullback attractor requires a hyperbolic past sink");

    const auto lift = cs.lift_equilibrium(e_minus, compact::Side::Past);
    Vec v = lift.extra_vector;
    const int n = cs.n();
    if (v[n] < 0)
        for (double& c : v) c = -c;  // s must increase along the seed

    // the manifold is a graph over s = g_alpha(tau); integrate x with tau as
    // the clock so s carries no integration error
    const double s_seed = -1.0 + delta * v[n];
    Vec x0(n);
    for (int i = 0; i < n; ++i) x0[i] = e_minus.x[i] + delta * v[i];
    const double tau_seed = compact::h_alpha(cs.alpha(), s_seed);
    const double tau_stop = compact::h_alpha(cs.alpha(), std::min(s_stop, 1.0 - 1e-13));

    auto trj = numcore::integrate(cs.x_field(), x0, tau_seed, tau_stop, opts);

    PullbackResult out;
    out.blew_up = trj.reason() == numcore::StopReason::Blowup;
    out.sample.kind = ManifoldKind::UnstableOfPastSink;
    out.sample.delta = delta;
    out.sample.owner = e_minus.x;
    out.sample.state_dim = n;
    out.sample.times = trj.times();
    out.sample.points.reserve(trj.states().size());
    for (std::size_t k = 0; k < trj.states().size(); ++k) {
        Vec p = trj.states()[k];
        p.push_back(compact::g_alpha(cs.alpha(), trj.times()[k]));
        out.sample.points.push_back(std::move(p));
    }
    out.traj = std::move(trj);  // x part indexed by tau
    return out;
}

// ---------------------------------------------------------------------------
// frozen threshold
// ---------------------------------------------------------------------------

namespace {

// backward stable-manifold branch for planar systems, resampled roughly
// uniformly in arclength
std::vector<Vec> stable_branch_2d(const FrozenSystem& frozen, const Vec& lambda,
                                  const Vec& eta, const Vec& v_s, double delta,
                                  double arclength, double sign) {
    // augmented state (x1, x2, ell); backward time
    auto base = systems::frozen_field(frozen, lambda);
    auto field = [base](double, const Vec& y, Vec& dy) {
        Vec x{y[0], y[1]};
        Vec dx(2);
        base(0, x, dx);
        dy[0] = -dx[0];
        dy[1] = -dx[1];
        dy[2] = std::hypot(dx[0], dx[1]);
    };
    Vec y0{eta[0] + sign * delta * v_s[0], eta[1] + sign * delta * v_s[1], 0.0};
    // stop at the requested arclength, or when the branch parks at an
    // equilibrium (backward-attracting end) and stops producing length
    std::vector<numcore::EventFn> events{
        [arclength](double, const Vec& y) { return y[2] - arclength; },
        [base](double, const Vec& y) {
            Vec x{y[0], y[1]};
            Vec dx(2);
            base(0, x, dx);
            return std::hypot(dx[0], dx[1]) - 1e-9;
        }};
    numcore::IntegrateOptions opts;
    opts.max_steps = 2'000'000;
    auto trj = numcore::integrate(field, y0, 0.0, 1e5, opts, events);

    // emit points spaced ~arclength/80 along the curve
    const double dl = arclength / 80.0;
    std::vector<Vec> pts;
    double next = dl;
    for (std::size_t k = 1; k < trj.times().size(); ++k) {
        while (trj.states()[k][2] >= next) {
            // refine within the step by bisection on ell
            double lo = trj.times()[k - 1], hi = trj.times()[k];
            for (int it = 0; it < 40 && hi - lo > 1e-12 * (1 + hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (trj.at(mid)[2] >= next)
                    hi = mid;
                else
                    lo = mid;
            }
            const Vec y = trj.at(hi);
            pts.push_back({y[0], y[1]});
            next += dl;
        }
    }
    if (pts.empty() || trj.reason() == numcore::StopReason::Event) {
        const auto& yb = trj.end_state();
        if (pts.empty() || dist2(pts.back(), {yb[0], yb[1]}) > 1e-20)
            pts.push_back({yb[0], yb[1]});
    }
    return pts;
}

}  // namespace

ManifoldSample frozen_threshold(const FrozenSystem& frozen, const Vec& lambda,
                                const EquilibriumRecord& edge, double arclength) {
    if (!edge.is_edge_candidate())
        throw ValidationError(
            "threshold construction needs a hyperbolic equilibrium with exactly one unstable "
            "direction");
    const int n = frozen.n();
    ManifoldSample out;
    out.kind = ManifoldKind::FrozenThreshold;
    out.owner = edge.x;
    out.state_dim = n;

    // unstable eigenvector fixes the orientation (+ side)
    const Vec v_u = unit_sign_normalized(numcore::real_eigenvector(edge.eigen, 0));

    if (n == 1) {
        out.points = {edge.x};
        out.times = {0.0};
        out.normals = {Vec{1.0}};  // unstable direction points to the + side
        return out;
    }
    if (n == 2) {
        if (arclength <= 0) {
            out.points = {edge.x};
            out.times = {0.0};
            out.normals = {v_u};
            return out;
        }
        // stable eigenvector: the single eigenvalue with negative real part
        int si = -1;
        for (int k = 0; k < 2; ++k)
            if (edge.eigen.values[k].real() < 0) si = k;
        if (si < 0) throw NumericsError("planar edge state lacks a stable direction");
        const Vec v_s = numcore::real_eigenvector(edge.eigen, si);
        const double delta = default_seed_delta(edge.x);

        auto plus = stable_branch_2d(frozen, lambda, edge.x, v_s, delta, arclength, +1.0);
        auto minus = stable_branch_2d(frozen, lambda, edge.x, v_s, delta, arclength, -1.0);

        out.delta = delta;
        out.points.reserve(plus.size() + minus.size() + 1);
        for (std::size_t i = minus.size(); i-- > 0;) out.points.push_back(minus[i]);
        const std::size_t anchor = out.points.size();
        out.points.push_back(edge.x);
        for (auto& p : plus) out.points.push_back(std::move(p));
        out.times.resize(out.points.size());
        for (std::size_t i = 0; i < out.points.size(); ++i)
            out.times[i] = static_cast<double>(i) - static_cast<double>(anchor);
        out.normals = transported_normals(out.points, anchor, v_u);
        return out;
    }

    // n >= 3: the oriented tangent hyperplane at the edge state, with a
    // validity radius estimated from the departure of f from its linearisation
    out.local_linear = true;
    out.points = {edge.x};
    out.times = {0.0};
    out.normals = {v_u};
    const numcore::Mat j = frozen.jac_x(edge.x, lambda);
    double radius = kInf;
    for (int dir = 0; dir < n; ++dir) {
        Vec e(n, 0.0);
        e[dir] = 1.0;
        for (double r = 1e-3; r <= 10.0; r *= 2.0) {
            Vec xp = edge.x;
            for (int i = 0; i < n; ++i) xp[i] += r * e[i];
            Vec fx = frozen.f(xp, lambda);
            double lin = 0, err = 0;
            for (int i = 0; i < n; ++i) {
                double ji = 0;
                for (int k = 0; k < n; ++k) ji += j(i, k) * (xp[k] - edge.x[k]);
                lin += ji * ji;
                err += (fx[i] - ji) * (fx[i] - ji);
            }
            if (std::sqrt(err) > 0.1 * std::sqrt(lin)) {
                radius = std::min(radius, r);
                break;
            }
        }
    }
    out.validity_radius = std::isinf(radius) ? 10.0 : radius;
    return out;
}

// ---------------------------------------------------------------------------
// distances
// ---------------------------------------------------------------------------

double signed_distance(const Vec& x, const ManifoldSample& threshold) {
    if (threshold.points.empty()) throw ValidationError("empty threshold sample");
    if (threshold.normals.empty()) throw ValidationError("threshold lacks an orientation");
    const auto& pts = threshold.points;
    const auto& nus = threshold.normals;

    if (threshold.local_linear || pts.size() == 1) {
        double d = 0;
        for (std::size_t i = 0; i < x.size(); ++i) d += nus[0][i] * (x[i] - pts[0][i]);
        return d;
    }

    // polyline: nearest segment projection
    double best = kInf;
    std::size_t best_seg = 0;
    double best_t = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const Vec& a = pts[k];
        const Vec& b = pts[k + 1];
        double ab2 = 0, apab = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            ab2 += (b[i] - a[i]) * (b[i] - a[i]);
            apab += (x[i] - a[i]) * (b[i] - a[i]);
        }
        double t = ab2 > 0 ? std::clamp(apab / ab2, 0.0, 1.0) : 0.0;
        double d2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double pi = a[i] + t * (b[i] - a[i]);
            d2 += (x[i] - pi) * (x[i] - pi);
        }
        if (d2 < best) {
            best = d2;
            best_seg = k;
            best_t = t;
        }
    }

    // beyond the sampled extent: the nearest point is a terminal vertex
    if ((best_seg == 0 && best_t == 0.0) ||
        (best_seg == pts.size() - 2 && best_t == 1.0))
        return kInf;

    Vec nu(x.size());
    double d = 0, nn = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        nu[i] = (1 - best_t) * nus[best_seg][i] + best_t * nus[best_seg + 1][i];
        nn += nu[i] * nu[i];
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pi =
            pts[best_seg][i] + best_t * (pts[best_seg + 1][i] - pts[best_seg][i]);
        d += (x[i] - pi) * nu[i];
    }
    const double mag = std::sqrt(best);
    if (nn == 0) return mag;
    return d >= 0 ? mag : -mag;
}

int signed_side(const Vec& x, const ManifoldSample& threshold) {
    const double ds = signed_distance(x, threshold);
    if (std::isfinite(ds)) return ds == 0.0 ? 0 : (ds > 0 ? +1 : -1);
    // clamped beyond the sampled extent: the nearest vertex normal decides
    const auto& pts = threshold.points;
    std::size_t best = 0;
    double best_d = kInf;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double d = dist2(x, pts[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    const auto& nu = threshold.normals[std::min(best, threshold.normals.size() - 1)];
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += nu[i] * (x[i] - pts[best][i]);
    return acc >= 0 ? +1 : -1;
}

double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty()) throw ValidationError("hausdorff distance of an empty set");
    auto semi = [](const std::vector<Vec>& p, const std::vector<Vec>& q) {
        double worst = 0;
        for (const auto& x : p) {
            double best = kInf;
            for (const auto& y : q) best = std::min(best, dist2(x, y));
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(semi(a, b), semi(b, a));
}

// ---------------------------------------------------------------------------
// attractor catalogue and omega-limit classification
// ---------------------------------------------------------------------------

void AttractorCatalogue::add(EquilibriumRecord sink, double eps_cap) {
    CatalogueEntry e;
    e.sink = std::move(sink);
    e.eps_cap = eps_cap;
    entries.push_back(std::move(e));
    validate();
}

void AttractorCatalogue::validate() const {
    for (const auto& e : entries) {
        if (!e.sink.is_sink())
            throw ValidationError("catalogue entries must be hyperbolic sinks");
        if (!(e.eps_cap > 0)) throw ValidationError("capture radius must be positive");
    }
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            const double d = std::sqrt(dist2(entries[i].sink.x, entries[j].sink.x));
            if (d <= entries[i].eps_cap + entries[j].eps_cap)
                throw ValidationError("capture balls must be pairwise disjoint");
        }
}

double AttractorCatalogue::dwell_time(int index) const {
    const auto& e = entries[index];
    if (e.t_dwell > 0) return e.t_dwell;
    const double rate = std::fabs(e.sink.eigen.max_real());
    return 20.0 / std::max(rate, 1e-6);
}

std::string OmegaOutcome::label() const {
    switch (kind) {
        case Kind::Attractor: return "attractor_" + std::to_string(attractor);
        case Kind::Divergent: return "divergent";
        case Kind::Unresolved: return "unresolved";
    }
    return "?";
}

namespace {

struct ClassifyRun {
    OmegaOutcome outcome;
    std::vector<Vec> points;
    std::vector<double> times;
};

ClassifyRun classify_run(const FrozenSystem& future, const Vec& lambda_plus, const Vec& x0,
                         const AttractorCatalogue& catalogue, const ClassifyOptions& opts,
                         bool keep_points) {
    catalogue.validate();
    ClassifyRun run;
    auto field = systems::frozen_field(future, lambda_plus);

    auto probe_update = [&](const Vec& x) {
        if (opts.probe.empty()) return;
        run.outcome.min_dist_to_probe =
            std::min(run.outcome.min_dist_to_probe, std::sqrt(dist2(x, opts.probe)));
    };
    auto inside = [&](const Vec& x) {
        for (int j = 0; j < catalogue.size(); ++j)
            if (std::sqrt(dist2(x, catalogue.entries[j].sink.x)) <=
                catalogue.entries[j].eps_cap)
                return j;
        return -1;
    };

    std::vector<numcore::EventFn> enter_events;
    for (int j = 0; j < catalogue.size(); ++j) {
        const Vec target = catalogue.entries[j].sink.x;
        const double eps = catalogue.entries[j].eps_cap;
        enter_events.push_back([target, eps](double, const Vec& x) {
            return std::sqrt(dist2(x, target)) - eps;
        });
    }

    // decimated history for the recurrence hint
    std::vector<std::pair<double, Vec>> history;
    const double rec_spacing = 1.0;
    double next_rec = 0.0;

    double t = 0.0;
    Vec x = x0;
    probe_update(x);

    auto ingest = [&](const numcore::Trajectory& trj) {
        for (std::size_t k = 0; k < trj.times().size(); ++k) {
            const double tk = trj.times()[k];
            probe_update(trj.states()[k]);
            // a few interior dense samples tighten the probe distance
            if (!opts.probe.empty() && k + 1 < trj.times().size()) {
                const double t1 = trj.times()[k + 1];
                for (int q = 1; q <= 3; ++q)
                    probe_update(trj.at(tk + (t1 - tk) * q / 4.0));
            }
            if (keep_points) {
                run.points.push_back(trj.states()[k]);
                run.times.push_back(tk);
            }
            if (tk >= next_rec && history.size() < 4000) {
                history.emplace_back(tk, trj.states()[k]);
                next_rec = tk + rec_spacing;
            }
        }
    };

    while (t < opts.t_max) {
        const int j0 = inside(x);
        if (j0 >= 0) {
            // dwell phase: stay inside the ball for the dwell time
            const double dwell = catalogue.dwell_time(j0);
            const Vec target = catalogue.entries[j0].sink.x;
            const double eps = catalogue.entries[j0].eps_cap;
            std::vector<numcore::EventFn> exit_event{[target, eps](double, const Vec& y) {
                return std::sqrt(dist2(y, target)) - eps;
            }};
            auto trj =
                numcore::integrate(field, x, t, t + dwell, opts.integrate, exit_event);
            ingest(trj);
            if (trj.reason() == numcore::StopReason::TimeLimit) {
                run.outcome.kind = OmegaOutcome::Kind::Attractor;
                run.outcome.attractor = j0;
                run.outcome.capture_time = t;
                return run;
            }
            if (trj.reason() == numcore::StopReason::Event) {
                t = trj.end_time();
                x = trj.end_state();
                // nudge past the ball surface so the next leg re-arms cleanly
                continue;
            }
            if (trj.reason() == numcore::StopReason::Blowup) {
                run.outcome.kind = OmegaOutcome::Kind::Divergent;
                return run;
            }
            break;  // step failure
        }

        auto trj = numcore::integrate(field, x, t, opts.t_max, opts.integrate, enter_events);
        ingest(trj);
        if (trj.reason() == numcore::StopReason::Blowup) {
            run.outcome.kind = OmegaOutcome::Kind::Divergent;
            return run;
        }
        if (trj.reason() == numcore::StopReason::StepFailure) {
            // overflow inside a step counts as divergence; anything else stays
            // unresolved
            if (numcore::norm_inf(trj.end_state()) > 0.5 * opts.integrate.blowup_norm)
                run.outcome.kind = OmegaOutcome::Kind::Divergent;
            return run;
        }
        if (trj.reason() == numcore::StopReason::TimeLimit) {
            t = trj.end_time();
            x = trj.end_state();
            break;
        }
        // entered some ball: continue from the event point (slightly inside)
        t = trj.end_time();
        x = trj.end_state();
        const int j = trj.event_index();
        const Vec target = catalogue.entries[j].sink.x;
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = target[i] + (x[i] - target[i]) * (1.0 - 1e-9);
    }

    // unresolved: look for a recurrence hint
    run.outcome.kind = OmegaOutcome::Kind::Unresolved;
    for (std::size_t i = 0; i < history.size(); ++i)
        for (std::size_t j = i + 1; j < history.size(); ++j) {
            if (history[j].first - history[i].first < 5 * rec_spacing) continue;
            if (std::sqrt(dist2(history[i].second, history[j].second)) < 1e-3) {
                run.outcome.recurrence_hint = true;
                return run;
            }
        }
    return run;
}

}  // namespace

OmegaOutcome classify_omega_limit(const FrozenSystem& future, const Vec& lambda_plus,
                                  const Vec& x0, const AttractorCatalogue& catalogue,
                                  const ClassifyOptions& opts) {
    return classify_run(future, lambda_plus, x0, catalogue, opts, false).outcome;
}

// ---------------------------------------------------------------------------
// edge tails
// ---------------------------------------------------------------------------

EdgeTails edge_tails(const FrozenSystem& future, const Vec& lambda_plus,
                     const EquilibriumRecord& eta_plus, const AttractorCatalogue& catalogue,
                     double delta, double t_max) {
    if (!eta_plus.is_edge_candidate())
        throw ValidationError("edge tails require an edge state with one unstable direction");
    const Vec v_u = unit_sign_normalized(numcore::real_eigenvector(eta_plus.eigen, 0));

    auto make_tail = [&](double sign, ManifoldKind kind) {
        Vec seed = eta_plus.x;
        for (std::size_t i = 0; i < seed.size(); ++i) seed[i] += sign * delta * v_u[i];
        ClassifyOptions opts;
        opts.t_max = t_max;
        auto run = classify_run(future, lambda_plus, seed, catalogue, opts, true);
        EdgeTail tail;
        tail.outcome = run.outcome;
        tail.sample.kind = kind;
        tail.sample.points = std::move(run.points);
        tail.sample.times = std::move(run.times);
        tail.sample.delta = delta;
        tail.sample.owner = eta_plus.x;
        tail.sample.state_dim = future.n();
        return tail;
    };

    EdgeTails out;
    out.plus = make_tail(+1.0, ManifoldKind::EdgeTailUpper);
    out.minus = make_tail(-1.0, ManifoldKind::EdgeTailLower);
    return out;
}

// ---------------------------------------------------------------------------
// threshold sections of the lifted edge state's stable manifold
// ---------------------------------------------------------------------------

ManifoldSample threshold_section(const CompactifiedSystem& cs,
                                 const EquilibriumRecord& eta_plus, double tau,
                                 double arclength, int fan_count) {
    const int n = cs.n();
    if (n > 2)
        throw ValidationError("threshold sections are computed explicitly for n <= 2 only");
    const auto lift = cs.lift_equilibrium(eta_plus, compact::Side::Future);
    const double delta = default_seed_delta(eta_plus.x);

    ManifoldSample out;
    out.kind = ManifoldKind::StableOfEdgeState;
    out.owner = eta_plus.x;
    out.state_dim = n;
    out.delta = delta;

    numcore::IntegrateOptions opts;
    opts.max_steps = 5'000'000;
    auto run_to_section = [&](Vec seed) -> std::optional<Vec> {
        // backward in tau along the graph s = g_alpha(tau): integrate x only,
        // exactly to the section time
        const double tau_ref = compact::h_alpha(cs.alpha(), seed[n]);
        const double span = tau_ref - tau;
        if (!(span > 0)) return std::nullopt;
        Vec x0(seed.begin(), seed.begin() + n);
        auto trj = numcore::integrate(cs.x_field_reversed(tau_ref), x0, 0.0, span, opts);
        if (trj.reason() != numcore::StopReason::TimeLimit) return std::nullopt;
        return trj.end_state();
    };

    // transverse stable eigenvector (eigenvalue -alpha), s-component positive
    Vec v_perp = lift.extra_vector;
    if (v_perp[n] < 0)
        for (double& c : v_perp) c = -c;

    if (n == 1) {
        Vec seed = lift.point;
        for (int i = 0; i <= n; ++i) seed[i] -= delta * v_perp[i];
        auto x = run_to_section(seed);
        if (!x) throw NumericsError("threshold section integration failed");
        out.points = {*x};
        out.times = {tau};
        out.normals = {Vec{1.0}};
        return out;
    }

    // n == 2: fan of seeds in the stable eigenplane span{v_in, v_perp}
    int si = -1;
    for (int k = 0; k <= n; ++k) {
        if (k == lift.extra_index) continue;
        if (lift.eigen.values[k].real() < 0) si = k;
    }
    if (si < 0) throw NumericsError("lifted edge state lacks an in-plane stable direction");
    const Vec v_in = numcore::real_eigenvector(lift.eigen, si);

    std::vector<Vec> pts;
    Vec anchor;
    for (int k = 1; k <= fan_count; ++k) {
        const double phi = M_PI * k / (fan_count + 1.0);
        Vec seed = lift.point;
        for (int i = 0; i <= n; ++i)
            seed[i] += delta * (std::cos(phi) * v_in[i]) - delta * (std::sin(phi) * v_perp[i]);
        if (auto x = run_to_section(seed)) {
            pts.push_back(*x);
            if (k == (fan_count + 1) / 2) anchor = *x;
        }
    }
    if (pts.size() < 3) throw NumericsError("threshold section fan produced too few points");
    if (anchor.empty()) anchor = pts[pts.size() / 2];

    // trim to the requested extent around the transverse anchor point
    std::vector<Vec> kept;
    std::size_t anchor_idx = 0;
    for (const auto& p : pts) {
        if (std::sqrt(dist2(p, anchor)) <= arclength) {
            kept.push_back(p);
            if (dist2(kept.back(), anchor) == 0.0) anchor_idx = kept.size() - 1;
        }
    }
    out.points = std::move(kept);
    out.times.assign(out.points.size(), tau);
    const Vec v_u = unit_sign_normalized(numcore::real_eigenvector(eta_plus.eigen, 0));
    out.normals = transported_normals(out.points, anchor_idx, v_u);
    return out;
}

}  // namespace ratekit::manifolds
