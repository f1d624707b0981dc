#include <cmath>

#include "doctest.h"
#include "ratekit/tipping.hpp"

using namespace ratekit::tipping;
using ratekit::NumericsError;
using ratekit::ValidationError;
using ratekit::equilibria::find_equilibrium;
using ratekit::equilibria::moving_equilibrium;
using ratekit::manifolds::OmegaOutcome;
using ratekit::systems::ExternalInput;
using ratekit::systems::FrozenSystem;
using ratekit::systems::SechPulseComponent;
using ratekit::systems::TanhComponent;

namespace {

struct Setup {
    FrozenSystem frozen;
    ExternalInput input;
    Branch sink_branch;
    Branch edge_branch;
    AttractorCatalogue catalogue;
    TrajectorySource source;
    RateSearchOptions ropts;
    std::vector<EquilibriumRecord> candidates;
};

// quadratic shift system: f = (x+lam)^2 - 1, tanh ramp 0 -> lam_max
Setup make_quad(double lam_max, const std::vector<ratekit::numcore::Vec>& extra = {}) {
    FrozenSystem f(1, 1, {"(x1+lam1)^2 - 1"});
    ExternalInput in({TanhComponent{0.0, lam_max, 1.0}}, 1.0);
    auto sink_seed = find_equilibrium(f, in.value(0.0), {-1.2 - lam_max / 4});
    auto edge_seed = find_equilibrium(f, in.value(0.0), {0.8});
    Setup s{f,
            in,
            moving_equilibrium(f, in, sink_seed),
            moving_equilibrium(f, in, edge_seed),
            {},
            TrajectorySource{},
            {},
            {}};
    s.catalogue = build_catalogue(f, in, s.sink_branch, extra);
    s.source = TrajectorySource::from_past_sink(s.sink_branch.front());
    auto eta = find_equilibrium(f, in.limit(+1), s.edge_branch.back().x);
    s.candidates = {eta};
    s.ropts.side_oracle = prepare_side_oracle(f, in, s.edge_branch);
    return s;
}

// two-sink cubic with a shifting frame: f = (x+lam) - (x+lam)^3
Setup make_cubic(double lam_max) {
    FrozenSystem f(1, 1, {"(x1+lam1) - (x1+lam1)^3"});
    ExternalInput in({TanhComponent{0.0, lam_max, 1.0}}, 1.0);
    auto sink_seed = find_equilibrium(f, in.value(0.0), {-1.0 - in.value(0.0)[0] - 0.1});
    auto edge_seed = find_equilibrium(f, in.value(0.0), {-in.value(0.0)[0] + 0.02});
    Setup s{f,
            in,
            moving_equilibrium(f, in, sink_seed),
            moving_equilibrium(f, in, edge_seed),
            {},
            TrajectorySource{},
            {},
            {}};
    s.catalogue = build_catalogue(f, in, s.sink_branch, {{1.0 - lam_max}});
    s.source = TrajectorySource::from_past_sink(s.sink_branch.front());
    auto eta = find_equilibrium(f, in.limit(+1), s.edge_branch.back().x);
    s.candidates = {eta};
    s.ropts.side_oracle = prepare_side_oracle(f, in, s.edge_branch);
    return s;
}

// planar excitable circle flow shifted along x1 by the input
Setup make_snic(double lam_max) {
    FrozenSystem f(2, 1,
                   {"-x2*(x2 - 0.5) + (x1+lam1)*(1 - (x1+lam1)^2 - x2^2)",
                    "(x1+lam1)*(x2 - 0.5) + x2*(1 - (x1+lam1)^2 - x2^2)"});
    ExternalInput in({TanhComponent{0.0, lam_max, 1.0}}, 1.0);
    const double root = std::sqrt(0.75);
    auto sink_seed = find_equilibrium(f, in.value(0.0), {-root - in.value(0.0)[0], 0.5});
    auto edge_seed = find_equilibrium(f, in.value(0.0), {root - in.value(0.0)[0], 0.5});
    Setup s{f,
            in,
            moving_equilibrium(f, in, sink_seed),
            moving_equilibrium(f, in, edge_seed),
            {},
            TrajectorySource{},
            {},
            {}};
    s.catalogue = build_catalogue(f, in, s.sink_branch, {});
    s.source = TrajectorySource::from_past_sink(s.sink_branch.front());
    auto eta = find_equilibrium(f, in.limit(+1), s.edge_branch.back().x);
    s.candidates = {eta};
    s.ropts.side_oracle = prepare_side_oracle(f, in, s.edge_branch, 6.0);
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("tipping");

TEST_CASE("check_tracking on the quadratic ramp") {
    auto s = make_quad(3.0);

    auto slow = check_tracking(s.frozen, s.input, s.sink_branch, 0.01, 0.1, {}, s.catalogue);
    CHECK(slow.delta_close);
    CHECK(slow.end_point);
    CHECK(slow.sup_deviation < 0.1);

    auto fast = check_tracking(s.frozen, s.input, s.sink_branch, 100.0, 0.1, {}, s.catalogue);
    CHECK(!fast.end_point);
    CHECK(fast.end_outcome.kind == OmegaOutcome::Kind::Divergent);
}

TEST_CASE("check_tracking with a constant input") {
    FrozenSystem f(1, 1, {"(x1+lam1)^2 - 1"});
    ExternalInput in({TanhComponent{0.5, 0.5, 1.0}}, 1.0);
    auto seed = find_equilibrium(f, {0.5}, {-1.6});
    auto branch = moving_equilibrium(f, in, seed);
    auto cat = build_catalogue(f, in, branch, {});
    for (double r : {0.1, 1.0, 10.0}) {
        auto rep = check_tracking(f, in, branch, r, 0.1, {}, cat);
        CHECK(rep.delta_close);
        CHECK(rep.end_point);
        CHECK(rep.sup_deviation <= 1e-4);
    }
}

TEST_CASE("tracking regime: three geometrically decreasing rates") {
    auto s = make_quad(3.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {0.2, 0.1, 0.05}) {
        auto rep = check_tracking(s.frozen, s.input, s.sink_branch, r, 0.1, {}, s.catalogue);
        CHECK(rep.delta_close);
        CHECK(rep.end_point);
        CHECK(rep.sup_deviation < prev);
        prev = rep.sup_deviation;
    }
}

TEST_CASE("threshold instability scan matches the affine closed form") {
    // d_s(e(lam1), theta(lam2)) = lam2 - lam1 - 2 for the quadratic system
    auto s = make_quad(3.0);
    ScanOptions sopts;
    sopts.m = 21;
    auto scan =
        scan_threshold_instability(s.frozen, s.sink_branch, s.edge_branch, s.catalogue, sopts);
    CHECK(scan.unstable);
    for (std::size_t i = 0; i < scan.grid1.size(); ++i)
        for (std::size_t j = 0; j < scan.grid2.size(); ++j) {
            const double v = scan.value(i, j);
            if (!std::isfinite(v)) continue;
            const double lam1 = s.input.value(scan.grid1[i])[0];
            const double lam2 = s.input.value(scan.grid2[j])[0];
            CHECK(v == doctest::Approx(lam2 - lam1 - 2.0).epsilon(1e-6));
        }
    // the basin test classifies the two sides: above the quadratic threshold
    // diverges, so only one side is a catalogued attractor
    CHECK(!scan.basin_unstable);

    auto stable = make_quad(1.0);
    auto scan2 = scan_threshold_instability(stable.frozen, stable.sink_branch,
                                            stable.edge_branch, stable.catalogue, sopts);
    CHECK(!scan2.unstable);
}

TEST_CASE("threshold instability verdict flips at lam_max = 2") {
    ScanOptions sopts;
    sopts.m = 41;
    for (double lam_max : {1.8, 1.95}) {
        auto s = make_quad(lam_max);
        auto scan = scan_threshold_instability(s.frozen, s.sink_branch, s.edge_branch,
                                               s.catalogue, sopts);
        CHECK(!scan.unstable);
    }
    for (double lam_max : {2.05, 2.2}) {
        auto s = make_quad(lam_max);
        auto scan = scan_threshold_instability(s.frozen, s.sink_branch, s.edge_branch,
                                               s.catalogue, sopts);
        CHECK(scan.unstable);
    }
}

TEST_CASE("cubic system is basin unstable") {
    auto s = make_cubic(2.0);
    ScanOptions sopts;
    sopts.m = 21;
    auto scan =
        scan_threshold_instability(s.frozen, s.sink_branch, s.edge_branch, s.catalogue, sopts);
    CHECK(scan.unstable);
    CHECK(scan.basin_unstable);  // both sides of theta land on different sinks
}

TEST_CASE("forward threshold instability distinguishes ramp direction") {
    auto s = make_quad(3.0);
    ScanOptions sopts;
    sopts.m = 31;
    auto fwd = scan_forward_threshold_instability(s.frozen, s.input, s.sink_branch,
                                                  s.edge_branch, s.catalogue, sopts);
    CHECK(fwd.forward);
    CHECK(fwd.unstable);
    for (const auto& p : fwd.sign_changes) CHECK(p.a < p.b);

    // time-reversed (decreasing) input over the same path
    FrozenSystem f(1, 1, {"(x1+lam1)^2 - 1"});
    ExternalInput down({TanhComponent{3.0, 0.0, 1.0}}, 1.0);
    auto sink_seed = find_equilibrium(f, down.value(0.0), {-2.5});
    auto edge_seed = find_equilibrium(f, down.value(0.0), {-0.5});
    auto sb = moving_equilibrium(f, down, sink_seed);
    auto eb = moving_equilibrium(f, down, edge_seed);
    auto cat = build_catalogue(f, down, sb, {});
    auto bwd = scan_forward_threshold_instability(f, down, sb, eb, cat, sopts);
    CHECK(!bwd.unstable);

    // constant input: Delta is identically -2
    ExternalInput flat({TanhComponent{0.0, 0.0, 1.0}}, 1.0);
    auto fseed = find_equilibrium(f, {0.0}, {-1.1});
    auto eseed = find_equilibrium(f, {0.0}, {0.9});
    auto fsb = moving_equilibrium(f, flat, fseed);
    auto feb = moving_equilibrium(f, flat, eseed);
    auto fcat = build_catalogue(f, flat, fsb, {});
    auto fscan = scan_forward_threshold_instability(f, flat, fsb, feb, fcat, sopts);
    CHECK(!fscan.unstable);
    for (double v : fscan.values)
        if (std::isfinite(v)) CHECK(v == doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("find_critical_rate on the quadratic ramp") {
    auto s = make_quad(3.0);
    s.ropts.r_lo = 0.1;
    s.ropts.r_hi = 10.0;
    s.ropts.tol_r = 1e-6;
    auto report = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, s.ropts);
    REQUIRE(report.rates.size() == 1);
    const auto& rc = report.rates.front();
    CHECK(rc.r_hi - rc.r_lo <= 2 * s.ropts.tol_r);
    CHECK(!rc.below.same_as(rc.above));
    CHECK(rc.below.kind == OmegaOutcome::Kind::Attractor);
    CHECK(rc.above.kind == OmegaOutcome::Kind::Divergent);

    // bisection consistency: shrinking tol_r by 10 moves r_c by <= 10 tol_r
    auto tight = s.ropts;
    tight.tol_r = 1e-7;
    auto report2 = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, tight);
    REQUIRE(report2.rates.size() == 1);
    CHECK(std::fabs(report2.rates.front().r_c() - rc.r_c()) <= 10 * s.ropts.tol_r);
}

TEST_CASE("find_critical_rate matches a direct dense oracle") {
    auto s = make_quad(3.0);
    s.ropts.r_lo = 0.1;
    s.ropts.r_hi = 10.0;
    auto report = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, s.ropts);
    REQUIRE(!report.rates.empty());
    const double rc = report.rates.front().r_c();

    // independent oracle: long direct nonautonomous integration, outcome by
    // final position, on a 1e-4 grid around the reported rate
    auto direct_outcome = [&](double r) {
        ratekit::systems::NonautonomousSystem sys(s.frozen, s.input, r);
        auto trj = ratekit::numcore::integrate(sys.field(), s.sink_branch.front().x, -40.0,
                                               40.0 + 200.0 * r);
        if (trj.reason() == ratekit::numcore::StopReason::Blowup) return +1;
        return trj.end_state()[0] < 0 ? -1 : +1;
    };
    const double step = 1e-4;
    double flip = std::numeric_limits<double>::quiet_NaN();
    int prev = direct_outcome(rc - 50 * step);
    for (int k = -49; k <= 50; ++k) {
        const int o = direct_outcome(rc + k * step);
        if (o != prev) {
            flip = rc + (k - 0.5) * step;
            break;
        }
        prev = o;
    }
    REQUIRE(std::isfinite(flip));
    CHECK(std::fabs(flip - rc) <= 2e-4);
}

TEST_CASE("find_critical_rate: stable path has no tipping") {
    auto s = make_quad(1.0);
    s.ropts.r_lo = 1e-3;
    s.ropts.r_hi = 1e3;
    auto report = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, s.ropts);
    CHECK(report.rates.empty());
    CHECK(report.verdict == Verdict::NoTippingFound);
}

TEST_CASE("pulse input produces a tipping window with two critical rates") {
    FrozenSystem f(1, 1, {"(x1+lam1)^2 - 1"});
    ExternalInput pulse({SechPulseComponent{0.0, 5.0, 1.0}}, 0.9);
    auto sink_seed = find_equilibrium(f, pulse.value(0.0), {-6.1});
    auto sb = moving_equilibrium(f, pulse, sink_seed);
    auto cat = build_catalogue(f, pulse, sb, {});
    auto src = TrajectorySource::from_past_sink(sb.front());
    RateSearchOptions opts;
    opts.r_lo = 0.05;
    opts.r_hi = 50.0;
    opts.tol_r = 1e-5;
    auto report = find_critical_rate(f, pulse, src, cat, opts);
    REQUIRE(report.rates.size() == 2);
    CHECK(report.rates[0].r_c() < report.rates[1].r_c());
    // inside the window the trajectory diverges, outside it tracks
    CHECK(report.rates[0].below.kind == OmegaOutcome::Kind::Attractor);
    CHECK(report.rates[0].above.kind == OmegaOutcome::Kind::Divergent);
    CHECK(report.rates[1].below.kind == OmegaOutcome::Kind::Divergent);
    CHECK(report.rates[1].above.kind == OmegaOutcome::Kind::Attractor);
}

TEST_CASE("classification: quadratic is degenerate via the divergent tail") {
    auto s = make_quad(3.0);
    s.ropts.r_lo = 0.1;
    s.ropts.r_hi = 10.0;
    auto report = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, s.ropts);
    classify_tipping(s.frozen, s.input, s.source, s.catalogue, s.candidates, s.ropts, report);
    CHECK(report.verdict == Verdict::Degenerate);
    CHECK(report.degenerate_reason.find("tail") != std::string::npos);
    REQUIRE(report.eta_plus.has_value());
    CHECK(report.eta_plus->x[0] == doctest::Approx(-2.0).epsilon(1e-8));
    // connection evidence: both near-critical sides shadow eta+
    CHECK(report.rates.front().min_dist_eta_below <= 1e-3);
    CHECK(report.rates.front().min_dist_eta_above <= 1e-3);
}

TEST_CASE("classification: cubic is irreversible") {
    auto s = make_cubic(2.0);
    s.ropts.r_lo = 0.1;
    s.ropts.r_hi = 50.0;
    auto report = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, s.ropts);
    REQUIRE(!report.rates.empty());
    classify_tipping(s.frozen, s.input, s.source, s.catalogue, s.candidates, s.ropts, report);
    CHECK(report.verdict == Verdict::Irreversible);
    REQUIRE(report.upper_tail.has_value());
    REQUIRE(report.lower_tail.has_value());
    CHECK(report.upper_tail->outcome.attractor != report.lower_tail->outcome.attractor);

    // correspondence: each bracket side reaches the matching tail's attractor
    const auto& rc = report.rates.front();
    CHECK(rc.above.same_as(report.upper_tail->outcome));
    CHECK(rc.below.same_as(report.lower_tail->outcome));
}

TEST_CASE("classification: planar excitable is reversible") {
    auto s = make_snic(2.5);
    s.ropts.r_lo = 0.05;
    s.ropts.r_hi = 50.0;
    auto report = find_critical_rate(s.frozen, s.input, s.source, s.catalogue, s.ropts);
    REQUIRE(!report.rates.empty());
    classify_tipping(s.frozen, s.input, s.source, s.catalogue, s.candidates, s.ropts, report);
    CHECK(report.verdict == Verdict::Reversible);
    REQUIRE(report.upper_tail.has_value());
    REQUIRE(report.lower_tail.has_value());
    CHECK(report.upper_tail->outcome.attractor == report.lower_tail->outcome.attractor);
    // distinct connections geometrically
    CHECK(ratekit::manifolds::hausdorff_distance(report.upper_tail->sample.points,
                                                 report.lower_tail->sample.points) > 0.5);
}

TEST_CASE("threshold tracking: sections approach the frozen threshold") {
    auto s = make_quad(3.0);
    auto eta_plus = s.candidates.front();
    const std::vector<double> taus{-2.0, -0.5, 0.5, 1.5, 3.0};
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {0.2, 0.1, 0.05}) {
        ratekit::compact::CompactifiedSystem cs(s.frozen, s.input, r, {}, -2.0);
        double worst = 0;
        for (double tau : taus) {
            auto sec = ratekit::manifolds::threshold_section(cs, eta_plus, tau, 2.0);
            auto edge = s.edge_branch.at(s.frozen, tau);
            auto th = ratekit::manifolds::frozen_threshold(s.frozen, edge.lambda, edge, 2.0);
            worst = std::max(
                worst, ratekit::manifolds::hausdorff_distance(sec.points, th.points));
        }
        CHECK(worst < prev);
        prev = worst;
    }
    CHECK(prev <= 0.05);
}

TEST_CASE("sigma construction on the quadratic ramp") {
    auto s = make_quad(3.0);
    ScanOptions sopts;
    sopts.m = 31;
    auto scan = scan_forward_threshold_instability(s.frozen, s.input, s.sink_branch,
                                                   s.edge_branch, s.catalogue, sopts);
    REQUIRE(scan.unstable);

    auto built = construct_tipping_input(s.frozen, s.input, s.sink_branch, s.edge_branch, 1.0,
                                         scan, s.catalogue);
    CHECK(built.eps > 0);
    CHECK(built.tau_alpha < built.tau_beta);
    // the constructed input's pullback shadows eta+
    CHECK(built.min_dist_eta <= 1e-3);
    // the two segment ends land on opposite outcomes
    CHECK(!built.outcome_minus.same_as(built.outcome_plus));
    CHECK(built.ds_trace.size() >= 3);

    // delta_target beyond the attainable range is rejected with a diagnostic
    ConstructControls big;
    big.delta_target = 100.0;
    CHECK_THROWS_AS(construct_tipping_input(s.frozen, s.input, s.sink_branch, s.edge_branch,
                                            1.0, scan, s.catalogue, big),
                    ValidationError);
}

TEST_CASE("sigma construction rejects forward-threshold-stable inputs") {
    FrozenSystem f(1, 1, {"(x1+lam1)^2 - 1"});
    ExternalInput down({TanhComponent{3.0, 0.0, 1.0}}, 1.0);
    auto sink_seed = find_equilibrium(f, down.value(0.0), {-2.5});
    auto edge_seed = find_equilibrium(f, down.value(0.0), {-0.5});
    auto sb = moving_equilibrium(f, down, sink_seed);
    auto eb = moving_equilibrium(f, down, edge_seed);
    auto cat = build_catalogue(f, down, sb, {});
    ScanOptions sopts;
    sopts.m = 21;
    auto scan = scan_forward_threshold_instability(f, down, sb, eb, cat, sopts);
    CHECK(!scan.unstable);
    CHECK_THROWS_AS(construct_tipping_input(f, down, sb, eb, 1.0, scan, cat),
                    ValidationError);
}

TEST_CASE("tipping diagram over the quadratic family") {
    DiagramRequest req;
    req.grid = {2.2, 2.6, 3.0, 3.4, 3.8};
    req.instantiate = [](double lam_max) {
        return std::pair<FrozenSystem, ExternalInput>(
            FrozenSystem(1, 1, {"(x1+lam1)^2 - 1"}),
            ExternalInput({TanhComponent{0.0, lam_max, 1.0}}, 1.0));
    };
    req.sink_seed = {-3.0};
    req.edge_seed = {-2.0};
    req.rate.r_lo = 0.05;
    req.rate.r_hi = 1000.0;
    req.rate.tol_r = 1e-5;
    req.classify = false;

    auto pts = tipping_diagram(req);
    REQUIRE(pts.size() == req.grid.size());
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& pt : pts) {
        INFO("p = ", pt.p, " err = ", pt.error);
        REQUIRE(pt.error.empty());
        REQUIRE(!pt.report.rates.empty());
        const double rc = pt.report.rates.front().r_c();
        CHECK(rc < prev);  // larger overshoot tips at slower rates
        prev = rc;
        // oracle at each point: outcomes differ just outside the bracket
        const auto& cr = pt.report.rates.front();
        CHECK(!cr.below.same_as(cr.above));
    }

    // stable sub-family: no tipping anywhere
    DiagramRequest req2 = req;
    req2.grid = {1.0, 1.5, 1.9};
    auto pts2 = tipping_diagram(req2);
    for (const auto& pt : pts2) {
        REQUIRE(pt.error.empty());
        CHECK(pt.report.verdict == Verdict::NoTippingFound);
    }

    // degenerate single-point sweep
    DiagramRequest req3 = req;
    req3.grid = {3.0};
    auto pts3 = tipping_diagram(req3);
    CHECK(pts3.size() == 1);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("tipping");

TEST_CASE("tracking and rate search from a fixed start point") {
    FrozenSystem f(1, 1, {"(x1+lam1)^2 - 1"});
    ExternalInput in({TanhComponent{0.0, 3.0, 1.0}}, 1.0);
    auto sink_seed = find_equilibrium(f, in.value(0.0), {-2.6});
    auto sb = moving_equilibrium(f, in, sink_seed);
    auto cat = build_catalogue(f, in, sb, {});

    // start on the sink at a finite time instead of the pullback attractor
    StartPoint start{{sb.at(f, -5.0).x}, -5.0};
    auto rep = check_tracking(f, in, sb, 0.05, 0.1, start, cat);
    CHECK(rep.delta_close);
    CHECK(rep.end_point);

    auto src = TrajectorySource::from_point(start.x0, start.tau0);
    RateSearchOptions ro;
    ro.r_lo = 0.1;
    ro.r_hi = 10.0;
    auto report = find_critical_rate(f, in, src, cat, ro);
    REQUIRE(report.rates.size() == 1);
    CHECK(report.rates.front().below.kind == OmegaOutcome::Kind::Attractor);
    CHECK(report.rates.front().above.kind == OmegaOutcome::Kind::Divergent);
}

TEST_CASE("scan values are odd under the orientation convention flip") {
    auto s = make_quad(3.0);
    ScanOptions sopts;
    sopts.m = 15;
    auto scan =
        scan_threshold_instability(s.frozen, s.sink_branch, s.edge_branch, s.catalogue, sopts);
    int compared = 0;
    for (std::size_t i = 0; i < scan.grid1.size(); ++i) {
        for (std::size_t j = 0; j < scan.grid2.size(); ++j) {
            const double v = scan.value(i, j);
            if (!std::isfinite(v)) continue;
            auto sink = s.sink_branch.at(s.frozen, scan.grid1[i]);
            auto edge = s.edge_branch.at(s.frozen, scan.grid2[j]);
            auto th = ratekit::manifolds::frozen_threshold(s.frozen, edge.lambda, edge, 2.0);
            const double flipped =
                ratekit::manifolds::signed_distance(sink.x, th.flipped());
            CHECK(flipped == doctest::Approx(-v).epsilon(1e-12));
            ++compared;
        }
    }
    CHECK(compared > 50);
}

TEST_CASE("tracking regime holds on every builtin-style system") {
    // quadratic and cubic shifts, the planar circle flow, and the fold system
    struct Case {
        FrozenSystem f;
        ExternalInput in;
        ratekit::numcore::Vec sink_guess;
        double r_star;
    };
    std::vector<Case> cases;
    cases.push_back({FrozenSystem(1, 1, {"(x1+lam1)^2 - 1"}),
                     ExternalInput({TanhComponent{0.0, 3.0, 1.0}}, 1.0), {-2.6}, 0.2});
    cases.push_back({FrozenSystem(1, 1, {"(x1+lam1) - (x1+lam1)^3"}),
                     ExternalInput({TanhComponent{0.0, 2.0, 1.0}}, 1.0), {-2.1}, 0.2});
    cases.push_back(
        {FrozenSystem(2, 1,
                      {"-x2*(x2 - 0.5) + (x1+lam1)*(1 - (x1+lam1)^2 - x2^2)",
                       "(x1+lam1)*(x2 - 0.5) + x2*(1 - (x1+lam1)^2 - x2^2)"}),
         ExternalInput({TanhComponent{0.0, 2.5, 1.0}}, 1.0), {-2.116, 0.5}, 0.1});
    // the fold system tracks only below the r^(1/3) fold-layer scale
    cases.push_back(
        {FrozenSystem(1, 1,
                      {"-((x1 + lam1)^2 - (1 - lam1^2))*((x1 + lam1)^2 - 4)*((x1 + lam1) + 3)/10"}),
         ExternalInput({TanhComponent{0.0, -1.5, 1.0}}, 1.0), {0.1}, 0.002});

    for (auto& c : cases) {
        auto seed = find_equilibrium(c.f, c.in.value(0.0), c.sink_guess);
        auto sb = moving_equilibrium(c.f, c.in, seed);
        AttractorCatalogue cat;
        if (std::isinf(sb.param.back())) {
            cat = build_catalogue(c.f, c.in, sb, {});
        } else {
            // sink dies at a fold: catalogue any future attractor for the
            // endpoint bookkeeping (the delta-close verdict is the point here)
            cat = build_catalogue(c.f, c.in, sb, {{3.5}, {-1.5}});
        }
        double prev = std::numeric_limits<double>::infinity();
        for (double r : {c.r_star, c.r_star / 2, c.r_star / 4}) {
            auto rep = check_tracking(c.f, c.in, sb, r, 0.1, {}, cat);
            CHECK(rep.delta_close);
            CHECK(rep.sup_deviation < prev);
            prev = rep.sup_deviation;
        }
    }
}

TEST_SUITE_END();
