#include <cmath>
#include <random>

#include "doctest.h"
#include "ratekit/manifolds.hpp"

using namespace ratekit::manifolds;
using ratekit::NumericsError;
using ratekit::ValidationError;
using ratekit::compact::CompactifiedSystem;
using ratekit::equilibria::find_equilibrium;
using ratekit::systems::ExternalInput;
using ratekit::systems::FrozenSystem;
using ratekit::systems::TanhComponent;

namespace {

FrozenSystem quad() { return FrozenSystem(1, 1, {"(x1+lam1)^2 - 1"}); }
ExternalInput ramp01() { return ExternalInput({TanhComponent{0, 1, 1}}, 1.0); }

// planar excitable circle flow: sink and saddle on an attracting invariant
// circle, both unstable-manifold branches of the saddle loop to the sink
FrozenSystem snic() {
    return FrozenSystem(
        2, 1,
        {"-x2*(x2 - 0.5) + (x1+lam1)*(1 - (x1+lam1)^2 - x2^2)",
         "(x1+lam1)*(x2 - 0.5) + x2*(1 - (x1+lam1)^2 - x2^2)"});
}

}  // namespace

TEST_SUITE_BEGIN("manifolds");

TEST_CASE("pullback attractor: constant input hugs the sink") {
    auto f = quad();
    ExternalInput flat({TanhComponent{0.5, 0.5, 1}}, 1.0);
    CompactifiedSystem cs(f, flat, 1.0);
    auto e_minus = find_equilibrium(f, flat.limit(-1), {-1.4});
    auto pr = pullback_attractor(cs, e_minus, 1e-6, 1.0 - 1e-6);
    CHECK(!pr.blew_up);
    for (const auto& p : pr.sample.points)
        CHECK(std::fabs(p[0] - e_minus.x[0]) <= 1e-4);
    // s runs from near -1 to the stop value
    CHECK(pr.sample.points.front()[1] < -0.999);
    CHECK(pr.sample.points.back()[1] >= 1.0 - 1e-6 - 1e-12);
}

TEST_CASE("pullback attractor: tracking regime endpoint lands at e+") {
    auto f = quad();
    auto in = ramp01();
    const double r = 0.05;
    CompactifiedSystem cs(f, in, r, {}, -2.0);
    auto e_minus = find_equilibrium(f, in.limit(-1), {-0.9});
    auto pr = pullback_attractor(cs, e_minus, 1e-6, 1.0 - 1e-6);
    CHECK(std::fabs(pr.sample.points.back()[0] - (-2.0)) <= 1e-3);

    // halving the seed offset barely moves the endpoint
    auto pr2 = pullback_attractor(cs, e_minus, 0.5e-6, 1.0 - 1e-6);
    CHECK(std::fabs(pr2.sample.points.back()[0] - pr.sample.points.back()[0]) <= 1e-5);
}

TEST_CASE("pullback attractor identification vs deep-past integration") {
    auto f = quad();
    auto in = ramp01();
    const double T = 30.0;  // 30/rho
    for (double r : {0.1, 1.0}) {
        CompactifiedSystem cs(f, in, r, {}, -2.0);
        auto e_minus = find_equilibrium(f, in.limit(-1), {-0.9});
        auto pr = pullback_attractor(cs, e_minus, 1e-8, 1.0 - 1e-7);
        REQUIRE(pr.traj.start_time() < -T);
        REQUIRE(pr.traj.end_time() > T);

        ratekit::systems::NonautonomousSystem sys(f, in, r);
        auto direct = ratekit::numcore::integrate(sys.field(), e_minus.x, -T, T);
        REQUIRE(direct.reason() == ratekit::numcore::StopReason::TimeLimit);

        double sup = 0;
        for (double tau = -T; tau <= T; tau += 0.25) {
            const double a = pr.traj.at(tau)[0];
            const double b = direct.at(tau)[0];
            sup = std::max(sup, std::fabs(a - b));
        }
        CHECK(sup <= 1e-4);
    }
}

TEST_CASE("pullback seed offset bounds") {
    auto f = quad();
    auto in = ramp01();
    CompactifiedSystem cs(f, in, 1.0);
    auto e_minus = find_equilibrium(f, in.limit(-1), {-0.9});
    CHECK_THROWS_AS(pullback_attractor(cs, e_minus, 1e-9, 0.9), ValidationError);
    CHECK_THROWS_AS(pullback_attractor(cs, e_minus, 1e-2, 0.9), ValidationError);
}

TEST_CASE("frozen threshold: 1-D point with + orientation") {
    auto f = quad();
    auto edge = find_equilibrium(f, {0.0}, {0.9});
    auto th = frozen_threshold(f, {0.0}, edge, 1.0);
    REQUIRE(th.points.size() == 1);
    CHECK(th.points[0][0] == doctest::Approx(1.0));
    CHECK(th.normals[0][0] == 1.0);

    CHECK(signed_distance({0.5}, th) == doctest::Approx(-0.5));
    CHECK(signed_distance({1.0}, th) == doctest::Approx(0.0));
    CHECK(signed_distance({1.7}, th) == doctest::Approx(0.7));
}

TEST_CASE("frozen threshold: planar linear saddle gives the y-axis") {
    FrozenSystem lin(2, 0, {"x1", "-x2"});
    auto edge = find_equilibrium(lin, {}, {0.01, 0.01});
    CHECK(edge.is_edge_candidate());
    auto th = frozen_threshold(lin, {}, edge, 2.0);
    REQUIRE(th.points.size() > 20);
    double ymin = 1e9, ymax = -1e9;
    for (const auto& p : th.points) {
        CHECK(std::fabs(p[0]) <= 1e-5);  // on the y-axis
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    CHECK(ymin <= -1.9);
    CHECK(ymax >= 1.9);
    for (const auto& nu : th.normals) {
        CHECK(std::fabs(nu[0]) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(std::fabs(nu[1]) <= 1e-5);
    }

    // signed distance: + side along the unstable (+x) direction
    CHECK(signed_distance({0.3, 0.2}, th) == doctest::Approx(0.3).epsilon(1e-5));
    CHECK(signed_distance({-0.4, -1.0}, th) == doctest::Approx(-0.4).epsilon(1e-5));
    // beyond the sampled extent: sentinel
    CHECK(std::isinf(signed_distance({0.3, 7.0}, th)));

    // orientation flip negates every finite value
    auto fl = th.flipped();
    CHECK(signed_distance({0.3, 0.2}, fl) == doctest::Approx(-0.3).epsilon(1e-5));

    // arclength 0 degenerates to the saddle point
    auto th0 = frozen_threshold(lin, {}, edge, 0.0);
    CHECK(th0.points.size() == 1);
}

TEST_CASE("frozen threshold: n>=3 falls back to the local-linear plane") {
    FrozenSystem sys3(3, 0, {"x1", "-x2", "-x3 + x1^2"});
    auto edge = find_equilibrium(sys3, {}, {0.01, 0.0, 0.0});
    auto th = frozen_threshold(sys3, {}, edge, 1.0);
    CHECK(th.local_linear);
    CHECK(th.validity_radius > 0);
    CHECK(signed_distance({0.25, 0.1, -0.2}, th) == doctest::Approx(0.25));
}

TEST_CASE("hausdorff distance") {
    CHECK(hausdorff_distance({{0.0}}, {{0.0}}) == 0.0);
    CHECK(hausdorff_distance({{0.0}}, {{3.0}}) == doctest::Approx(3.0));
    CHECK(hausdorff_distance({{0.0}, {1.0}}, {{0.0}}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hausdorff_distance({}, {{1.0}}), ValidationError);

    // metric axioms on random triples
    std::mt19937 rng(5u);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    auto random_set = [&](int m) {
        std::vector<ratekit::numcore::Vec> s;
        for (int i = 0; i < m; ++i) s.push_back({u(rng), u(rng)});
        return s;
    };
    for (int k = 0; k < 200; ++k) {
        auto A = random_set(4), B = random_set(5), C = random_set(3);
        const double ab = hausdorff_distance(A, B);
        const double ba = hausdorff_distance(B, A);
        const double ac = hausdorff_distance(A, C);
        const double cb = hausdorff_distance(C, B);
        CHECK(ab == ba);                       // symmetry
        CHECK(ab >= 0);
        CHECK(hausdorff_distance(A, A) == 0);  // identity
        CHECK(ab <= ac + cb + 1e-12);          // triangle inequality
    }
}

TEST_CASE("classify_omega_limit on the quadratic future system") {
    auto f = quad();
    const ratekit::numcore::Vec lam_plus{1.0};  // e+ = -2, eta+ = 0
    auto e_plus = find_equilibrium(f, lam_plus, {-1.9});
    AttractorCatalogue cat;
    cat.add(e_plus);

    // the catalogued sink itself: immediate capture
    auto at_sink = classify_omega_limit(f, lam_plus, e_plus.x, cat);
    CHECK(at_sink.kind == OmegaOutcome::Kind::Attractor);
    CHECK(at_sink.attractor == 0);

    // above the source: finite-time blowup
    auto up = classify_omega_limit(f, lam_plus, {0.5}, cat);
    CHECK(up.kind == OmegaOutcome::Kind::Divergent);

    // below the source: monotone flow into e+
    auto dn = classify_omega_limit(f, lam_plus, {-0.5}, cat);
    CHECK(dn.kind == OmegaOutcome::Kind::Attractor);
    CHECK(dn.attractor == 0);
}

TEST_CASE("capture correctness: entered balls are never exited during dwell") {
    auto f = quad();
    const ratekit::numcore::Vec lam_plus{1.0};
    auto e_plus = find_equilibrium(f, lam_plus, {-1.9});
    AttractorCatalogue cat;
    cat.add(e_plus);  // eps_cap = 1e-3, below the linearisation radius here

    auto field = ratekit::systems::frozen_field(f, lam_plus);
    std::mt19937 rng(11u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double dwell = cat.dwell_time(0);
    for (int k = 0; k < 20; ++k) {
        ratekit::numcore::Vec x0{e_plus.x[0] + 0.99e-3 * u(rng)};
        auto trj = ratekit::numcore::integrate(field, x0, 0.0, dwell);
        for (const auto& s : trj.states())
            CHECK(std::fabs(s[0] - e_plus.x[0]) <= 1e-3);
    }
}

TEST_CASE("catalogue validation") {
    auto f = quad();
    auto e_plus = find_equilibrium(f, {1.0}, {-1.9});
    AttractorCatalogue cat;
    cat.add(e_plus);
    CHECK_THROWS_AS(cat.add(e_plus), ValidationError);  // overlapping balls

    auto edge = find_equilibrium(f, {1.0}, {0.1});
    AttractorCatalogue cat2;
    CHECK_THROWS_AS(cat2.add(edge), ValidationError);  // not a sink
}

TEST_CASE("edge tails: 1-D cubic reaches both sinks") {
    FrozenSystem cubic(1, 1, {"x1 - x1^3"});
    const ratekit::numcore::Vec lam{0.0};
    auto eta = find_equilibrium(cubic, lam, {0.05});
    CHECK(eta.is_edge_candidate());
    AttractorCatalogue cat;
    cat.add(find_equilibrium(cubic, lam, {1.1}));
    cat.add(find_equilibrium(cubic, lam, {-1.1}));

    auto tails = edge_tails(cubic, lam, eta, cat, 1e-6);
    REQUIRE(tails.plus.outcome.kind == OmegaOutcome::Kind::Attractor);
    REQUIRE(tails.minus.outcome.kind == OmegaOutcome::Kind::Attractor);
    CHECK(tails.plus.outcome.attractor == 0);   // +1 side
    CHECK(tails.minus.outcome.attractor == 1);  // -1 side
    CHECK(!tails.plus.outcome.same_as(tails.minus.outcome));

    // delta-halving: outcomes unchanged, endpoints move O(delta)
    auto tails2 = edge_tails(cubic, lam, eta, cat, 0.5e-6);
    CHECK(tails2.plus.outcome.same_as(tails.plus.outcome));
    CHECK(tails2.minus.outcome.same_as(tails.minus.outcome));
    const double move = std::fabs(tails2.plus.sample.points.back()[0] -
                                  tails.plus.sample.points.back()[0]);
    CHECK(move <= 10 * 1e-6);
}

TEST_CASE("edge tails: quadratic has one divergent branch") {
    auto f = quad();
    const ratekit::numcore::Vec lam_plus{1.0};
    auto eta = find_equilibrium(f, lam_plus, {0.1});
    AttractorCatalogue cat;
    cat.add(find_equilibrium(f, lam_plus, {-1.9}));
    auto tails = edge_tails(f, lam_plus, eta, cat, 1e-6);
    CHECK(tails.plus.outcome.kind == OmegaOutcome::Kind::Divergent);
    CHECK(tails.minus.outcome.kind == OmegaOutcome::Kind::Attractor);
}

TEST_CASE("edge tails: planar excitable loops both branches to one sink") {
    auto f = snic();
    const ratekit::numcore::Vec lam{0.0};
    const double c = 0.5, root = std::sqrt(1 - c * c);
    auto sink = find_equilibrium(f, lam, {-root, c});
    auto eta = find_equilibrium(f, lam, {root, c});
    CHECK(sink.cls == ratekit::equilibria::StabilityClass::Sink);
    CHECK(eta.is_edge_candidate());

    AttractorCatalogue cat;
    cat.add(sink);
    auto tails = edge_tails(f, lam, eta, cat, 1e-6);
    REQUIRE(tails.plus.outcome.kind == OmegaOutcome::Kind::Attractor);
    REQUIRE(tails.minus.outcome.kind == OmegaOutcome::Kind::Attractor);
    CHECK(tails.plus.outcome.attractor == 0);
    CHECK(tails.minus.outcome.attractor == 0);
    // the branches are geometrically different connections
    CHECK(hausdorff_distance(tails.plus.sample.points, tails.minus.sample.points) > 0.5);
}

TEST_CASE("threshold sections approach the frozen threshold as r shrinks") {
    auto f = quad();
    auto in = ramp01();
    auto eta_plus = find_equilibrium(f, in.limit(+1), {0.1});
    const double tau = 0.5;
    const double theta_frozen = 1.0 - in.value(tau)[0];  // eta(Lambda(tau))
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {0.2, 0.1, 0.05}) {
        CompactifiedSystem cs(f, in, r, {}, -2.0);
        auto sec = threshold_section(cs, eta_plus, tau, 1.0);
        REQUIRE(sec.points.size() == 1);
        const double gap = std::fabs(sec.points[0][0] - theta_frozen);
        CHECK(gap < prev);
        prev = gap;
    }
    CHECK(prev <= 5e-2);
}

TEST_CASE("manifold csv export") {
    auto f = quad();
    auto in = ramp01();
    CompactifiedSystem cs(f, in, 1.0);
    auto e_minus = find_equilibrium(f, in.limit(-1), {-0.9});
    auto pr = pullback_attractor(cs, e_minus, 1e-6, 0.5);
    auto csv = pr.sample.to_csv("na");
    CHECK(csv.rfind("kind,branch,tau_or_t,x1,s\n", 0) == 0);
    CHECK(csv.find("unstable_of_past_sink") != std::string::npos);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("manifolds");

TEST_CASE("unresolved limit-cycle orbits carry a recurrence hint") {
    // attracting unit circle with uniform rotation: no equilibrium attractor
    FrozenSystem rot(2, 1, {"x1*(1 - x1^2 - x2^2) - x2", "x2*(1 - x1^2 - x2^2) + x1"});
    AttractorCatalogue empty;
    ClassifyOptions opts;
    opts.t_max = 200.0;
    auto out = classify_omega_limit(rot, {0.0}, {0.3, 0.0}, empty, opts);
    CHECK(out.kind == OmegaOutcome::Kind::Unresolved);
    CHECK(out.recurrence_hint);
}

TEST_SUITE_END();
