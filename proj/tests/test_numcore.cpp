#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "ratekit/numcore.hpp"

using namespace ratekit::numcore;

TEST_SUITE_BEGIN("numcore");

TEST_CASE("integrate: linear decay") {
    auto field = [](double, const Vec& x, Vec& dx) { dx[0] = -x[0]; };
    auto trj = integrate(field, {1.0}, 0.0, 1.0);
    CHECK(trj.reason() == StopReason::TimeLimit);
    CHECK(trj.end_state()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("integrate: zero field stays constant") {
    auto field = [](double, const Vec&, Vec& dx) { dx[0] = 0.0; };
    auto trj = integrate(field, {0.7}, 0.0, 5.0);
    CHECK(trj.end_state()[0] == 0.7);
    for (const auto& s : trj.states()) CHECK(s[0] == 0.7);
}

TEST_CASE("integrate: blowup of x^2 flagged before the pole") {
    // closed form 1/(1-t), pole at t=1
    auto field = [](double, const Vec& x, Vec& dx) { dx[0] = x[0] * x[0]; };
    auto trj = integrate(field, {1.0}, 0.0, 2.0);
    CHECK(trj.reason() == StopReason::Blowup);
    CHECK(trj.end_time() < 1.0);
    CHECK(trj.end_time() > 0.9);
}

TEST_CASE("integrate: dense output accuracy") {
    auto field = [](double, const Vec& x, Vec& dx) { dx[0] = -x[0]; };
    auto trj = integrate(field, {1.0}, 0.0, 3.0);
    for (double t = 0.1; t < 3.0; t += 0.31) {
        CHECK(trj.at(t)[0] == doctest::Approx(std::exp(-t)).epsilon(1e-7));
    }
}

TEST_CASE("integrate: time strictly increasing") {
    auto field = [](double t, const Vec&, Vec& dx) { dx[0] = std::sin(t); };
    auto trj = integrate(field, {0.0}, 0.0, 10.0);
    for (std::size_t i = 1; i < trj.times().size(); ++i)
        CHECK(trj.times()[i] > trj.times()[i - 1]);
}

TEST_CASE("integrate: order check via step halving") {
    // fixed steps forced through max_step with loose tolerances
    auto field = [](double, const Vec& x, Vec& dx) { dx[0] = -x[0]; };
    auto run = [&](double h) {
        IntegrateOptions o;
        o.rel_tol = 1.0;
        o.abs_tol = 1.0;
        o.max_step = h;
        o.initial_step = h;
        auto trj = integrate(field, {1.0}, 0.0, 2.0, o);
        return std::fabs(trj.end_state()[0] - std::exp(-2.0));
    };
    const double e1 = run(0.2);
    const double e2 = run(0.1);
    CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("integrate: event location") {
    auto field = [](double, const Vec&, Vec& dx) { dx[0] = 1.0; };
    std::vector<EventFn> ev{[](double, const Vec& x) { return x[0] - 0.5; }};
    auto trj = integrate(field, {0.0}, 0.0, 2.0, {}, ev);
    CHECK(trj.reason() == StopReason::Event);
    CHECK(trj.event_index() == 0);
    CHECK(std::fabs(trj.end_time() - 0.5) <= 1e-9);
}

TEST_CASE("integrate: earliest of several events wins") {
    auto field = [](double, const Vec&, Vec& dx) { dx[0] = 1.0; };
    std::vector<EventFn> ev{
        [](double, const Vec& x) { return x[0] - 0.9; },
        [](double, const Vec& x) { return x[0] - 0.3; },
    };
    auto trj = integrate(field, {0.0}, 0.0, 2.0, {}, ev);
    CHECK(trj.event_index() == 1);
    CHECK(trj.end_time() == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("integrate: non-finite derivative reports step failure") {
    auto field = [](double, const Vec&, Vec& dx) { dx[0] = std::nan(""); };
    auto trj = integrate(field, {1.0}, 0.0, 1.0);
    CHECK(trj.reason() == StopReason::StepFailure);
}

TEST_CASE("newton: square root") {
    auto res = [](const Vec& x) { return Vec{x[0] * x[0] - 1.0}; };
    auto jac = [](const Vec& x) {
        Mat m(1, 1);
        m(0, 0) = 2 * x[0];
        return m;
    };
    auto x = newton(res, jac, {0.7});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("newton: linear converges in one step") {
    auto res = [](const Vec& x) { return Vec{x[0]}; };
    auto jac = [](const Vec&) {
        Mat m(1, 1);
        m(0, 0) = 1.0;
        return m;
    };
    auto r = newton_solve(res, jac, {5.0});
    CHECK(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(std::fabs(r.x[0]) <= 1e-12);
}

TEST_CASE("newton: quadratic root with shift") {
    // residual (x+lam)^2-1 at lam=0.3 has roots -1.3 and 0.7
    const double lam = 0.3;
    auto res = [&](const Vec& x) { return Vec{(x[0] + lam) * (x[0] + lam) - 1.0}; };
    auto jac = [&](const Vec& x) {
        Mat m(1, 1);
        m(0, 0) = 2 * (x[0] + lam);
        return m;
    };
    auto x = newton(res, jac, {-1.5});
    CHECK(x[0] == doctest::Approx(-1.3).epsilon(1e-12));
}

TEST_CASE("newton: singular Jacobian reported") {
    auto res = [](const Vec& x) { return Vec{x[0] * x[0]}; };
    auto jac = [](const Vec&) {
        Mat m(1, 1);
        m(0, 0) = 0.0;
        return m;
    };
    auto r = newton_solve(res, jac, {0.5});
    CHECK(!r.converged);
    CHECK(r.singular);
}

TEST_CASE("eigen: diagonal") {
    Mat a(2, 2);
    a(0, 0) = -2;
    a(1, 1) = -1;
    auto d = eigen(a);
    CHECK(d.values[0].real() == doctest::Approx(-1.0));
    CHECK(d.values[1].real() == doctest::Approx(-2.0));
    auto v0 = real_eigenvector(d, 0);
    CHECK(std::fabs(v0[1]) == doctest::Approx(1.0));
    CHECK(std::fabs(v0[0]) <= 1e-10);
}

TEST_CASE("eigen: rotation gives +-i") {
    Mat a(2, 2);
    a(0, 1) = 1;
    a(1, 0) = -1;
    auto d = eigen(a);
    CHECK(d.values[0].real() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(std::fabs(d.values[0].imag()) == doctest::Approx(1.0));
    CHECK(d.values[0].imag() * d.values[1].imag() < 0);
}

TEST_CASE("eigen: quadratic sink Jacobian") {
    // d/dx[(x+lam)^2-1] = 2(x+lam) = -2 at the sink x=-lam-1
    Mat a(1, 1);
    a(0, 0) = -2.0;
    auto d = eigen(a);
    CHECK(d.values[0].real() == doctest::Approx(-2.0));
}

TEST_CASE("eigen: residual and trace/det invariants on random matrices") {
    std::mt19937 rng(99u);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int n : {2, 3, 5, 8, 16, 64}) {
        Mat a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = u(rng);
        auto d = eigen(a);

        // residual ||Av - mu v|| <= 1e-8 ||A|| ||v||
        const double an = mat_norm1(a);
        for (int k = 0; k < n; ++k) {
            double res = 0;
            for (int i = 0; i < n; ++i) {
                Complex s = 0;
                for (int j = 0; j < n; ++j) s += a(i, j) * d.vectors[k][j];
                s -= d.values[k] * d.vectors[k][i];
                res += std::norm(s);
            }
            CHECK(std::sqrt(res) <= 1e-8 * an);
        }

        // trace and determinant match sum/product to 1e-8 relative
        double tr = 0;
        for (int i = 0; i < n; ++i) tr += a(i, i);
        Complex sum = 0, prod = 1;
        for (const auto& v : d.values) {
            sum += v;
            prod *= v;
        }
        CHECK(std::fabs(sum.real() - tr) <= 1e-8 * (1 + std::fabs(tr)));
        CHECK(std::fabs(sum.imag()) <= 1e-8 * (1 + std::fabs(tr)));

        // determinant via LU (absolute value comparison avoids sign bookkeeping
        // of the pivoting): |det| = prod |U_ii|
        double logdet = 0;
        bool singular = false;
        {
            Mat m = a;
            std::vector<int> piv(n);
            for (int k = 0; k < n; ++k) {
                int p = k;
                for (int i = k + 1; i < n; ++i)
                    if (std::fabs(m(i, k)) > std::fabs(m(p, k))) p = i;
                if (m(p, k) == 0.0) {
                    singular = true;
                    break;
                }
                if (p != k)
                    for (int j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
                logdet += std::log(std::fabs(m(k, k)));
                for (int i = k + 1; i < n; ++i) {
                    const double f = m(i, k) / m(k, k);
                    for (int j = k; j < n; ++j) m(i, j) -= f * m(k, j);
                }
            }
        }
        if (!singular) {
            CHECK(std::log(std::abs(prod)) == doctest::Approx(logdet).epsilon(1e-8));
        }
    }
}

TEST_CASE("eigen: repeated eigenvalues get independent eigenvectors") {
    Mat a(2, 2);
    a(0, 0) = -2;
    a(1, 1) = -2;
    auto d = eigen(a);
    // orthogonal choices for the diagonal case
    Complex dot = 0;
    for (int i = 0; i < 2; ++i) dot += std::conj(d.vectors[0][i]) * d.vectors[1][i];
    CHECK(std::abs(dot) <= 1e-6);
}

TEST_CASE("lu: solve and condition estimate") {
    Mat a(2, 2);
    a(0, 0) = 4;
    a(0, 1) = 1;
    a(1, 0) = 2;
    a(1, 1) = 3;
    Lu lu(a);
    auto x = lu.solve({9.0, 13.0});  // solution (1.4, 3.4)
    CHECK(x[0] == doctest::Approx(1.4));
    CHECK(x[1] == doctest::Approx(3.4));
    CHECK(condition_estimate(a) > 1.0);
    CHECK(condition_estimate(a) < 1e3);
}

TEST_SUITE_END();
