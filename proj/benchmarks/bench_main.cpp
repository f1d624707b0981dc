#include <benchmark/benchmark.h>

#include <random>

#include "ratekit/compact.hpp"
#include "ratekit/equilibria.hpp"
#include "ratekit/manifolds.hpp"
#include "ratekit/numcore.hpp"
#include "ratekit/systems.hpp"

using namespace ratekit;
using numcore::Vec;

namespace {

systems::FrozenSystem quad() { return systems::FrozenSystem(1, 1, {"(x1+lam1)^2 - 1"}); }

systems::ExternalInput ramp(double lam_max) {
    return systems::ExternalInput({systems::TanhComponent{0.0, lam_max, 1.0}}, 1.0);
}

void BM_expr_eval(benchmark::State& state) {
    auto ast = expr::ExprAst::parse("sin(x1)*cos(x2) + tanh(x1*x2) - sech(x1 + x2)^2",
                                    {"x1", "x2"});
    std::vector<double> x{0.3, -0.7};
    for (auto _ : state) {
        benchmark::DoNotOptimize(ast.eval(x));
    }
}
BENCHMARK(BM_expr_eval);

void BM_expr_eval_dual(benchmark::State& state) {
    auto ast = expr::ExprAst::parse("sin(x1)*cos(x2) + tanh(x1*x2) - sech(x1 + x2)^2",
                                    {"x1", "x2"});
    std::vector<double> x{0.3, -0.7};
    for (auto _ : state) {
        benchmark::DoNotOptimize(ast.eval_dual(x));
    }
}
BENCHMARK(BM_expr_eval_dual);

void BM_integrate_decay(benchmark::State& state) {
    auto field = [](double, const Vec& x, Vec& dx) { dx[0] = -x[0]; };
    for (auto _ : state) {
        benchmark::DoNotOptimize(numcore::integrate(field, {1.0}, 0.0, 10.0));
    }
}
BENCHMARK(BM_integrate_decay);

void BM_pullback_run(benchmark::State& state) {
    auto f = quad();
    auto in = ramp(3.0);
    compact::CompactifiedSystem cs(f, in, 1.0, {}, -2.0);
    auto e_minus = equilibria::find_equilibrium(f, in.limit(-1), {-1.1});
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            manifolds::pullback_attractor(cs, e_minus, 1e-6, 1.0 - 1e-6));
    }
}
BENCHMARK(BM_pullback_run);

void BM_eigen(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::mt19937 rng(5u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    numcore::Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(numcore::eigen(a));
    }
}
BENCHMARK(BM_eigen)->Arg(4)->Arg(16)->Arg(64);

void BM_newton_equilibrium(benchmark::State& state) {
    auto f = quad();
    for (auto _ : state) {
        benchmark::DoNotOptimize(equilibria::find_equilibrium(f, {0.3}, {-1.5}));
    }
}
BENCHMARK(BM_newton_equilibrium);

}  // namespace

BENCHMARK_MAIN();
