#include <cmath>
#include <random>

#include "doctest.h"
#include "ratekit/expr.hpp"

using ratekit::EvalError;
using ratekit::ParseError;
using ratekit::expr::ExprAst;

namespace {

// Random AST source generator for the derivative and round-trip properties.
// Stays on smooth, domain-safe operations; the non-smooth primitives get
// targeted checks below.
struct RandomExpr {
    std::mt19937 rng;
    std::vector<std::string> vars{"x1", "x2", "x3"};

    explicit RandomExpr(unsigned seed) : rng(seed) {}

    std::string gen(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
        switch (pick(rng)) {
            case 0: {
                std::uniform_real_distribution<double> lit(0.1, 2.0);
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.3f", lit(rng));
                return buf;
            }
            case 1: {
                std::uniform_int_distribution<int> v(0, static_cast<int>(vars.size()) - 1);
                return vars[v(rng)];
            }
            case 2: return "(" + gen(depth - 1) + " + " + gen(depth - 1) + ")";
            case 3: return "(" + gen(depth - 1) + " - " + gen(depth - 1) + ")";
            case 4: return "(" + gen(depth - 1) + ")*(" + gen(depth - 1) + ")";
            case 5: return "sin(" + gen(depth - 1) + ")";
            case 6: return "cos(" + gen(depth - 1) + ")";
            case 7: return "tanh(" + gen(depth - 1) + ")";
            case 8: return "sech(" + gen(depth - 1) + ")";
            default: return "(" + gen(depth - 1) + ")^2";
        }
    }
};

}  // namespace

TEST_SUITE_BEGIN("expr");

TEST_CASE("parse examples") {
    auto a = ExprAst::parse("(x1+lam1)^2 - 1", {"x1", "lam1"});
    CHECK(a.depth() == 3);

    auto b = ExprAst::parse("tanh(0.5*tau)", {"tau"});
    CHECK(b.node_count() >= 3);
    CHECK(b.print().find("tanh") != std::string::npos);

    try {
        ExprAst::parse("x1 + ", {"x1"});
        FAIL("expected syntax error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 5);
    }
}

TEST_CASE("parse rejects unknowns") {
    CHECK_THROWS_AS(ExprAst::parse("x1 + y", {"x1"}), ParseError);
    CHECK_THROWS_AS(ExprAst::parse("foo(x1)", {"x1"}), ParseError);
    CHECK_THROWS_AS(ExprAst::parse("x1 + (x1", {"x1"}), ParseError);
}

TEST_CASE("eval examples") {
    auto a = ExprAst::parse("(x1+lam1)^2 - 1", {"x1", "lam1"});
    CHECK(a.eval({{"x1", 0.0}, {"lam1", 0.0}}) == doctest::Approx(-1.0));

    auto b = ExprAst::parse("tanh(0)", std::vector<std::string>{});
    CHECK(b.eval(std::span<const double>{}) == doctest::Approx(0.0));

    auto c = ExprAst::parse("sech(0)", std::vector<std::string>{});
    CHECK(c.eval(std::span<const double>{}) == doctest::Approx(1.0));
}

TEST_CASE("eval domain errors carry offsets") {
    auto div = ExprAst::parse("1/(x1-1)", {"x1"});
    std::vector<double> at_one{1.0};
    CHECK_THROWS_AS(div.eval(at_one), EvalError);

    auto ln = ExprAst::parse("ln(x1)", {"x1"});
    std::vector<double> neg{-2.0};
    CHECK_THROWS_AS(ln.eval(neg), EvalError);

    auto pw = ExprAst::parse("x1^(-1)", {"x1"});
    std::vector<double> zero{0.0};
    CHECK_THROWS_AS(pw.eval(zero), EvalError);
}

TEST_CASE("eval_dual examples") {
    auto a = ExprAst::parse("(x1+lam1)^2 - 1", {"x1", "lam1"});
    auto d = a.eval_dual({{"x1", 1.0}, {"lam1", 0.0}});
    CHECK(d.value == doctest::Approx(0.0));
    CHECK(d.partials[0] == doctest::Approx(2.0));
    CHECK(d.partials[1] == doctest::Approx(2.0));

    auto c = ExprAst::parse("3.25", {"x1"});
    auto dc = c.eval_dual({{"x1", 7.0}});
    CHECK(dc.value == doctest::Approx(3.25));
    CHECK(dc.partials[0] == 0.0);

    auto t = ExprAst::parse("tanh(tau)", {"tau"});
    auto dt = t.eval_dual({{"tau", 0.0}});
    CHECK(dt.value == doctest::Approx(0.0));
    CHECK(dt.partials[0] == doctest::Approx(1.0));
}

TEST_CASE("dual derivative domain errors") {
    auto ab = ExprAst::parse("abs(x1)", {"x1"});
    std::vector<double> zero{0.0};
    CHECK_THROWS_AS(ab.eval_dual(zero), EvalError);
    CHECK(ab.eval(zero) == 0.0);  // plain eval is fine

    auto sq = ExprAst::parse("sqrt(x1)", {"x1"});
    CHECK_THROWS_AS(sq.eval_dual(zero), EvalError);
}

TEST_CASE("dual matches finite differences on targeted forms") {
    const std::vector<std::pair<std::string, double>> cases = {
        {"x1/(1 + x1^2)", 0.7}, {"sqrt(x1 + 2)", 1.3}, {"ln(x1 + 3)", 0.4},
        {"exp(0.3*x1)", 1.1},   {"abs(x1 - 5)", 2.0},  {"tan(0.2*x1)", 0.9},
        {"x1^3", -1.2},         {"2^x1", 0.8},
    };
    const double h = 1e-6;
    for (const auto& [src, x] : cases) {
        auto ast = ExprAst::parse(src, {"x1"});
        std::vector<double> lo{x - h}, hi{x + h}, at{x};
        const double fd = (ast.eval(hi) - ast.eval(lo)) / (2 * h);
        const double ad = ast.eval_dual(at).partials[0];
        CHECK(std::fabs(ad - fd) <= 1e-5 * (1 + std::fabs(ad)));
    }
}

TEST_CASE("property: dual vs central differences on 1000 random ASTs") {
    RandomExpr gen(20240811u);
    std::uniform_real_distribution<double> pt(-1.5, 1.5);
    const double h = 1e-6;
    int checked = 0;
    while (checked < 1000) {
        auto src = gen.gen(6);
        auto ast = ExprAst::parse(src, gen.vars);
        std::vector<double> x{pt(gen.rng), pt(gen.rng), pt(gen.rng)};
        ratekit::expr::DualValue d;
        try {
            d = ast.eval_dual(x);
        } catch (const EvalError&) {
            continue;
        }
        bool ok = true;
        for (std::size_t i = 0; i < x.size() && ok; ++i) {
            auto lo = x, hi = x;
            lo[i] -= h;
            hi[i] += h;
            double fd;
            try {
                fd = (ast.eval(hi) - ast.eval(lo)) / (2 * h);
            } catch (const EvalError&) {
                ok = false;
                break;
            }
            CHECK(std::fabs(d.partials[i] - fd) <= 1e-5 * (1 + std::fabs(d.partials[i])));
        }
        if (ok) ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("property: print/parse round-trip is structurally identical") {
    RandomExpr gen(77u);
    for (int i = 0; i < 400; ++i) {
        auto ast = ExprAst::parse(gen.gen(5), gen.vars);
        auto back = ExprAst::parse(ast.print(), gen.vars);
        CHECK(ast.same_structure(back));
    }
    // precedence corner cases
    for (const char* s : {"-x1^2", "x1^-2", "(x1^2)^3", "x1^2^3", "x1 - (x2 + x3)",
                          "(-x1)^2", "2*-x1", "x1/(x2*x3)", "-(x1 + x2)"}) {
        auto ast = ExprAst::parse(s, {"x1", "x2", "x3"});
        auto back = ExprAst::parse(ast.print(), {"x1", "x2", "x3"});
        CHECK(ast.same_structure(back));
    }
}

TEST_CASE("precedence") {
    auto a = ExprAst::parse("-x1^2", {"x1"});
    std::vector<double> x{3.0};
    CHECK(a.eval(x) == doctest::Approx(-9.0));

    auto b = ExprAst::parse("2^-2", std::vector<std::string>{});
    CHECK(b.eval(std::span<const double>{}) == doctest::Approx(0.25));

    auto c = ExprAst::parse("2^3^2", std::vector<std::string>{});
    CHECK(c.eval(std::span<const double>{}) == doctest::Approx(512.0));

    auto d = ExprAst::parse("1 - 2 - 3", std::vector<std::string>{});
    CHECK(d.eval(std::span<const double>{}) == doctest::Approx(-4.0));
}

TEST_SUITE_END();
