#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ratekit/cli.hpp"
#include "ratekit/scenario.hpp"

namespace fs = std::filesystem;
using ratekit::ValidationError;
using ratekit::scenario::Scenario;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("ratekit_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> argv{"ratekit"};
    argv.insert(argv.end(), args.begin(), args.end());
    return ratekit::cli::run(argv);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("builtin scenarios parse and validate") {
    for (const auto& name : Scenario::builtin_names()) {
        auto sc = Scenario::load(name);
        CHECK(sc.name == name);
        CHECK(!sc.field.empty());
        CHECK_NOTHROW(sc.make_frozen());
        CHECK_NOTHROW(sc.make_input());
    }
    CHECK_THROWS_AS(Scenario::load("not-a-scenario"), ValidationError);
}

TEST_CASE("scenario validation failures") {
    // alpha at or above rho is outside the admissible window
    const char* bad_alpha = R"({
      "name": "bad", "n": 1, "d": 1,
      "field": ["(x1 + lam1)^2 - 1"],
      "input": {"rho": 1.0, "components": [{"type": "tanh", "past": 0, "future": 1}]},
      "seeds": {"sink": [-1.5]},
      "overrides": {"alpha": 1.5}
    })";
    try {
        Scenario::from_json_text(bad_alpha);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("(0, rho)") != std::string::npos);
    }

    const char* bad_dim = R"({
      "name": "bad", "n": 2, "d": 1,
      "field": ["x1"],
      "input": {"rho": 1.0, "components": [{"type": "tanh", "past": 0, "future": 1}]}
    })";
    CHECK_THROWS_AS(Scenario::from_json_text(bad_dim), ValidationError);

    const char* bad_expr = R"({
      "name": "bad", "n": 1, "d": 1,
      "field": ["(x1 + nosuch)^2"],
      "input": {"rho": 1.0, "components": [{"type": "tanh", "past": 0, "future": 1}]}
    })";
    CHECK_THROWS(Scenario::from_json_text(bad_expr));
}

TEST_CASE("validate subcommand exit codes") {
    auto dir = fresh_dir("validate");
    const auto bad = dir / "bad.json";
    std::ofstream(bad) << R"({
      "name": "bad", "n": 1, "d": 1,
      "field": ["(x1 + lam1)^2 - 1"],
      "input": {"rho": 1.0, "components": [{"type": "tanh", "past": 0, "future": 1}]},
      "seeds": {"sink": [-1.5]},
      "overrides": {"alpha": 2.0}
    })";
    CHECK(run_cli({"validate", bad.string()}) == 2);
    CHECK(run_cli({"validate", "sn1d"}) == 0);
    CHECK(run_cli({"validate", "nonexistent.json"}) == 2);
}

TEST_CASE("scan produces csv and svg with verdicts") {
    auto dir = fresh_dir("scan");
    CHECK(run_cli({"scan", "sn1d", "--out", dir.string()}) == 0);
    CHECK(fs::exists(dir / "instability_scan.csv"));
    CHECK(fs::exists(dir / "scan.svg"));
    CHECK(fs::exists(dir / "scan_report.json"));
    const auto csv = slurp(dir / "instability_scan.csv");
    CHECK(csv.rfind("tau1,tau2,signed_distance\n", 0) == 0);
    const auto rep = slurp(dir / "scan_report.json");
    CHECK(rep.find("\"forward_threshold_unstable\": true") != std::string::npos);
    CHECK(rep.find("\"threshold_unstable\": true") != std::string::npos);
    const auto svg = slurp(dir / "scan.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<rect") != std::string::npos);
}

TEST_CASE("find-rc writes a tipping report; --expect-tipping exits 4 when stable") {
    auto dir = fresh_dir("findrc");
    CHECK(run_cli({"find-rc", "sn1d", "--out", dir.string()}) == 0);
    const auto rep = slurp(dir / "tipping_report.json");
    CHECK(rep.find("\"critical_rates\"") != std::string::npos);
    CHECK(rep.find("\"r_c\"") != std::string::npos);

    // a stable family member: lam_max = 1 has no tipping at any rate
    const auto stable = dir / "stable.json";
    std::ofstream(stable) << R"({
      "name": "stable", "n": 1, "d": 1,
      "constants": {"lam_max": 1.0},
      "field": ["(x1 + lam1)^2 - 1"],
      "input": {"rho": 1.0,
                "components": [{"type": "tanh", "past": 0.0, "future": "lam_max"}]},
      "seeds": {"sink": [-1.6], "edge": [0.6]},
      "rate": {"r_lo": 0.05, "r_hi": 50.0, "tol_r": 1e-6}
    })";
    CHECK(run_cli({"find-rc", stable.string(), "--out", dir.string()}) == 0);
    CHECK(run_cli({"find-rc", stable.string(), "--out", dir.string(), "--expect-tipping"}) == 4);
}

TEST_CASE("track requires a fixed rate and writes outputs") {
    auto dir = fresh_dir("track");
    CHECK(run_cli({"track", "sn1d", "--out", dir.string()}) == 0);
    CHECK(fs::exists(dir / "tracking_report.json"));
    CHECK(fs::exists(dir / "moving_sink.csv"));
    CHECK(fs::exists(dir / "trajectory.csv"));
    CHECK(fs::exists(dir / "track.svg"));
    const auto csv = slurp(dir / "moving_sink.csv");
    CHECK(csv.rfind("u_or_tau,lam1,x1,re_eig1,class\n", 0) == 0);
}

TEST_CASE("construct-input emits the sigma parameters and trace") {
    auto dir = fresh_dir("construct");
    CHECK(run_cli({"construct-input", "sn1d", "--out", dir.string()}) == 0);
    const auto rep = slurp(dir / "constructed_input.json");
    CHECK(rep.find("\"tau_alpha\"") != std::string::npos);
    CHECK(rep.find("\"eps\"") != std::string::npos);
    const auto trace = slurp(dir / "sigma_trace.csv");
    CHECK(trace.rfind("zeta,signed_distance\n", 0) == 0);
}

TEST_CASE("determinism: consecutive runs are byte-identical") {
    for (const std::string name : {"sn1d", "cubic1d"}) {
        auto d1 = fresh_dir("det1_" + name);
        auto d2 = fresh_dir("det2_" + name);
        REQUIRE(run_cli({"classify", name, "--out", d1.string()}) == 0);
        REQUIRE(run_cli({"classify", name, "--out", d2.string()}) == 0);
        for (const auto& entry : fs::directory_iterator(d1)) {
            const auto file = entry.path().filename();
            CHECK(slurp(d1 / file) == slurp(d2 / file));
        }
    }
}

TEST_CASE("diagram over the shipped sweep") {
    auto dir = fresh_dir("diagram");
    // narrow the sweep for test speed
    const auto sc = dir / "sweep.json";
    std::ofstream(sc) << R"({
      "name": "sweep", "n": 1, "d": 1,
      "constants": {"lam_max": 3.0},
      "field": ["(x1 + lam1)^2 - 1"],
      "input": {"rho": 1.0,
                "components": [{"type": "tanh", "past": 0.0, "future": "lam_max"}]},
      "seeds": {"sink": [-3.0], "edge": [-2.0]},
      "rate": {"r_lo": 0.05, "r_hi": 100.0, "tol_r": 1e-5},
      "sweep": {"constant": "lam_max", "grid": [2.5, 3.0, 3.5]}
    })";
    CHECK(run_cli({"diagram", sc.string(), "--out", dir.string(), "--jobs", "2"}) == 0);
    const auto csv = slurp(dir / "diagram.csv");
    CHECK(csv.rfind("p,rate_index,r_lo,r_hi,r_c,verdict,outcome_below,outcome_above,error\n",
                    0) == 0);
    // three grid rows with found rates
    int found = 0;
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line))
        if (line.find(",0,") != std::string::npos) ++found;
    CHECK(found == 3);
    CHECK(fs::exists(dir / "diagram.svg"));
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("cli");

TEST_CASE("numerical failures exit with code 3") {
    auto dir = fresh_dir("numfail");
    // the sink seed lands in a region with no equilibrium at Lambda(0)
    const auto bad = dir / "numfail.json";
    std::ofstream(bad) << R"({
      "name": "numfail", "n": 1, "d": 1,
      "field": ["(x1 + lam1)^2 + 1"],
      "input": {"rho": 1.0, "components": [{"type": "tanh", "past": 0, "future": 1}]},
      "seeds": {"sink": [0.0]}
    })";
    CHECK(run_cli({"find-rc", bad.string(), "--out", dir.string()}) == 3);
}

TEST_SUITE_END();
