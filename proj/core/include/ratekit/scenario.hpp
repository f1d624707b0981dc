#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ratekit/report.hpp"
#include "ratekit/systems.hpp"
#include "ratekit/tipping.hpp"

namespace ratekit::scenario {

using numcore::Vec;

/// A numeric field that may reference a named constant.
struct NumOrConst {
    double value = 0;
    std::string ref;  // non-empty: resolve against the constants

    NumOrConst() = default;
    NumOrConst(double v) : value(v) {}
    double resolve(const std::vector<std::string>& names, const Vec& values) const;
};

struct TanhSpec {
    NumOrConst past, future, steepness{1.0};
};
struct SechPulseSpec {
    NumOrConst base, amplitude, width{1.0};
};
struct ExprSpec {
    std::string source;
    NumOrConst past, future;
};
struct InputComponentSpec {
    enum class Kind { Tanh, SechPulse, Expr } kind = Kind::Tanh;
    TanhSpec tanh;
    SechPulseSpec sech;
    ExprSpec expr;
};

struct InputSpec {
    NumOrConst rho{1.0};
    std::vector<InputComponentSpec> components;
};

/// Numeric overrides; defaults materialise into every report.
struct Overrides {
    std::optional<double> alpha;
    double tracking_delta = 0.1;
    std::optional<double> seed_delta;
    int scan_m = 41;
    double arclength = 2.0;
    double eps_cap = manifolds::kDefaultEpsCap;
    double t_max = manifolds::kDefaultTMax;
};

/// Scenario file contents: system, input, seeds, rate settings, optional
/// sweep, analysis selection and numeric overrides.
struct Scenario {
    std::string name;
    int n = 1, d = 1;
    std::vector<std::string> constant_names;
    Vec constant_values;
    std::vector<std::string> field;
    InputSpec input;

    Vec sink_seed, edge_seed;
    std::vector<Vec> attractor_seeds;

    std::optional<double> r_fixed;
    double r_lo = 1e-3, r_hi = 1e3, tol_r = 1e-6;

    std::optional<tipping::StartPoint> start;

    std::string sweep_constant;
    std::vector<double> sweep_grid;

    std::string analysis;  // informational default

    Overrides overrides;

    /// Parses and validates the JSON text (throws ValidationError).
    static Scenario from_json_text(const std::string& text);
    /// Loads a scenario file, or a shipped builtin when `path_or_name` names
    /// one (sn1d, cubic1d, planar-excitable, fold-btip).
    static Scenario load(const std::string& path_or_name);
    static std::vector<std::string> builtin_names();
    static std::string builtin_text(const std::string& name);

    /// Instantiates the frozen system / input, optionally overriding one
    /// named constant (sweeps).
    systems::FrozenSystem make_frozen(const std::string& const_override = "",
                                      double value = 0) const;
    systems::ExternalInput make_input(const std::string& const_override = "",
                                      double value = 0) const;

    /// Consistency checks beyond parsing: expressions compile, seeds have the
    /// right dimension, alpha override sits inside (0, rho).
    void validate() const;

    /// Full resolved configuration (defaults materialised) for reports.
    report::JValue config_json() const;
};

}  // namespace ratekit::scenario
