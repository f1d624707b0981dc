#include "ratekit/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ratekit::scenario {

using nlohmann::json;

double NumOrConst::resolve(const std::vector<std::string>& names, const Vec& values) const {
    if (ref.empty()) return value;
    auto it = std::find(names.begin(), names.end(), ref);
    if (it == names.end())
        throw ValidationError("unknown constant '" + ref + "' referenced in the scenario");
    return values[static_cast<std::size_t>(it - names.begin())];
}

namespace {

NumOrConst parse_num(const json& j, const std::string& what) {
    NumOrConst out;
    if (j.is_number()) {
        out.value = j.get<double>();
    } else if (j.is_string()) {
        out.ref = j.get<std::string>();
    } else {
        throw ValidationError(what + " must be a number or a constant name");
    }
    return out;
}

Vec parse_vec(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + " must be an array of numbers");
    Vec v;
    for (const auto& e : j) {
        if (!e.is_number()) throw ValidationError(what + " must contain numbers only");
        v.push_back(e.get<double>());
    }
    return v;
}

}  // namespace

Scenario Scenario::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("scenario JSON parse error: ") + e.what());
    }

    Scenario s;
    try {
        s.name = j.value("name", "scenario");
        s.n = j.value("n", 1);
        s.d = j.value("d", 1);

        if (j.contains("constants")) {
            for (const auto& [k, v] : j.at("constants").items()) {
                s.constant_names.push_back(k);
                if (!v.is_number())
                    throw ValidationError("constant '" + k + "' must be a number");
                s.constant_values.push_back(v.get<double>());
            }
        }

        if (!j.contains("field")) throw ValidationError("scenario needs a 'field' array");
        for (const auto& e : j.at("field")) s.field.push_back(e.get<std::string>());

        if (!j.contains("input")) throw ValidationError("scenario needs an 'input' object");
        const auto& ji = j.at("input");
        s.input.rho = parse_num(ji.at("rho"), "input.rho");
        for (const auto& jc : ji.at("components")) {
            InputComponentSpec c;
            const std::string type = jc.at("type").get<std::string>();
            if (type == "tanh") {
                c.kind = InputComponentSpec::Kind::Tanh;
                c.tanh.past = parse_num(jc.at("past"), "tanh.past");
                c.tanh.future = parse_num(jc.at("future"), "tanh.future");
                c.tanh.steepness = jc.contains("steepness")
                                       ? parse_num(jc.at("steepness"), "tanh.steepness")
                                       : NumOrConst{1.0};
            } else if (type == "sech_pulse") {
                c.kind = InputComponentSpec::Kind::SechPulse;
                c.sech.base = parse_num(jc.at("base"), "sech.base");
                c.sech.amplitude = parse_num(jc.at("amplitude"), "sech.amplitude");
                c.sech.width = jc.contains("width") ? parse_num(jc.at("width"), "sech.width")
                                                    : NumOrConst{1.0};
            } else if (type == "expr") {
                c.kind = InputComponentSpec::Kind::Expr;
                c.expr.source = jc.at("source").get<std::string>();
                c.expr.past = parse_num(jc.at("past"), "expr.past");
                c.expr.future = parse_num(jc.at("future"), "expr.future");
            } else {
                throw ValidationError("unknown input component type '" + type + "'");
            }
            s.input.components.push_back(std::move(c));
        }

        if (j.contains("seeds")) {
            const auto& js = j.at("seeds");
            if (js.contains("sink")) s.sink_seed = parse_vec(js.at("sink"), "seeds.sink");
            if (js.contains("edge")) s.edge_seed = parse_vec(js.at("edge"), "seeds.edge");
            if (js.contains("attractors"))
                for (const auto& a : js.at("attractors"))
                    s.attractor_seeds.push_back(parse_vec(a, "seeds.attractors[..]"));
        }

        if (j.contains("rate")) {
            const auto& jr = j.at("rate");
            if (jr.contains("r")) s.r_fixed = jr.at("r").get<double>();
            s.r_lo = jr.value("r_lo", s.r_lo);
            s.r_hi = jr.value("r_hi", s.r_hi);
            s.tol_r = jr.value("tol_r", s.tol_r);
        }

        if (j.contains("start")) {
            tipping::StartPoint sp;
            sp.x0 = parse_vec(j.at("start").at("x"), "start.x");
            sp.tau0 = j.at("start").value("tau0", 0.0);
            s.start = sp;
        }

        if (j.contains("sweep")) {
            const auto& jw = j.at("sweep");
            s.sweep_constant = jw.at("constant").get<std::string>();
            if (jw.contains("grid")) {
                s.sweep_grid = parse_vec(jw.at("grid"), "sweep.grid");
            } else {
                const double from = jw.at("from").get<double>();
                const double to = jw.at("to").get<double>();
                const int count = jw.at("count").get<int>();
                if (count < 1) throw ValidationError("sweep.count must be positive");
                for (int k = 0; k < count; ++k)
                    s.sweep_grid.push_back(count == 1 ? from
                                                      : from + (to - from) * k / (count - 1.0));
            }
        }

        s.analysis = j.value("analysis", "");

        if (j.contains("overrides")) {
            const auto& jo = j.at("overrides");
            if (jo.contains("alpha")) s.overrides.alpha = jo.at("alpha").get<double>();
            s.overrides.tracking_delta = jo.value("delta", s.overrides.tracking_delta);
            if (jo.contains("seed_delta"))
                s.overrides.seed_delta = jo.at("seed_delta").get<double>();
            s.overrides.scan_m = jo.value("scan_m", s.overrides.scan_m);
            s.overrides.arclength = jo.value("arclength", s.overrides.arclength);
            s.overrides.eps_cap = jo.value("eps_cap", s.overrides.eps_cap);
            s.overrides.t_max = jo.value("t_max", s.overrides.t_max);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("scenario field error: ") + e.what());
    }

    s.validate();
    return s;
}

void Scenario::validate() const {
    if (n < 1) throw ValidationError("state dimension n must be at least 1");
    if (d < 1) throw ValidationError("input dimension d must be at least 1");
    if (static_cast<int>(field.size()) != n)
        throw ValidationError("'field' must have exactly n component expressions");
    if (static_cast<int>(input.components.size()) != d)
        throw ValidationError("'input.components' must have exactly d entries");
    if (!sink_seed.empty() && static_cast<int>(sink_seed.size()) != n)
        throw ValidationError("seeds.sink must have n entries");
    if (!edge_seed.empty() && static_cast<int>(edge_seed.size()) != n)
        throw ValidationError("seeds.edge must have n entries");
    for (const auto& a : attractor_seeds)
        if (static_cast<int>(a.size()) != n)
            throw ValidationError("every seeds.attractors entry must have n entries");
    if (start && static_cast<int>(start->x0.size()) != n)
        throw ValidationError("start.x must have n entries");
    if (r_fixed && !(*r_fixed > 0)) throw ValidationError("rate.r must be positive");
    if (!(r_lo > 0) || !(r_lo < r_hi))
        throw ValidationError("rate range must satisfy 0 < r_lo < r_hi");
    if (!(tol_r > 0)) throw ValidationError("rate.tol_r must be positive");
    if (!sweep_constant.empty()) {
        if (std::find(constant_names.begin(), constant_names.end(), sweep_constant) ==
            constant_names.end())
            throw ValidationError("sweep.constant '" + sweep_constant +
                                  "' is not a declared constant");
        if (sweep_grid.empty()) throw ValidationError("sweep grid is empty");
    }
    if (!analysis.empty()) {
        static const char* known[] = {"validate",  "track",   "scan",   "find-rc",
                                      "classify",  "construct-input", "diagram"};
        if (std::none_of(std::begin(known), std::end(known),
                         [&](const char* k) { return analysis == k; }))
            throw ValidationError("unknown analysis '" + analysis + "'");
    }

    // instantiate to catch expression and input problems, and check the
    // compactification window 0 < alpha < rho
    const auto frozen = make_frozen();
    const auto in = make_input();
    if (overrides.alpha) {
        if (!(*overrides.alpha > 0) || !(*overrides.alpha < in.rho()))
            throw ValidationError(
                "alpha override must lie strictly inside the compactification window (0, rho): "
                "smoothness of the glued system holds for alpha <= rho and the lifted "
                "eigenstructure needs alpha < rho");
    }
    (void)frozen;
}

systems::FrozenSystem Scenario::make_frozen(const std::string& const_override,
                                            double value) const {
    Vec values = constant_values;
    if (!const_override.empty()) {
        auto it = std::find(constant_names.begin(), constant_names.end(), const_override);
        if (it == constant_names.end())
            throw ValidationError("unknown constant '" + const_override + "'");
        values[static_cast<std::size_t>(it - constant_names.begin())] = value;
    }
    return systems::FrozenSystem(n, d, field, constant_names, values);
}

systems::ExternalInput Scenario::make_input(const std::string& const_override,
                                            double value) const {
    Vec values = constant_values;
    if (!const_override.empty()) {
        auto it = std::find(constant_names.begin(), constant_names.end(), const_override);
        if (it == constant_names.end())
            throw ValidationError("unknown constant '" + const_override + "'");
        values[static_cast<std::size_t>(it - constant_names.begin())] = value;
    }
    std::vector<systems::InputComponent> comps;
    for (const auto& c : input.components) {
        switch (c.kind) {
            case InputComponentSpec::Kind::Tanh:
                comps.push_back(systems::TanhComponent{
                    c.tanh.past.resolve(constant_names, values),
                    c.tanh.future.resolve(constant_names, values),
                    c.tanh.steepness.resolve(constant_names, values)});
                break;
            case InputComponentSpec::Kind::SechPulse:
                comps.push_back(systems::SechPulseComponent{
                    c.sech.base.resolve(constant_names, values),
                    c.sech.amplitude.resolve(constant_names, values),
                    c.sech.width.resolve(constant_names, values)});
                break;
            case InputComponentSpec::Kind::Expr:
                comps.push_back(systems::ExprComponent{
                    c.expr.source, c.expr.past.resolve(constant_names, values),
                    c.expr.future.resolve(constant_names, values)});
                break;
        }
    }
    return systems::ExternalInput(std::move(comps), input.rho.resolve(constant_names, values),
                                  constant_names, values);
}

report::JValue Scenario::config_json() const {
    using report::JValue;
    JValue cfg = JValue::object();
    cfg.set("name", name);
    cfg.set("n", n);
    cfg.set("d", d);
    JValue consts = JValue::object();
    for (std::size_t i = 0; i < constant_names.size(); ++i)
        consts.set(constant_names[i], constant_values[i]);
    cfg.set("constants", std::move(consts));
    JValue fld = JValue::array();
    for (const auto& f : field) fld.push(f);
    cfg.set("field", std::move(fld));

    JValue in = JValue::object();
    in.set("rho", make_input().rho());
    JValue comps = JValue::array();
    for (const auto& c : input.components) {
        JValue jc = JValue::object();
        auto r = [&](const NumOrConst& v) { return v.resolve(constant_names, constant_values); };
        switch (c.kind) {
            case InputComponentSpec::Kind::Tanh:
                jc.set("type", "tanh");
                jc.set("past", r(c.tanh.past));
                jc.set("future", r(c.tanh.future));
                jc.set("steepness", r(c.tanh.steepness));
                break;
            case InputComponentSpec::Kind::SechPulse:
                jc.set("type", "sech_pulse");
                jc.set("base", r(c.sech.base));
                jc.set("amplitude", r(c.sech.amplitude));
                jc.set("width", r(c.sech.width));
                break;
            case InputComponentSpec::Kind::Expr:
                jc.set("type", "expr");
                jc.set("source", c.expr.source);
                jc.set("past", r(c.expr.past));
                jc.set("future", r(c.expr.future));
                break;
        }
        comps.push(std::move(jc));
    }
    in.set("components", std::move(comps));
    cfg.set("input", std::move(in));

    JValue seeds = JValue::object();
    seeds.set("sink", JValue(sink_seed));
    seeds.set("edge", JValue(edge_seed));
    JValue attrs = JValue::array();
    for (const auto& a : attractor_seeds) attrs.push(JValue(a));
    seeds.set("attractors", std::move(attrs));
    cfg.set("seeds", std::move(seeds));

    JValue rate = JValue::object();
    if (r_fixed) rate.set("r", *r_fixed);
    rate.set("r_lo", r_lo);
    rate.set("r_hi", r_hi);
    rate.set("tol_r", tol_r);
    cfg.set("rate", std::move(rate));

    if (start) {
        JValue st = JValue::object();
        st.set("x", JValue(start->x0));
        st.set("tau0", start->tau0);
        cfg.set("start", std::move(st));
    }
    if (!sweep_constant.empty()) {
        JValue sw = JValue::object();
        sw.set("constant", sweep_constant);
        sw.set("grid", JValue(sweep_grid));
        cfg.set("sweep", std::move(sw));
    }

    JValue ov = JValue::object();
    ov.set("alpha", overrides.alpha ? JValue(*overrides.alpha) : JValue::null());
    ov.set("delta", overrides.tracking_delta);
    ov.set("seed_delta",
           overrides.seed_delta ? JValue(*overrides.seed_delta) : JValue::null());
    ov.set("scan_m", overrides.scan_m);
    ov.set("arclength", overrides.arclength);
    ov.set("eps_cap", overrides.eps_cap);
    ov.set("t_max", overrides.t_max);
    // engine defaults materialised for reproducibility
    ov.set("rel_tol", 1e-9);
    ov.set("abs_tol", 1e-11);
    ov.set("blowup_norm", 1e6);
    ov.set("newton_tol", 1e-12);
    ov.set("newton_max_iter", 50);
    ov.set("hyperbolicity_tol", equilibria::kHyperbolicityTol);
    ov.set("fold_tol", equilibria::kFoldTol);
    ov.set("s_hand", tipping::kSHand);
    ov.set("eta_capture", tipping::kEtaCapture);
    ov.set("connect_tol", tipping::kConnectTol);
    ov.set("coarse_rate_points", tipping::kCoarseRatePoints);
    cfg.set("numerics", std::move(ov));
    return cfg;
}

// ---------------------------------------------------------------------------
// builtins
// ---------------------------------------------------------------------------

namespace {

const char* kSn1d = R"json({
  "name": "sn1d",
  "n": 1,
  "d": 1,
  "constants": {"lam_max": 3.0},
  "field": ["(x1 + lam1)^2 - 1"],
  "input": {
    "rho": 1.0,
    "components": [{"type": "tanh", "past": 0.0, "future": "lam_max", "steepness": 1.0}]
  },
  "seeds": {"sink": [-2.5], "edge": [-0.5], "attractors": []},
  "rate": {"r": 1.0, "r_lo": 0.05, "r_hi": 50.0, "tol_r": 1e-6},
  "sweep": {"constant": "lam_max", "from": 2.1, "to": 4.0, "count": 8},
  "analysis": "classify"
})json";

const char* kCubic1d = R"json({
  "name": "cubic1d",
  "n": 1,
  "d": 1,
  "constants": {"lam_max": 2.0},
  "field": ["(x1 + lam1) - (x1 + lam1)^3"],
  "input": {
    "rho": 1.0,
    "components": [{"type": "tanh", "past": 0.0, "future": "lam_max", "steepness": 1.0}]
  },
  "seeds": {"sink": [-2.1], "edge": [-1.0], "attractors": [[-1.0]]},
  "rate": {"r": 1.0, "r_lo": 0.05, "r_hi": 50.0, "tol_r": 1e-6},
  "analysis": "classify"
})json";

const char* kPlanarExcitable = R"json({
  "name": "planar-excitable",
  "n": 2,
  "d": 1,
  "constants": {"lam_max": 2.5},
  "field": [
    "-x2*(x2 - 0.5) + (x1 + lam1)*(1 - (x1 + lam1)^2 - x2^2)",
    "(x1 + lam1)*(x2 - 0.5) + x2*(1 - (x1 + lam1)^2 - x2^2)"
  ],
  "input": {
    "rho": 1.0,
    "components": [{"type": "tanh", "past": 0.0, "future": "lam_max", "steepness": 1.0}]
  },
  "seeds": {"sink": [-2.116, 0.5], "edge": [-0.384, 0.5], "attractors": []},
  "rate": {"r": 1.0, "r_lo": 0.05, "r_hi": 50.0, "tol_r": 1e-5},
  "overrides": {"arclength": 6.0},
  "analysis": "classify"
})json";

const char* kFoldBtip = R"json({
  "name": "fold-btip",
  "n": 1,
  "d": 1,
  "constants": {"lam_min": -1.5},
  "field": ["-((x1 + lam1)^2 - (1 - lam1^2))*((x1 + lam1)^2 - 4)*((x1 + lam1) + 3)/10"],
  "input": {
    "rho": 1.0,
    "components": [{"type": "tanh", "past": 0.0, "future": "lam_min", "steepness": 1.0}]
  },
  "seeds": {"sink": [0.1], "edge": [-1.25], "attractors": [[3.5], [-1.5]]},
  "rate": {"r": 1.0, "r_lo": 0.05, "r_hi": 50.0, "tol_r": 1e-6},
  "analysis": "find-rc"
})json";

}  // namespace

std::vector<std::string> Scenario::builtin_names() {
    return {"sn1d", "cubic1d", "planar-excitable", "fold-btip"};
}

std::string Scenario::builtin_text(const std::string& name) {
    if (name == "sn1d") return kSn1d;
    if (name == "cubic1d") return kCubic1d;
    if (name == "planar-excitable") return kPlanarExcitable;
    if (name == "fold-btip") return kFoldBtip;
    throw ValidationError("unknown builtin scenario '" + name + "'");
}

Scenario Scenario::load(const std::string& path_or_name) {
    if (std::filesystem::exists(path_or_name)) {
        std::ifstream f(path_or_name, std::ios::binary);
        if (!f) throw ValidationError("cannot read scenario file: " + path_or_name);
        std::stringstream ss;
        ss << f.rdbuf();
        return from_json_text(ss.str());
    }
    const auto names = builtin_names();
    if (std::find(names.begin(), names.end(), path_or_name) != names.end())
        return from_json_text(builtin_text(path_or_name));
    throw ValidationError("scenario '" + path_or_name +
                          "' is neither a readable file nor a builtin name");
}

}  // namespace ratekit::scenario
