#include "ratekit/cli.hpp"

#include <cmath>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ratekit/compact.hpp"
#include "ratekit/equilibria.hpp"
#include "ratekit/manifolds.hpp"
#include "ratekit/report.hpp"
#include "ratekit/scenario.hpp"
#include "ratekit/systems.hpp"
#include "ratekit/tipping.hpp"

namespace ratekit::cli {

namespace {

using equilibria::Branch;
using equilibria::EquilibriumRecord;
using manifolds::OmegaOutcome;
using numcore::Vec;
using report::JValue;
using scenario::Scenario;

void log_line(const std::string& level, const std::string& event, const std::string& detail) {
    JValue j = JValue::object();
    j.set("level", level);
    j.set("event", event);
    if (!detail.empty()) j.set("detail", detail);
    std::string s = j.dump(0);
    // single-line form for log streams
    std::string line;
    for (char c : s)
        if (c != '\n') line += c;
    std::cerr << line << "\n";
}

struct Flags {
    std::string out_dir = ".";
    int jobs = 1;
    bool expect_tipping = false;
    std::optional<double> alpha;
    std::optional<double> tol_r;
    std::optional<double> seed_delta;
};

std::string join_path(const std::string& dir, const std::string& file) {
    if (dir.empty() || dir == ".") return file;
    return dir + "/" + file;
}

// everything the analyses need, assembled once
struct Prepared {
    Scenario sc;
    systems::FrozenSystem frozen;
    systems::ExternalInput input;
    Branch sink_branch;
    std::optional<Branch> edge_branch;
    manifolds::AttractorCatalogue catalogue;
    tipping::TrajectorySource source;
    tipping::RateSearchOptions ropts;
    std::vector<EquilibriumRecord> candidates;

    Prepared(Scenario s, const Flags& flags)
        : sc(std::move(s)), frozen(sc.make_frozen()), input(sc.make_input()) {
        if (flags.alpha && !(*flags.alpha > 0 && *flags.alpha < input.rho()))
            throw ValidationError(
                "--alpha must lie strictly inside the compactification window (0, rho)");

        if (sc.sink_seed.empty())
            throw ValidationError("this analysis needs seeds.sink in the scenario");
        auto sink_rec = equilibria::find_equilibrium(frozen, input.value(0.0), sc.sink_seed);
        sink_branch = equilibria::moving_equilibrium(frozen, input, sink_rec);
        log_line("info", "sink_branch",
                 "records=" + std::to_string(sink_branch.size()) +
                     (std::isinf(sink_branch.param.back()) ? " reaches_future" : " ends_early"));

        catalogue = tipping::build_catalogue(frozen, input, sink_branch, sc.attractor_seeds,
                                             sc.overrides.eps_cap);

        if (sc.start) {
            source = tipping::TrajectorySource::from_point(sc.start->x0, sc.start->tau0);
        } else {
            if (!std::isinf(sink_branch.param.front()))
                throw ValidationError(
                    "the moving sink does not reach the past limit; provide 'start'");
            source = tipping::TrajectorySource::from_past_sink(sink_branch.front());
        }

        if (!sc.edge_seed.empty()) {
            auto edge_rec = equilibria::find_equilibrium(frozen, input.value(0.0), sc.edge_seed);
            edge_branch = equilibria::moving_equilibrium(frozen, input, edge_rec);
            if (std::isinf(edge_branch->param.back())) {
                auto eta = edge_branch->back();
                if (eta.is_edge_candidate()) {
                    candidates.push_back(eta);
                    ropts.side_oracle = tipping::prepare_side_oracle(
                        frozen, input, *edge_branch, sc.overrides.arclength);
                }
            }
        }

        ropts.r_lo = sc.r_lo;
        ropts.r_hi = sc.r_hi;
        ropts.tol_r = flags.tol_r.value_or(sc.tol_r);
        ropts.alpha_override = flags.alpha ? flags.alpha : sc.overrides.alpha;
        ropts.seed_delta = flags.seed_delta ? flags.seed_delta : sc.overrides.seed_delta;
        ropts.t_max = sc.overrides.t_max;
    }
};

JValue outcome_json(const OmegaOutcome& o) {
    JValue j = JValue::object();
    j.set("kind", o.label());
    if (o.is_attractor()) j.set("attractor", o.attractor);
    if (std::isfinite(o.capture_time)) j.set("capture_time", o.capture_time);
    if (o.recurrence_hint) j.set("recurrence_hint", true);
    if (std::isfinite(o.min_dist_to_probe)) j.set("min_dist_to_edge_state", o.min_dist_to_probe);
    return j;
}

JValue record_json(const EquilibriumRecord& r) {
    JValue j = JValue::object();
    j.set("x", JValue(r.x));
    j.set("lambda", JValue(r.lambda));
    JValue eig = JValue::array();
    for (const auto& v : r.eigen.values) {
        JValue e = JValue::object();
        e.set("re", v.real());
        e.set("im", v.imag());
        eig.push(std::move(e));
    }
    j.set("eigenvalues", std::move(eig));
    j.set("class", equilibria::class_name(r.cls, r.unstable_count));
    return j;
}

JValue rates_json(const tipping::TippingReport& rep) {
    JValue arr = JValue::array();
    for (const auto& rc : rep.rates) {
        JValue j = JValue::object();
        j.set("r_c", rc.r_c());
        j.set("bracket_lo", rc.r_lo);
        j.set("bracket_hi", rc.r_hi);
        j.set("bracket_width", rc.r_hi - rc.r_lo);
        j.set("outcome_below", outcome_json(rc.below));
        j.set("outcome_above", outcome_json(rc.above));
        if (std::isfinite(rc.min_dist_eta_below))
            j.set("min_dist_eta_below", rc.min_dist_eta_below);
        if (std::isfinite(rc.min_dist_eta_above))
            j.set("min_dist_eta_above", rc.min_dist_eta_above);
        arr.push(std::move(j));
    }
    return arr;
}

JValue tipping_report_json(const Prepared& prep, const tipping::TippingReport& rep,
                           bool classified) {
    JValue j = JValue::object();
    j.set("config", prep.sc.config_json());
    j.set("analysis", classified ? "classify" : "find-rc");
    j.set("critical_rates", rates_json(rep));
    if (classified || rep.rates.empty()) {
        j.set("verdict", tipping::verdict_name(rep.verdict));
        if (!rep.degenerate_reason.empty()) j.set("degenerate_reason", rep.degenerate_reason);
    } else {
        j.set("verdict", "RatesFound");
    }
    if (rep.eta_plus) j.set("edge_state", record_json(*rep.eta_plus));
    if (rep.upper_tail) {
        JValue t = JValue::object();
        t.set("outcome", outcome_json(rep.upper_tail->outcome));
        j.set("upper_tail", std::move(t));
    }
    if (rep.lower_tail) {
        JValue t = JValue::object();
        t.set("outcome", outcome_json(rep.lower_tail->outcome));
        j.set("lower_tail", std::move(t));
    }
    return j;
}

int run_validate(const Scenario& sc, const Flags& flags) {
    Prepared prep(sc, flags);  // full instantiation is the validation
    JValue j = JValue::object();
    j.set("valid", true);
    j.set("name", sc.name);
    j.set("config", sc.config_json());
    std::cout << j.dump();
    return 0;
}

int run_track(const Scenario& sc, const Flags& flags) {
    Prepared prep(sc, flags);
    if (!sc.r_fixed) throw ValidationError("track needs rate.r in the scenario");
    tipping::TrackingOptions topts;
    topts.alpha_override = prep.ropts.alpha_override;
    topts.seed_delta = prep.ropts.seed_delta;
    topts.t_max = sc.overrides.t_max;
    auto rep = tipping::check_tracking(prep.frozen, prep.input, prep.sink_branch, *sc.r_fixed,
                                       sc.overrides.tracking_delta, sc.start, prep.catalogue,
                                       topts);

    JValue j = JValue::object();
    j.set("config", sc.config_json());
    j.set("analysis", "track");
    j.set("r", rep.r);
    j.set("delta", rep.delta);
    j.set("interval", JValue(std::vector<double>{rep.interval_lo, rep.interval_hi}));
    j.set("sup_deviation", rep.sup_deviation);
    j.set("sup_deviation_tau", rep.sup_deviation_tau);
    j.set("delta_close", rep.delta_close);
    j.set("end_point", rep.end_point);
    j.set("end_outcome", outcome_json(rep.end_outcome));
    report::write_file(join_path(flags.out_dir, "tracking_report.json"), j.dump());
    report::write_file(join_path(flags.out_dir, "moving_sink.csv"), prep.sink_branch.to_csv());

    // trajectory vs moving sink, as csv and svg
    compact::CompactifiedSystem cs(prep.frozen, prep.input, *sc.r_fixed,
                                   prep.ropts.alpha_override,
                                   std::isinf(prep.sink_branch.param.back())
                                       ? std::optional<double>(
                                             prep.sink_branch.back().eigen.max_real())
                                       : std::nullopt);
    const double tau_hand = std::min(compact::h_alpha(cs.alpha(), tipping::kSHand),
                                     2.0 * prep.input.t_check());
    numcore::Trajectory traj;
    if (sc.start) {
        traj = numcore::integrate(cs.x_field(), sc.start->x0, sc.start->tau0, tau_hand);
    } else {
        const double delta = prep.ropts.seed_delta.value_or(
            std::min(manifolds::kSeedDeltaMax,
                     manifolds::default_seed_delta(prep.sink_branch.front().x)));
        traj = manifolds::pullback_attractor(cs, prep.sink_branch.front(), delta,
                                             compact::g_alpha(cs.alpha(), tau_hand))
                   .traj;
    }
    std::string csv = "tau";
    for (int i = 1; i <= prep.frozen.n(); ++i) csv += ",x" + std::to_string(i);
    csv += "\n";
    for (std::size_t k = 0; k < traj.times().size(); ++k) {
        csv += report::format_double(traj.times()[k]);
        for (double v : traj.states()[k]) csv += "," + report::format_double(v);
        csv += "\n";
    }
    report::write_file(join_path(flags.out_dir, "trajectory.csv"), csv);

    report::Series s_traj, s_sink;
    s_traj.label = "x1(tau)";
    for (std::size_t k = 0; k < traj.times().size(); ++k) {
        s_traj.x.push_back(traj.times()[k]);
        s_traj.y.push_back(traj.states()[k][0]);
    }
    s_sink.label = "moving sink";
    s_sink.color = "#555555";
    for (std::size_t k = 0; k < prep.sink_branch.size(); ++k) {
        if (std::isinf(prep.sink_branch.param[k])) continue;
        s_sink.x.push_back(prep.sink_branch.param[k]);
        s_sink.y.push_back(prep.sink_branch.records[k].x[0]);
    }
    report::write_file(join_path(flags.out_dir, "track.svg"),
                       report::svg_line_chart({s_traj, s_sink}, "trajectory vs moving sink",
                                              "tau", "x1"));
    log_line("info", "track_done",
             std::string("delta_close=") + (rep.delta_close ? "true" : "false"));
    return 0;
}

int run_scan(const Scenario& sc, const Flags& flags) {
    Prepared prep(sc, flags);
    if (!prep.edge_branch)
        throw ValidationError("scan needs seeds.edge resolving to an edge state");
    tipping::ScanOptions sopts;
    sopts.m = sc.overrides.scan_m;
    sopts.arclength = sc.overrides.arclength;

    auto fwd = tipping::scan_forward_threshold_instability(
        prep.frozen, prep.input, prep.sink_branch, *prep.edge_branch, prep.catalogue, sopts);
    auto path = tipping::scan_threshold_instability(prep.frozen, prep.sink_branch,
                                                    *prep.edge_branch, prep.catalogue, sopts);

    report::write_file(join_path(flags.out_dir, "instability_scan.csv"), fwd.to_csv());
    report::write_file(
        join_path(flags.out_dir, "scan.svg"),
        report::svg_heatmap(fwd.grid1, fwd.grid2, fwd.values,
                            "signed distance of e(tau1) to theta(tau2)", "tau1", "tau2"));

    JValue j = JValue::object();
    j.set("config", sc.config_json());
    j.set("analysis", "scan");
    j.set("threshold_unstable", path.unstable);
    j.set("basin_unstable", path.basin_unstable);
    j.set("forward_threshold_unstable", fwd.unstable);
    auto pairs_json = [](const tipping::InstabilityScan& s) {
        JValue arr = JValue::array();
        for (const auto& p : s.sign_changes) {
            JValue pj = JValue::object();
            pj.set("a", p.a);
            pj.set("b", p.b);
            arr.push(std::move(pj));
        }
        return arr;
    };
    j.set("forward_pairs", pairs_json(fwd));
    j.set("path_pairs", pairs_json(path));
    report::write_file(join_path(flags.out_dir, "scan_report.json"), j.dump());
    log_line("info", "scan_done",
             std::string("forward_unstable=") + (fwd.unstable ? "true" : "false"));
    return 0;
}

int run_find_rc(const Scenario& sc, const Flags& flags, bool classify) {
    Prepared prep(sc, flags);
    auto rep = tipping::find_critical_rate(prep.frozen, prep.input, prep.source, prep.catalogue,
                                           prep.ropts);
    if (classify && !rep.rates.empty())
        tipping::classify_tipping(prep.frozen, prep.input, prep.source, prep.catalogue,
                                  prep.candidates, prep.ropts, rep);

    report::write_file(join_path(flags.out_dir, "tipping_report.json"),
                       tipping_report_json(prep, rep, classify).dump());

    if (classify && rep.upper_tail && rep.lower_tail) {
        std::string csv = rep.upper_tail->sample.to_csv("upper");
        auto lower = rep.lower_tail->sample.to_csv("lower");
        // drop the second header
        const auto nl = lower.find('\n');
        csv += lower.substr(nl + 1);
        report::write_file(join_path(flags.out_dir, "edge_tails.csv"), csv);
    }
    log_line("info", "find_rc_done", "rates=" + std::to_string(rep.rates.size()));
    if (flags.expect_tipping && rep.rates.empty()) {
        log_line("error", "no_tipping_found", "");
        return 4;
    }
    return 0;
}

int run_construct(const Scenario& sc, const Flags& flags) {
    Prepared prep(sc, flags);
    if (!sc.r_fixed) throw ValidationError("construct-input needs rate.r (the fixed r*)");
    if (!prep.edge_branch)
        throw ValidationError("construct-input needs seeds.edge resolving to an edge state");
    tipping::ScanOptions sopts;
    sopts.m = sc.overrides.scan_m;
    sopts.arclength = sc.overrides.arclength;
    auto scan = tipping::scan_forward_threshold_instability(
        prep.frozen, prep.input, prep.sink_branch, *prep.edge_branch, prep.catalogue, sopts);
    auto built = tipping::construct_tipping_input(prep.frozen, prep.input, prep.sink_branch,
                                                  *prep.edge_branch, *sc.r_fixed, scan,
                                                  prep.catalogue);

    JValue j = JValue::object();
    j.set("config", sc.config_json());
    j.set("analysis", "construct-input");
    j.set("r_star", *sc.r_fixed);
    JValue sigma = JValue::object();
    sigma.set("tau_alpha", built.tau_alpha);
    sigma.set("tau_beta", built.tau_beta);
    sigma.set("eps", built.eps);
    j.set("sigma", std::move(sigma));
    j.set("delta_target", built.delta_target);
    j.set("min_dist_to_edge_state", built.min_dist_eta);
    j.set("outcome_minus", outcome_json(built.outcome_minus));
    j.set("outcome_plus", outcome_json(built.outcome_plus));
    j.set("reparametrized_rho", built.lambda_tilde.rho());
    report::write_file(join_path(flags.out_dir, "constructed_input.json"), j.dump());

    std::string csv = "zeta,signed_distance\n";
    for (const auto& [z, ds] : built.ds_trace)
        csv += report::format_double(z) + "," + report::format_double(ds) + "\n";
    report::write_file(join_path(flags.out_dir, "sigma_trace.csv"), csv);
    log_line("info", "construct_done", "");
    return 0;
}

int run_diagram(const Scenario& sc, const Flags& flags) {
    if (sc.sweep_constant.empty())
        throw ValidationError("diagram needs a 'sweep' section in the scenario");
    tipping::DiagramRequest req;
    req.grid = sc.sweep_grid;
    const Scenario sc_copy = sc;
    req.instantiate = [sc_copy](double p) {
        return std::pair<systems::FrozenSystem, systems::ExternalInput>(
            sc_copy.make_frozen(sc_copy.sweep_constant, p),
            sc_copy.make_input(sc_copy.sweep_constant, p));
    };
    req.sink_seed = sc.sink_seed;
    req.edge_seed = sc.edge_seed;
    req.attractor_seeds = sc.attractor_seeds;
    req.rate.r_lo = sc.r_lo;
    req.rate.r_hi = sc.r_hi;
    req.rate.tol_r = flags.tol_r.value_or(sc.tol_r);
    req.rate.alpha_override = flags.alpha ? flags.alpha : sc.overrides.alpha;
    req.rate.seed_delta = flags.seed_delta ? flags.seed_delta : sc.overrides.seed_delta;
    req.rate.t_max = sc.overrides.t_max;
    req.jobs = flags.jobs;
    auto points = tipping::tipping_diagram(req);

    std::string csv = "p,rate_index,r_lo,r_hi,r_c,verdict,outcome_below,outcome_above,error\n";
    for (const auto& pt : points) {
        if (!pt.error.empty()) {
            csv += report::format_double(pt.p) + ",,,,,,,," + "\"" + pt.error + "\"\n";
            continue;
        }
        if (pt.report.rates.empty()) {
            csv += report::format_double(pt.p) + ",,,,," +
                   tipping::verdict_name(pt.report.verdict) + ",,,\n";
            continue;
        }
        for (std::size_t k = 0; k < pt.report.rates.size(); ++k) {
            const auto& rc = pt.report.rates[k];
            csv += report::format_double(pt.p) + "," + std::to_string(k) + "," +
                   report::format_double(rc.r_lo) + "," + report::format_double(rc.r_hi) + "," +
                   report::format_double(rc.r_c()) + "," +
                   tipping::verdict_name(pt.report.verdict) + "," + rc.below.label() + "," +
                   rc.above.label() + ",\n";
        }
    }
    report::write_file(join_path(flags.out_dir, "diagram.csv"), csv);

    report::Series s;
    s.label = "r_c";
    for (const auto& pt : points) {
        if (pt.error.empty() && !pt.report.rates.empty()) {
            s.x.push_back(pt.p);
            s.y.push_back(pt.report.rates.front().r_c());
        }
    }
    report::write_file(join_path(flags.out_dir, "diagram.svg"),
                       report::svg_line_chart({s}, "critical rate over the sweep",
                                              sc.sweep_constant, "r_c"));
    log_line("info", "diagram_done", "points=" + std::to_string(points.size()));
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"rate-induced tipping analysis for nonautonomous ODE systems"};
    app.require_subcommand(1);

    Flags flags;
    std::string scenario_arg;
    double alpha_val = 0, tol_r_val = 0, seed_delta_val = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("scenario", scenario_arg, "scenario file or builtin name")->required();
        cmd->add_option("--out", flags.out_dir, "output directory");
        cmd->add_option("--jobs", flags.jobs, "sweep parallelism");
        cmd->add_flag("--expect-tipping", flags.expect_tipping,
                      "exit 4 when no tipping is found");
        cmd->add_option("--alpha", alpha_val, "compactification parameter override")
            ->each([&](const std::string&) { flags.alpha = alpha_val; });
        cmd->add_option("--tol-r", tol_r_val, "critical-rate bracket tolerance")
            ->each([&](const std::string&) { flags.tol_r = tol_r_val; });
        cmd->add_option("--seed-delta", seed_delta_val, "manifold seed offset")
            ->each([&](const std::string&) { flags.seed_delta = seed_delta_val; });
    };

    auto* c_validate = app.add_subcommand("validate", "check a scenario file");
    auto* c_track = app.add_subcommand("track", "tracking diagnostics at fixed r");
    auto* c_scan = app.add_subcommand("scan", "threshold-instability scans");
    auto* c_findrc = app.add_subcommand("find-rc", "locate critical rates");
    auto* c_classify = app.add_subcommand("classify", "critical rates plus tipping verdict");
    auto* c_construct =
        app.add_subcommand("construct-input", "build a tipping reparametrisation at fixed r");
    auto* c_diagram = app.add_subcommand("diagram", "critical-rate sweep over a constant");
    for (auto* c : {c_validate, c_track, c_scan, c_findrc, c_classify, c_construct, c_diagram})
        add_common(c);

    std::vector<std::string> rest(args.begin() + 1, args.end());
    try {
        std::reverse(rest.begin(), rest.end());
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        log_line("error", "argument_error", e.what());
        return 2;
    }

    try {
        const Scenario sc = Scenario::load(scenario_arg);
        log_line("info", "scenario_loaded", sc.name);
        if (c_validate->parsed()) return run_validate(sc, flags);
        if (c_track->parsed()) return run_track(sc, flags);
        if (c_scan->parsed()) return run_scan(sc, flags);
        if (c_findrc->parsed()) return run_find_rc(sc, flags, false);
        if (c_classify->parsed()) return run_find_rc(sc, flags, true);
        if (c_construct->parsed()) return run_construct(sc, flags);
        if (c_diagram->parsed()) return run_diagram(sc, flags);
        log_line("error", "argument_error", "no subcommand");
        return 2;
    } catch (const ValidationError& e) {
        log_line("error", "validation_error", e.what());
        return 2;
    } catch (const NumericsError& e) {
        log_line("error", "numerical_error", e.what());
        return 3;
    } catch (const Error& e) {
        log_line("error", "engine_error", e.what());
        return 3;
    } catch (const std::exception& e) {
        log_line("error", "unexpected_error", e.what());
        return 3;
    }
}

}  // namespace ratekit::cli
