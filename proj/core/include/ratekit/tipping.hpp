#pragma once

#include <optional>
#include <string>

#include "ratekit/compact.hpp"
#include "ratekit/equilibria.hpp"
#include "ratekit/manifolds.hpp"
#include "ratekit/systems.hpp"

namespace ratekit::tipping {

using equilibria::Branch;
using equilibria::EquilibriumRecord;
using manifolds::AttractorCatalogue;
using manifolds::OmegaOutcome;
using numcore::Vec;
using systems::ExternalInput;
using systems::FrozenSystem;

inline constexpr double kSHand = 1.0 - 1e-6;      // handover to the future limit
inline constexpr double kEtaCapture = 1e-2;       // edge-state identification ball
inline constexpr double kConnectTol = 1e-6;       // sigma-construction target
inline constexpr double kIdenticalTailTol = 1e-4; // Hausdorff bound for "same tail"
inline constexpr int kCoarseRatePoints = 64;

/// Start of a trajectory when not anchored at the past sink.
struct StartPoint {
    Vec x0;
    double tau0 = 0.0;
};

/// Either the pullback attractor of the past sink or a direct run from a
/// fixed initial state.
struct TrajectorySource {
    std::optional<EquilibriumRecord> e_minus;
    std::optional<StartPoint> point;

    static TrajectorySource from_past_sink(EquilibriumRecord e) {
        TrajectorySource s;
        s.e_minus = std::move(e);
        return s;
    }
    static TrajectorySource from_point(Vec x0, double tau0) {
        TrajectorySource s;
        s.point = StartPoint{std::move(x0), tau0};
        return s;
    }
};

// ---------------------------------------------------------------------------
// tracking
// ---------------------------------------------------------------------------

struct TrackingReport {
    double r = 0, delta = 0;
    double interval_lo = 0, interval_hi = 0;  // sampled part of I
    double sup_deviation = 0;
    double sup_deviation_tau = 0;  // where the sup was attained
    OmegaOutcome end_outcome;
    bool delta_close = false;
    bool end_point = false;
};

struct TrackingOptions {
    std::optional<double> alpha_override;
    std::optional<double> seed_delta;
    double t_max = manifolds::kDefaultTMax;
};

/// Deviation of the rate-r solution from the moving sink over the branch
/// grid, plus the endpoint classification. The solution starts from the past
/// sink (pullback attractor) unless `start` is given.
TrackingReport check_tracking(const FrozenSystem& frozen, const ExternalInput& input,
                              const Branch& sink_branch, double r, double delta,
                              const std::optional<StartPoint>& start,
                              const AttractorCatalogue& catalogue,
                              const TrackingOptions& opts = {});


// ---------------------------------------------------------------------------
// threshold-instability scans
// ---------------------------------------------------------------------------

struct ScanPair {
    double a = 0, b = 0;  // path parameters (or tau values) straddling a zero
};

struct InstabilityScan {
    bool forward = false;         // (tau1, tau2) grid instead of P x P
    std::vector<double> grid1, grid2;
    std::vector<double> values;   // row-major [i * grid2.size() + j]
    std::vector<ScanPair> sign_changes;
    bool unstable = false;
    bool basin_unstable = false;

    double value(std::size_t i, std::size_t j) const { return values[i * grid2.size() + j]; }
    std::string to_csv() const;
};

struct ScanOptions {
    int m = 41;                  // grid resolution per axis
    double arclength = 2.0;      // threshold extent for planar systems
    double side_offset = 1e-2;   // probe offset for the basin-instability test
};

/// d_s(e(lambda_1), theta(lambda_2)) over the path-parameter grid.
InstabilityScan scan_threshold_instability(const FrozenSystem& frozen, const Branch& sink_branch,
                                           const Branch& edge_branch,
                                           const AttractorCatalogue& catalogue,
                                           const ScanOptions& opts = {});

/// Delta(tau_1, tau_2) = d_s(e(Lambda(tau_1)), theta(Lambda(tau_2))) on the
/// triangular grid tau_1 < tau_2.
InstabilityScan scan_forward_threshold_instability(const FrozenSystem& frozen,
                                                   const ExternalInput& input,
                                                   const Branch& sink_branch,
                                                   const Branch& edge_branch,
                                                   const AttractorCatalogue& catalogue,
                                                   const ScanOptions& opts = {});

// ---------------------------------------------------------------------------
// critical rates and classification
// ---------------------------------------------------------------------------

struct CriticalRate {
    double r_lo = 0, r_hi = 0;  // final bracket, width <= tol_r
    OmegaOutcome below, above;
    int below_side = 0, above_side = 0;  // side of the frozen threshold at handover
    double min_dist_eta_below = std::numeric_limits<double>::infinity();
    double min_dist_eta_above = std::numeric_limits<double>::infinity();
    bool unresolved_refinement = false;

    double r_c() const { return 0.5 * (r_lo + r_hi); }
};

/// Future-limit frozen threshold theta+ = W^s(eta+). In the autonomous phase
/// past the handover this manifold is exactly invariant, so the sign of the
/// minimum signed distance along the continuation decides the side of the
/// connection without proxy bias.
struct SideOracle {
    manifolds::ManifoldSample theta_plus;
};

SideOracle prepare_side_oracle(const FrozenSystem& frozen, const ExternalInput& input,
                               const Branch& edge_branch, double arclength = 2.0, int m = 41);

enum class Verdict { Reversible, Irreversible, Degenerate, NoTippingFound };

std::string verdict_name(Verdict v);

struct TippingReport {
    std::vector<CriticalRate> rates;
    Verdict verdict = Verdict::NoTippingFound;
    std::string degenerate_reason;
    std::optional<EquilibriumRecord> eta_plus;
    std::optional<manifolds::EdgeTail> upper_tail, lower_tail;
};

struct RateSearchOptions {
    double r_lo = 1e-3, r_hi = 1e3;
    double tol_r = 1e-6;
    int coarse_points = kCoarseRatePoints;
    double s_hand = kSHand;
    std::optional<double> alpha_override;
    std::optional<double> seed_delta;
    double t_max = manifolds::kDefaultTMax;
    /// Moving-threshold side oracle. Without it, reversible transitions
    /// (same attractor on both sides of r_c) are invisible to the outcome
    /// comparison.
    std::optional<SideOracle> side_oracle;
};

/// Outcome plus the side-of-threshold signal: the sign of the minimum signed
/// distance between the trajectory and the moving frozen threshold, taken
/// over the whole run and its future-system continuation. It changes sign
/// exactly when the orbit crosses the threshold, which survives excursions
/// that later return to the same attractor.
struct RateClassification {
    OmegaOutcome outcome;
    int side = 0;            // sign of min d_s; 0 when no sample fell in the tube
    double min_ds = std::numeric_limits<double>::infinity();  // over the autonomous phase

    bool same_as(const RateClassification& o) const {
        if (!outcome.same_as(o.outcome)) return false;
        if (side == 0 || o.side == 0) return true;  // unknown sides never bracket
        return side == o.side;
    }
};

/// Omega-limit outcome of the rate-r solution: compactified run to the
/// handover time, then classification in the future limit system. `probe`
/// (when non-empty) accumulates the minimum distance along the whole run.
OmegaOutcome rate_outcome(const FrozenSystem& frozen, const ExternalInput& input, double r,
                          const TrajectorySource& source, const AttractorCatalogue& catalogue,
                          const RateSearchOptions& opts, const Vec& probe = {});

RateClassification rate_classification(const FrozenSystem& frozen, const ExternalInput& input,
                                       double r, const TrajectorySource& source,
                                       const AttractorCatalogue& catalogue,
                                       const RateSearchOptions& opts, const Vec& probe = {});

/// Bisection (per outcome change) for critical rates. When the outcomes at
/// r_lo and r_hi agree, a geometric coarse scan locates brackets first;
/// an empty rate list means NoTippingFound.
TippingReport find_critical_rate(const FrozenSystem& frozen, const ExternalInput& input,
                                 const TrajectorySource& source,
                                 const AttractorCatalogue& catalogue,
                                 const RateSearchOptions& opts = {});

/// Identifies the edge state shadowed by the near-critical trajectory
/// (maximal dwell within kEtaCapture among the candidates), computes the edge
/// tails, labels them by matching the bracket sides, and fills the verdict.
void classify_tipping(const FrozenSystem& frozen, const ExternalInput& input,
                      const TrajectorySource& source, const AttractorCatalogue& catalogue,
                      const std::vector<EquilibriumRecord>& saddle_candidates,
                      const RateSearchOptions& opts, TippingReport& report);

// ---------------------------------------------------------------------------
// constructive reparametrisation (sigma family)
// ---------------------------------------------------------------------------

struct ConstructControls {
    double delta_target = 0.0;       // 0 = half the attainable |Delta| over N
    double connect_tol = kConnectTol;
    double neighbourhood = 0.0;      // half-width in tau; 0 = 1/rho
    double eps_initial = 0.0;        // 0 = automatic
    double eps_floor = 1e-4;
    int trace_limit = 200;
    std::optional<ScanPair> pair;    // override the scan-pair choice
};

struct ConstructedInput {
    ExternalInput lambda_tilde;
    double tau_alpha = 0, tau_beta = 0, eps = 0;
    double delta_target = 0;
    std::vector<std::array<double, 2>> ds_trace;  // (zeta, signed distance)
    OmegaOutcome outcome_minus, outcome_plus;     // segment-end outcomes
    double min_dist_eta = std::numeric_limits<double>::infinity();

    ConstructedInput(ExternalInput in) : lambda_tilde(std::move(in)) {}
};

/// Builds a time-reparametrised input Lambda(sigma(tau)) that tips at the
/// fixed rate r_star, by intermediate-value bisection between a pair of
/// sigma parameters whose signed distances have opposite signs. Requires a
/// forward-threshold-unstable scan.
ConstructedInput construct_tipping_input(const FrozenSystem& frozen, const ExternalInput& input,
                                         const Branch& sink_branch, const Branch& edge_branch,
                                         double r_star, const InstabilityScan& scan,
                                         const AttractorCatalogue& catalogue,
                                         const ConstructControls& controls = {});

// ---------------------------------------------------------------------------
// sweep diagrams
// ---------------------------------------------------------------------------

struct DiagramPoint {
    double p = 0;
    TippingReport report;
    std::string error;  // per-point failure, sweep continues
};

struct DiagramRequest {
    std::vector<double> grid;
    /// Re-instantiates the scenario at a grid value (so swept constants can
    /// move input limits consistently).
    std::function<std::pair<FrozenSystem, ExternalInput>(double)> instantiate;
    Vec sink_seed;
    Vec edge_seed;
    std::vector<Vec> attractor_seeds;
    RateSearchOptions rate;
    int jobs = 1;
    bool classify = true;
};

std::vector<DiagramPoint> tipping_diagram(const DiagramRequest& req);

/// Catalogue assembly shared by the CLI and the diagram sweep: the moving
/// sink's future limit plus any extra attractor seeds, newtoned at lambda+.
AttractorCatalogue build_catalogue(const FrozenSystem& frozen, const ExternalInput& input,
                                   const Branch& sink_branch,
                                   const std::vector<Vec>& attractor_seeds,
                                   double eps_cap = manifolds::kDefaultEpsCap);

}  // namespace ratekit::tipping
