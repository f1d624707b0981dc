#pragma once

#include "ratekit/compact.hpp"
#include "ratekit/equilibria.hpp"
#include "ratekit/numcore.hpp"
#include "ratekit/systems.hpp"

namespace ratekit::manifolds {

using compact::CompactifiedSystem;
using equilibria::EquilibriumRecord;
using numcore::Trajectory;
using numcore::Vec;
using systems::FrozenSystem;

inline constexpr double kSeedDeltaMin = 1e-8;
inline constexpr double kSeedDeltaMax = 1e-3;
inline constexpr double kDefaultEpsCap = 1e-3;
inline constexpr double kDefaultTMax = 1e4;

/// Default manifold seed offset: 1e-6 (1 + ||equilibrium||).
double default_seed_delta(const Vec& equilibrium);

enum class ManifoldKind {
    UnstableOfPastSink,
    StableOfEdgeState,
    EdgeTailUpper,
    EdgeTailLower,
    FrozenThreshold,
};

/// Sampled invariant-manifold piece. Threshold samples carry an orientation
/// (per-point unit normals); n >= 3 thresholds degrade to the local-linear
/// representation (tangent hyperplane at the edge state).
struct ManifoldSample {
    ManifoldKind kind = ManifoldKind::FrozenThreshold;
    std::vector<Vec> points;       // (x) or (x, s)
    std::vector<double> times;     // tau (or t) per point, when meaningful
    std::vector<Vec> normals;      // thresholds only; unit vectors, one per point
    double delta = 0.0;            // seed offset used
    Vec owner;                     // owning equilibrium (x part)
    bool local_linear = false;     // n >= 3 fallback: plane through owner
    double validity_radius = 0.0;  // local-linear estimate
    int state_dim = 0;

    /// CSV export: kind, branch label, tau_or_t, coordinates.
    std::string to_csv(const std::string& branch_label = "na") const;

    /// Flip the orientation field (negates every signed distance).
    ManifoldSample flipped() const;
};

/// Unstable manifold of the lifted past sink (e-, -1): the local pullback
/// attractor. Seeds at distance delta along the unstable eigenvector of the
/// lifted Jacobian (sign chosen so s increases) and integrates until
/// s >= s_stop or blowup. Points are (x, s); times are tau = h_alpha(s).
struct PullbackResult {
    ManifoldSample sample;
    Trajectory traj;  // in compactified time tau
    bool blew_up = false;
};
PullbackResult pullback_attractor(const CompactifiedSystem& cs,
                                  const EquilibriumRecord& e_minus, double delta,
                                  double s_stop,
                                  const numcore::IntegrateOptions& opts = {});

/// Frozen-system threshold through a regular edge state: the point itself for
/// n=1, the sampled stable manifold (backward integration to the requested
/// arclength per side) for n=2, the oriented tangent hyperplane for n>=3.
ManifoldSample frozen_threshold(const FrozenSystem& frozen, const Vec& lambda,
                                const EquilibriumRecord& edge, double arclength);

/// Signed distance to an oriented threshold sample: magnitude from segment
/// projection, sign from the local normal, +infinity outside the sampled
/// tubular neighbourhood.
double signed_distance(const Vec& x, const ManifoldSample& threshold);

/// Sign-only side indicator without the tubular-neighbourhood sentinel:
/// outside the sampled piece the nearest vertex normal decides. Used as a
/// total orientation oracle; distances remain the job of signed_distance.
int signed_side(const Vec& x, const ManifoldSample& threshold);

/// Symmetric Hausdorff distance over finite samples.
double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

// ---------------------------------------------------------------------------
// omega-limit classification
// ---------------------------------------------------------------------------

struct CatalogueEntry {
    EquilibriumRecord sink;
    double eps_cap = kDefaultEpsCap;
    double t_dwell = 0.0;  // 0 = derive from the leading eigenvalue (20/|Re l1|)
};

/// Equilibrium attractors of the future limit system with capture radii.
/// Balls must be pairwise disjoint and every sink hyperbolic.
struct AttractorCatalogue {
    std::vector<CatalogueEntry> entries;

    void add(EquilibriumRecord sink, double eps_cap = kDefaultEpsCap);
    void validate() const;
    double dwell_time(int index) const;
    int size() const { return static_cast<int>(entries.size()); }
};

struct OmegaOutcome {
    enum class Kind { Attractor, Divergent, Unresolved };
    Kind kind = Kind::Unresolved;
    int attractor = -1;
    double capture_time = std::numeric_limits<double>::quiet_NaN();
    bool recurrence_hint = false;  // returned near an earlier point uncaptured
    double min_dist_to_probe = std::numeric_limits<double>::infinity();

    bool is_attractor() const { return kind == Kind::Attractor; }
    bool same_as(const OmegaOutcome& o) const {
        return kind == o.kind && (kind != Kind::Attractor || attractor == o.attractor);
    }
    std::string label() const;
};

struct ClassifyOptions {
    double t_max = kDefaultTMax;
    Vec probe;  // when non-empty, records the minimum distance to this point
    numcore::IntegrateOptions integrate;
};

/// Integrates the frozen future system from x0 until a catalogue ball is
/// entered and held for the dwell time, the norm blows up (Divergent), or
/// t_max passes (Unresolved, with a recurrence hint when the trajectory
/// revisits an earlier point without capture).
OmegaOutcome classify_omega_limit(const FrozenSystem& future, const Vec& lambda_plus,
                                  const Vec& x0, const AttractorCatalogue& catalogue,
                                  const ClassifyOptions& opts = {});

// ---------------------------------------------------------------------------
// edge tails
// ---------------------------------------------------------------------------

struct EdgeTail {
    ManifoldSample sample;
    OmegaOutcome outcome;
};

/// The two branches of the unstable manifold of eta+ in the future limit
/// system, integrated until captured, divergent, or T_max. The labels
/// plus/minus refer to the seed side along the unstable eigenvector; the
/// upper/lower naming happens during tipping classification.
struct EdgeTails {
    EdgeTail plus, minus;
};
EdgeTails edge_tails(const FrozenSystem& future, const Vec& lambda_plus,
                     const EquilibriumRecord& eta_plus, const AttractorCatalogue& catalogue,
                     double delta, double t_max = kDefaultTMax);

/// Section of the rate-dependent threshold at a fixed tau: the x-slice of the
/// stable manifold of the lifted edge state. Explicit geometry for n = 1
/// (single point) and n = 2 (curve traced by a fan of seeds in the stable
/// eigenplane); arclength limits the n = 2 extent per side.
ManifoldSample threshold_section(const CompactifiedSystem& cs,
                                 const EquilibriumRecord& eta_plus, double tau,
                                 double arclength, int fan_count = 33);

}  // namespace ratekit::manifolds
