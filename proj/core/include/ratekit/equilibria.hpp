#pragma once

#include <functional>
#include <optional>
#include <string>

#include "ratekit/numcore.hpp"
#include "ratekit/systems.hpp"

namespace ratekit::equilibria {

using numcore::EigenDecomposition;
using numcore::Mat;
using numcore::Vec;
using systems::ExternalInput;
using systems::FrozenSystem;
using systems::ParameterPath;

inline constexpr double kHyperbolicityTol = 1e-6;
inline constexpr double kFoldTol = 1e-8;

enum class StabilityClass { Sink, Saddle, Source, NonHyperbolic };

std::string class_name(StabilityClass c, int unstable_count);

/// Equilibrium of the frozen system together with the eigen-data of
/// df/dx and its stability class.
struct EquilibriumRecord {
    Vec x;
    Vec lambda;
    EigenDecomposition eigen;
    StabilityClass cls = StabilityClass::NonHyperbolic;
    int unstable_count = 0;

    /// Hyperbolic with exactly one unstable direction: the saddles (and the
    /// 1-D sources) this engine admits as edge states.
    bool is_edge_candidate() const {
        return cls != StabilityClass::NonHyperbolic && unstable_count == 1;
    }
    bool is_sink() const { return cls == StabilityClass::Sink; }
    /// Leading (largest real part) eigenvalue.
    numcore::Complex leading_eigenvalue() const { return eigen.values.front(); }
};

StabilityClass classify(const EigenDecomposition& eigen, int& unstable_count,
                        double tol = kHyperbolicityTol);

/// Newton from `guess` at fixed lambda, then eigen classification.
/// NonHyperbolic results are flagged, not errors.
EquilibriumRecord find_equilibrium(const FrozenSystem& frozen, const Vec& lambda,
                                   const Vec& guess);

/// Newton polish without throwing; empty when it fails.
std::optional<EquilibriumRecord> try_find_equilibrium(const FrozenSystem& frozen,
                                                      const Vec& lambda, const Vec& guess);

enum class BranchEnd { PathEnd, Fold, ClassChange, NewtonFailure, LimitAttached };

struct ContinuationControl {
    double initial_step = 1e-2;   // in the path parameter
    double min_step = 1e-10;
    double max_step = 0.1;
    double max_dx = 0.5;          // reject steps moving x further than this
    int grid_hint = 81;           // resolution for moving equilibria
};

/// Ordered equilibria along a path parameter (u for explicit curves, tau for
/// input paths). Endpoints are annotated; a fold is located to kFoldTol by
/// bisection on Newton success.
struct Branch {
    std::vector<double> param;              // strictly increasing; +-inf allowed at ends
    std::vector<EquilibriumRecord> records;
    BranchEnd begin_end = BranchEnd::PathEnd;
    BranchEnd end_end = BranchEnd::PathEnd;
    double fold_param = std::numeric_limits<double>::quiet_NaN();
    std::function<Vec(double)> lambda_of_param;  // path parametrisation

    double param_lo() const { return param.front(); }
    double param_hi() const { return param.back(); }
    const EquilibriumRecord& front() const { return records.front(); }
    const EquilibriumRecord& back() const { return records.back(); }
    std::size_t size() const { return records.size(); }

    /// Record at an arbitrary finite parameter: linear interpolation between
    /// the bracketing records polished by Newton at the exact lambda.
    EquilibriumRecord at(const FrozenSystem& frozen, double p) const;

    /// CSV export: u_or_tau, lam1.., x1.., re_eig1.., class.
    std::string to_csv() const;
};

/// Predictor-corrector natural continuation from `seed` along `path`
/// (parameter u in [0,1] for explicit curves, tau in [tau_lo, tau_hi] for
/// input paths, finite part). Stops at the path end, at a fold, or at a
/// class change.
Branch continue_branch(const FrozenSystem& frozen, const EquilibriumRecord& seed,
                       const ParameterPath& path, const ContinuationControl& ctrl = {});

/// Branch of e(Lambda(tau)) over a tau grid clustered toward +-infinity.
/// When the branch reaches the grid ends, the limit-system equilibria are
/// attached at tau = +-infinity.
Branch moving_equilibrium(const FrozenSystem& frozen, const ExternalInput& input,
                          const EquilibriumRecord& seed, const ContinuationControl& ctrl = {});

}  // namespace ratekit::equilibria
