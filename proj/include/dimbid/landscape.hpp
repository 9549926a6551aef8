#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dimbid/types.hpp"

namespace dimbid {

/// CPM as an affine function of a group's own factor. The slope is clamped to
/// >= 0: cost per impression cannot fall when the bid rises.
struct CpmModel {
    double intercept = 0.0;
    double slope = 0.0;
};

struct CpmObservation {
    double factor = 1.0;
    double cpm = 0.0;     // currency per mille
    double weight = 1.0;  // typically the observed volume
};

struct CpmFit {
    CpmModel model;
    double rss = 0.0;  // weighted residual sum of squares
    std::size_t points = 0;
};

CpmFit fit_cpm(std::span<const CpmObservation> observations);

inline double predict_cpm(const CpmModel& m, double factor) {
    return m.intercept + m.slope * factor;
}

/// Volume linear in the factor, one coefficient per disjoint segment.
struct LinearVolumeModel {
    std::vector<double> betas;  // >= 0
};

// Least squares through the origin per segment, clamped to >= 0.
LinearVolumeModel fit_volume_linear(std::span<const std::vector<double>> factors_per_day,
                                    std::span<const std::vector<double>> volumes_per_day);

/// Interactive volume model over overlapping dimensions: the volume of group i
/// of dimension k is an intercept plus its own beta-weighted factor times the
/// product of the beta-weighted factor sums of the other dimensions.
///
/// A dimension whose betas are all zero contributes nothing to the other
/// dimensions' products (it behaves as if omitted from the model).
struct MarginalVolumeModel {
    std::vector<double> intercepts;          // a^k, one per dimension
    std::vector<std::vector<double>> betas;  // [dimension][group], >= 0

    int dimension_count() const { return static_cast<int>(betas.size()); }
};

// n[k][i] for every group of every dimension under the given plan.
std::vector<std::vector<double>> predict_volume_marginal(const MarginalVolumeModel& model,
                                                         const BidPlan& plan);

struct PlanVolumeObservation {
    BidPlan plan;
    std::vector<std::vector<double>> volumes;  // [dimension][group]
};

struct MarginalFitOptions {
    std::uint64_t seed = 0;
    int starts = 8;
    int max_iterations = 10000;
    double tolerance = 1e-10;  // stop when the relative objective change drops below this
};

struct MarginalFitResult {
    MarginalVolumeModel model;
    double objective = 0.0;  // final sum of squared errors
    int best_start = 0;
    int iterations = 0;  // iterations used by the best start
};

// Least-squares fit of the marginal model by multi-start projected gradient
// descent. Betas stay non-negative; for identifiability the betas of every
// dimension after the first are normalized onto the unit simplex. Intercepts
// are kept >= 0 (volumes are counts).
MarginalFitResult fit_volume_marginal(std::span<const PlanVolumeObservation> history,
                                      const MarginalFitOptions& options = {});

// Objective and gradient of the fit, exposed for verification. The gradient
// is with respect to the packed parameter vector [a^0..a^{K-1}, betas...].
double marginal_fit_objective(const MarginalVolumeModel& model,
                              std::span<const PlanVolumeObservation> history);
std::vector<double> marginal_fit_gradient(const MarginalVolumeModel& model,
                                          std::span<const PlanVolumeObservation> history);

}  // namespace dimbid
