#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dimbid/landscape.hpp"
#include "dimbid/optimizer.hpp"
#include "dimbid/segmentation.hpp"
#include "dimbid/simulator.hpp"

namespace dimbid {

// Control arm: base bid only, no dimensional adjustments.
Controller make_uniform_controller(double base_bid);

// Serves a fixed decision for the whole flight.
Controller make_fixed_controller(ControllerDecision decision);

struct PipelineControllerConfig {
    CampaignConfig campaign;
    std::vector<GroupingRequest> segmentation;  // one per dimension to bid on
    SolverOptions solver;
    MarginalFitOptions volume_fit;
    double exploration_amplitude = 0.25;  // factor jitter while the volume model is unidentified
};

/// The full optimization loop: collect during the warmup week, freeze groups
/// once thresholds are met, then refit the landscape and re-optimize the bid
/// factors at every adjustment. While the volume model is rank-deficient the
/// controller serves deliberately perturbed factors to generate identification
/// data.
Controller make_pipeline_controller(PipelineControllerConfig config, std::uint64_t seed);

/// Diagnostics of the last landscape fit + optimization, exposed for reports.
struct PipelineDiagnostics {
    int decisions = 0;
    int explorations = 0;       // decisions served as perturbation plans
    int optimizations = 0;      // decisions produced by the solver
    int fallbacks = 0;          // solver failures answered with the previous plan
    double last_fit_objective = 0;
    double last_predicted_revenue = 0;
    double last_predicted_spend = 0;
};

Controller make_pipeline_controller(PipelineControllerConfig config, std::uint64_t seed,
                                    std::shared_ptr<PipelineDiagnostics> diagnostics);

}  // namespace dimbid
