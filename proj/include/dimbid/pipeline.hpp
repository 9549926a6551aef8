#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dimbid/controller.hpp"
#include "dimbid/evaluation.hpp"
#include "dimbid/serialize.hpp"
#include "dimbid/simulator.hpp"

namespace dimbid {

// Factor/volume observations per day plus per-group CPM observations,
// reconstructed from a log and the served plan history. Days served without
// dimensional factors count as factor 1 for every group.
std::vector<PlanVolumeObservation> collect_plan_volume_history(
    const ImpressionLog& log, std::span<const DimensionSpec> specs,
    std::span<const ServedPlanRecord> served, DayRange days, double base_bid,
    std::vector<std::vector<std::vector<CpmObservation>>>* cpm_observations = nullptr);

// Fits the CPM lines and the marginal volume model from a log + plan history.
LandscapeDocument fit_landscape(const ImpressionLog& log, std::span<const DimensionSpec> specs,
                                std::span<const ServedPlanRecord> served, DayRange days,
                                double base_bid, const MarginalFitOptions& options);

StatsDocument collect_stats(const ImpressionLog& log, std::span<const DimensionSpec> specs,
                            DayRange days);

// Builds and solves the overlapping instance for a daily budget given in
// currency. Returns the plan document with predictions and diagnostics.
Json optimize_document(const LandscapeDocument& model, const StatsDocument& stats,
                       double daily_budget, double base_bid, FactorBounds bounds,
                       const SolverOptions& solver);

/// Everything `experiment` needs, parsed from one config file.
struct ExperimentConfig {
    SimEnvironment env;
    CampaignConfig campaign;
    std::vector<GroupingRequest> segmentation;
    SolverOptions solver;
    MarginalFitOptions volume_fit;
    double exploration_amplitude = 0.25;
    int replications = 1;
    DistanceConfig distance;
};

ExperimentConfig experiment_config_from_json(const Json& doc);

AbReport run_experiment(const ExperimentConfig& config, std::uint64_t seed);

// summary.txt, summary.json, replications.csv, sample logs, plan history and
// per-dimension rpm-curve/WOE plot data under out_dir.
void write_experiment_outputs(const std::string& out_dir, const AbReport& report,
                              const ExperimentConfig& config);

struct ReportOutcome {
    bool no_data = false;
    std::vector<std::string> files;  // manifest of written artifacts
    std::optional<double> volume_correlation;
};

// Renders WOE bars, accumulative RPM curves and the predicted-vs-observed
// volume scatter from a log + plan history directory.
ReportOutcome write_report(const std::string& in_dir, const std::string& out_dir,
                           const DistanceConfig& distance, const MarginalFitOptions& fit_options);

}  // namespace dimbid
