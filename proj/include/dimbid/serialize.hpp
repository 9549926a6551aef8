#pragma once

#include <string>

#include <json.hpp>

#include "dimbid/controller.hpp"
#include "dimbid/landscape.hpp"
#include "dimbid/optimizer.hpp"
#include "dimbid/simulator.hpp"
#include "dimbid/types.hpp"

namespace dimbid {

// Insertion-ordered JSON keeps every document byte-stable across runs.
using Json = nlohmann::ordered_json;

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& doc);

Json to_json(const DimensionSpec& spec);
DimensionSpec dimension_spec_from_json(const Json& doc);

Json to_json(const CpmModel& model);
CpmModel cpm_model_from_json(const Json& doc);

Json to_json(const MarginalVolumeModel& model);
MarginalVolumeModel volume_model_from_json(const Json& doc);

/// Fitted landscape bundle consumed by the optimize step.
struct LandscapeDocument {
    std::vector<std::string> dimensions;
    MarginalVolumeModel volume;
    std::vector<std::vector<CpmModel>> cpm;
    double fit_objective = 0;
};

Json to_json(const LandscapeDocument& doc);
LandscapeDocument landscape_from_json(const Json& doc);

/// Per-dimension group aggregates consumed by the optimize step.
struct StatsDocument {
    struct Dimension {
        std::string name;
        std::vector<SegmentStats> groups;
        SegmentStats overflow;
    };
    std::vector<Dimension> dimensions;
    DayRange days{};
};

Json to_json(const StatsDocument& doc);
StatsDocument stats_from_json(const Json& doc);

Json to_json(const BidPlan& plan);
BidPlan bid_plan_from_json(const Json& doc);

Json to_json(const ServedPlanRecord& record);
ServedPlanRecord served_record_from_json(const Json& doc);

Json served_history_to_json(std::span<const ServedPlanRecord> served);
std::vector<ServedPlanRecord> served_history_from_json(const Json& doc);

// Environment documents may spell out every cell or carry a compact
// "generator" recipe that is expanded deterministically on load.
SimEnvironment environment_from_json(const Json& doc);
Json to_json(const SimEnvironment& env);

Json campaign_config_to_json(const CampaignConfig& config);
CampaignConfig campaign_config_from_json(const Json& doc);

Json grouping_request_to_json(const GroupingRequest& request);
GroupingRequest grouping_request_from_json(const Json& doc);

}  // namespace dimbid
