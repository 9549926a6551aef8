#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dimbid/types.hpp"

namespace dimbid {

enum class RankMetric { rpm, conversion_count, order_count };

RankMetric rank_metric_from_string(const std::string& s);
std::string to_string(RankMetric m);

struct GroupingRequest {
    std::string dimension;
    int group_count = 1;
    RankMetric rank_metric = RankMetric::rpm;
    std::int64_t min_volume_threshold = 1000;  // impressions per prospective group
    std::int64_t min_order_threshold = 10;     // orders total
    int value_prefix_len = 0;                  // >0 groups values by their first p chars
    int warmup_days = 7;                       // earliest day rebuild_schedule may emit
};

struct GroupingOutcome {
    std::optional<DimensionSpec> spec;  // empty when the activation gate is not met
    std::vector<std::string> warnings;

    bool ready() const { return spec.has_value(); }
};

// Equal-volume sweep over values ranked ascending by the request metric.
// Ties break by volume descending, then lexicographic raw value. Total orders
// below min_order_threshold yields a not-ready outcome (no spec); volume below
// min_volume_threshold * group_count only warns.
GroupingOutcome build_groups(const ImpressionLog& log, const GroupingRequest& request,
                             DayRange days);
GroupingOutcome build_groups(const ImpressionLog& log, const GroupingRequest& request);

// Gated variant used by the campaign loop: emits a spec built on days
// 0..campaign_day-1 once campaign_day >= warmup_days and both thresholds are
// met, otherwise nothing.
std::optional<DimensionSpec> rebuild_schedule(const ImpressionLog& log,
                                              const GroupingRequest& request, int campaign_day);

// Holds the flight-frozen spec: the first spec emitted by rebuild_schedule is
// returned unchanged for the rest of the flight.
class SegmentationScheduler {
public:
    explicit SegmentationScheduler(GroupingRequest request) : request_(std::move(request)) {}

    const std::optional<DimensionSpec>& on_day(const ImpressionLog& log, int campaign_day);
    const std::optional<DimensionSpec>& frozen() const { return frozen_; }

private:
    GroupingRequest request_;
    std::optional<DimensionSpec> frozen_;
};

}  // namespace dimbid
