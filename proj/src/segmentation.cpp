#include "dimbid/segmentation.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "dimbid/error.hpp"

namespace dimbid {

RankMetric rank_metric_from_string(const std::string& s) {
    if (s == "rpm") return RankMetric::rpm;
    if (s == "conversion_count") return RankMetric::conversion_count;
    if (s == "order_count") return RankMetric::order_count;
    throw usage_error("unknown rank metric '" + s + "' (expected rpm, conversion_count or order_count)");
}

std::string to_string(RankMetric m) {
    switch (m) {
        case RankMetric::rpm: return "rpm";
        case RankMetric::conversion_count: return "conversion_count";
        case RankMetric::order_count: return "order_count";
    }
    return "rpm";
}

namespace {

struct ValueStats {
    std::int64_t volume = 0;
    Micros revenue_micros = 0;
    std::int64_t conversions = 0;
};

double metric_of(const ValueStats& v, RankMetric m) {
    switch (m) {
        case RankMetric::rpm:
            return static_cast<double>(v.revenue_micros) / 1000.0 / static_cast<double>(v.volume);
        case RankMetric::conversion_count:
        case RankMetric::order_count:
            // The log carries one conversion flag per impression, so order and
            // conversion counts coincide under this schema.
            return static_cast<double>(v.conversions);
    }
    return 0.0;
}

}  // namespace

GroupingOutcome build_groups(const ImpressionLog& log, const GroupingRequest& request,
                             DayRange days) {
    if (request.group_count < 1) throw usage_error("build_groups: group_count must be >= 1");
    int col = log.feature_index(request.dimension);
    if (col < 0) throw data_error("build_groups: log has no feature column '" + request.dimension + "'");

    // Accumulate per raw value (prefix-truncated when requested).
    std::map<std::string, ValueStats> by_value;
    std::int64_t total_volume = 0;
    std::int64_t total_orders = 0;
    for (const auto& r : log.records) {
        if (!days.contains(r.day)) continue;
        const std::string& raw = r.features[static_cast<std::size_t>(col)];
        std::string key = (request.value_prefix_len > 0 &&
                           raw.size() > static_cast<std::size_t>(request.value_prefix_len))
                              ? raw.substr(0, static_cast<std::size_t>(request.value_prefix_len))
                              : raw;
        auto& v = by_value[key];
        v.volume += 1;
        v.revenue_micros += r.revenue_micros;
        v.conversions += r.converted ? 1 : 0;
        total_volume += 1;
        total_orders += r.converted ? 1 : 0;
    }
    if (by_value.empty()) throw data_error("build_groups: no records in the requested day range");
    if (static_cast<int>(by_value.size()) < request.group_count)
        throw data_error("build_groups: only " + std::to_string(by_value.size()) +
                         " distinct values for dimension '" + request.dimension +
                         "'; reduce group_count (requested " + std::to_string(request.group_count) + ")");

    GroupingOutcome out;
    if (total_orders < request.min_order_threshold) {
        out.warnings.push_back("not ready: " + std::to_string(total_orders) + " orders < threshold " +
                               std::to_string(request.min_order_threshold));
        return out;
    }
    if (total_volume < request.min_volume_threshold * request.group_count)
        out.warnings.push_back("volume " + std::to_string(total_volume) + " below " +
                               std::to_string(request.min_volume_threshold) + " per prospective group");

    struct Ranked {
        const std::string* value;
        const ValueStats* stats;
        double metric;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(by_value.size());
    for (const auto& [value, stats] : by_value)
        ranked.push_back({&value, &stats, metric_of(stats, request.rank_metric)});
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.metric != b.metric) return a.metric < b.metric;
        if (a.stats->volume != b.stats->volume) return a.stats->volume > b.stats->volume;
        return *a.value < *b.value;
    });

    // Sweep values in metric order; close a group once it holds its equal
    // share of volume. Later groups are never starved: when the remaining
    // values are exactly enough to keep every remaining group non-empty, the
    // sweep advances regardless of volume.
    const double target = static_cast<double>(total_volume) / request.group_count;
    DimensionSpec spec;
    spec.name = request.dimension;
    spec.group_count = request.group_count;
    spec.value_prefix_len = request.value_prefix_len;
    int group = 0;
    std::int64_t group_volume = 0;
    const int n = static_cast<int>(ranked.size());
    for (int idx = 0; idx < n; ++idx) {
        if (group < request.group_count - 1) {
            const int values_left = n - idx;
            const int groups_after = request.group_count - 1 - group;
            const bool group_full = static_cast<double>(group_volume) >= target;
            if ((group_full && values_left > groups_after) || values_left == groups_after) {
                ++group;
                group_volume = 0;
            }
        }
        spec.group_of[*ranked[static_cast<std::size_t>(idx)].value] = group;
        group_volume += ranked[static_cast<std::size_t>(idx)].stats->volume;
    }
    out.spec = std::move(spec);
    return out;
}

GroupingOutcome build_groups(const ImpressionLog& log, const GroupingRequest& request) {
    return build_groups(log, request, DayRange{0, std::numeric_limits<int>::max()});
}

std::optional<DimensionSpec> rebuild_schedule(const ImpressionLog& log,
                                              const GroupingRequest& request, int campaign_day) {
    if (campaign_day < request.warmup_days) return std::nullopt;

    std::int64_t volume = 0, orders = 0;
    for (const auto& r : log.records) {
        if (r.day >= campaign_day) continue;
        volume += 1;
        orders += r.converted ? 1 : 0;
    }
    if (volume < request.min_volume_threshold * request.group_count) return std::nullopt;
    if (orders < request.min_order_threshold) return std::nullopt;

    try {
        return build_groups(log, request, DayRange{0, campaign_day - 1}).spec;
    } catch (const Error&) {
        return std::nullopt;  // e.g. too few distinct values so far
    }
}

const std::optional<DimensionSpec>& SegmentationScheduler::on_day(const ImpressionLog& log,
                                                                  int campaign_day) {
    if (!frozen_) frozen_ = rebuild_schedule(log, request_, campaign_day);
    return frozen_;
}

}  // namespace dimbid
