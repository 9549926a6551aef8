#include "dimbid/aggregate.hpp"

#include "dimbid/error.hpp"

namespace dimbid {

AggregateResult aggregate(const ImpressionLog& log, const DimensionSpec& spec, DayRange days,
                          bool strict) {
    if (days.empty()) throw data_error("aggregate: empty day range");
    int col = log.feature_index(spec.name);
    if (col < 0) throw data_error("aggregate: log has no feature column '" + spec.name + "'");

    AggregateResult res;
    res.groups.resize(static_cast<std::size_t>(spec.group_count));
    for (const auto& r : log.records) {
        if (!days.contains(r.day)) continue;
        const std::string& raw = r.features[static_cast<std::size_t>(col)];
        int g = spec.group_for(raw);
        if (g == spec.overflow_group()) {
            if (strict)
                throw data_error("aggregate: value '" + raw + "' of dimension '" + spec.name +
                                 "' is not mapped by the spec");
            res.overflow.add(r);
        } else {
            res.groups[static_cast<std::size_t>(g)].add(r);
        }
    }
    return res;
}

RpmSeries accumulative_rpm_series(const ImpressionLog& log, const DimensionSpec& spec, int group,
                                  int horizon) {
    if (horizon < 1) throw data_error("accumulative_rpm_series: horizon must be >= 1");
    if (group < 0 || group > spec.overflow_group())
        throw data_error("accumulative_rpm_series: unknown group index " +
                         std::to_string(group) + " for dimension '" + spec.name + "'");
    int col = log.feature_index(spec.name);
    if (col < 0) throw data_error("accumulative_rpm_series: log has no feature column '" + spec.name + "'");

    // Per-day volume and revenue for the group, then a cumulative sweep.
    std::vector<std::int64_t> day_volume(static_cast<std::size_t>(horizon), 0);
    std::vector<Micros> day_revenue(static_cast<std::size_t>(horizon), 0);
    for (const auto& r : log.records) {
        if (r.day >= horizon) continue;
        if (spec.group_for(r.features[static_cast<std::size_t>(col)]) != group) continue;
        day_volume[static_cast<std::size_t>(r.day)] += 1;
        day_revenue[static_cast<std::size_t>(r.day)] += r.revenue_micros;
    }

    RpmSeries series;
    series.rpm.resize(static_cast<std::size_t>(horizon), 0.0);
    series.defined.resize(static_cast<std::size_t>(horizon), 0);
    std::int64_t cum_volume = 0;
    Micros cum_revenue = 0;
    for (int t = 0; t < horizon; ++t) {
        cum_volume += day_volume[static_cast<std::size_t>(t)];
        cum_revenue += day_revenue[static_cast<std::size_t>(t)];
        if (cum_volume > 0) {
            series.rpm[static_cast<std::size_t>(t)] =
                static_cast<double>(cum_revenue) / 1000.0 / static_cast<double>(cum_volume);
            series.defined[static_cast<std::size_t>(t)] = 1;
        }
    }
    return series;
}

}  // namespace dimbid
