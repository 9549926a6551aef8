#pragma once

#include <vector>

#include "dimbid/types.hpp"

namespace dimbid {

struct AggregateResult {
    std::vector<SegmentStats> groups;  // size spec.group_count
    SegmentStats overflow;             // values unseen by the spec (strict mode errors instead)

    SegmentStats totals() const {
        SegmentStats t;
        for (const auto& g : groups) {
            t.volume += g.volume;
            t.spend_micros += g.spend_micros;
            t.revenue_micros += g.revenue_micros;
            t.conversions += g.conversions;
        }
        t.volume += overflow.volume;
        t.spend_micros += overflow.spend_micros;
        t.revenue_micros += overflow.revenue_micros;
        t.conversions += overflow.conversions;
        return t;
    }
};

// Per-group stats over records whose day falls in `days`. With strict=true an
// unmappable raw value is an error; otherwise it lands in the overflow bucket.
AggregateResult aggregate(const ImpressionLog& log, const DimensionSpec& spec, DayRange days,
                          bool strict = false);

struct RpmSeries {
    std::vector<double> rpm;    // element t: RPM over records with day <= t
    std::vector<char> defined;  // 0 where cumulative volume was zero (rpm reported as 0)
};

// Daily accumulative RPM for one group, horizon days long.
RpmSeries accumulative_rpm_series(const ImpressionLog& log, const DimensionSpec& spec, int group,
                                  int horizon);

}  // namespace dimbid
