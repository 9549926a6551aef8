#pragma once

#include <cassert>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dimbid {

// Currency is stored as integer micro-units end to end; floating point enters
// only inside model fitting and the solvers.
using Micros = std::int64_t;

constexpr double kMicrosPerUnit = 1e6;

inline double to_currency(Micros m) { return static_cast<double>(m) / kMicrosPerUnit; }

/// One won-auction log row.
struct ImpressionRecord {
    int day = 0;
    std::string id;
    std::vector<std::string> features;  // parallel to ImpressionLog::feature_names
    Micros cost_micros = 0;
    Micros revenue_micros = 0;
    bool converted = false;
};

/// A parsed impression log: the feature column schema plus the rows.
struct ImpressionLog {
    std::vector<std::string> feature_names;
    std::vector<ImpressionRecord> records;

    int feature_index(std::string_view name) const {
        for (std::size_t i = 0; i < feature_names.size(); ++i)
            if (feature_names[i] == name) return static_cast<int>(i);
        return -1;
    }
};

struct FactorBounds {
    double lo = 0.2;
    double hi = 5.0;

    double clamp(double f) const { return f < lo ? lo : (f > hi ? hi : f); }
    bool contains(double f) const { return f >= lo && f <= hi; }
};

struct CampaignConfig {
    Micros budget_per_period_micros = 0;  // budget per optimization period (one cadence window)
    int flight_days = 1;
    double base_bid = 1.0;  // currency per mille
    int attribution_window_days = 14;
    int adjustment_cadence_days = 2;
    FactorBounds factor_bounds{};
};

/// Mapping from raw feature values to group indices for one dimension.
/// Values unseen at build time fall into a virtual overflow group (index ==
/// group_count) that always bids with factor 1.0.
struct DimensionSpec {
    std::string name;
    std::map<std::string, int> group_of;
    int group_count = 0;
    int value_prefix_len = 0;  // >0: truncate raw values to this many chars before lookup

    int overflow_group() const { return group_count; }

    int group_for(std::string_view raw) const {
        std::string key(value_prefix_len > 0 && raw.size() > static_cast<std::size_t>(value_prefix_len)
                            ? raw.substr(0, value_prefix_len)
                            : raw);
        auto it = group_of.find(key);
        return it == group_of.end() ? overflow_group() : it->second;
    }
};

/// Per-group aggregates over a slice of the log.
struct SegmentStats {
    std::int64_t volume = 0;
    Micros spend_micros = 0;
    Micros revenue_micros = 0;
    std::int64_t conversions = 0;

    // cpm/rpm are undefined on empty groups; callers must check has_rates().
    bool has_rates() const { return volume > 0; }

    double cpm() const {
        assert(volume > 0);
        return static_cast<double>(spend_micros) / 1000.0 / static_cast<double>(volume);
    }

    double rpm() const {
        assert(volume > 0);
        return static_cast<double>(revenue_micros) / 1000.0 / static_cast<double>(volume);
    }

    double spend() const { return to_currency(spend_micros); }
    double revenue() const { return to_currency(revenue_micros); }

    void add(const ImpressionRecord& r) {
        ++volume;
        spend_micros += r.cost_micros;
        revenue_micros += r.revenue_micros;
        conversions += r.converted ? 1 : 0;
    }
};

/// Base bid plus one multiplicative factor per group per dimension. The
/// effective bid for an impression is base_bid times the product of the
/// factors of the groups it falls in; overflow groups contribute 1.0.
struct BidPlan {
    double base_bid = 1.0;  // currency per mille
    std::vector<std::string> dimension_names;
    std::vector<std::vector<double>> factors;  // [dimension][group]

    int dimension_count() const { return static_cast<int>(factors.size()); }

    double factor_at(int dim, int group) const {
        const auto& f = factors[static_cast<std::size_t>(dim)];
        if (group == static_cast<int>(f.size())) return 1.0;  // overflow
        return f[static_cast<std::size_t>(group)];
    }

    static BidPlan uniform(double base_bid, const std::vector<std::string>& names,
                           const std::vector<int>& group_counts) {
        BidPlan p;
        p.base_bid = base_bid;
        p.dimension_names = names;
        for (int c : group_counts) p.factors.emplace_back(static_cast<std::size_t>(c), 1.0);
        return p;
    }
};

/// Inclusive day interval.
struct DayRange {
    int first = 0;
    int last = 0;

    bool empty() const { return last < first; }
    bool contains(int day) const { return day >= first && day <= last; }

    static DayRange through(int day) { return DayRange{0, day}; }
};

}  // namespace dimbid
