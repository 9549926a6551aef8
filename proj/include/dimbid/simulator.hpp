#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dimbid/rng.hpp"
#include "dimbid/types.hpp"

namespace dimbid {

/// Scalar distribution used for competitor bids and conversion values.
struct DistSpec {
    enum class Family { constant, uniform, lognormal };
    Family family = Family::constant;
    double p0 = 0.0;  // constant: value | uniform: lo | lognormal: location
    double p1 = 0.0;  // uniform: hi | lognormal: scale

    double sample(Rng& rng) const;
    double mean() const;
    void validate(const std::string& what) const;
};

/// Distribution of the attribution lag in days.
struct DelaySpec {
    enum class Kind { none, uniform, geometric };
    Kind kind = Kind::none;
    int max_days = 0;  // inclusive cap for uniform/geometric
    double p = 0.5;    // geometric success probability

    int sample(Rng& rng) const;
};

/// Ground truth for one combination of raw feature values.
struct SimCell {
    std::vector<std::string> values;  // one raw value per environment dimension
    double daily_opportunities = 0;   // Poisson mean
    DistSpec competitor_bid;          // highest competing bid, currency per mille
    double conversion_prob = 0;
    DistSpec revenue;  // conversion value, currency
    DelaySpec attribution_delay;
};

struct ThrottlePolicy {
    enum class Mode { off, spend_cap };
    Mode mode = Mode::off;
    Micros daily_cap_micros = 0;
};

struct SimDimension {
    std::string name;
    std::vector<std::string> values;
};

struct SimEnvironment {
    std::vector<SimDimension> dimensions;
    std::vector<SimCell> cells;
    double base_bid = 1.0;  // currency per mille
    std::uint64_t seed = 0;
    ThrottlePolicy throttle;
    int attribution_window_days = 14;

    void validate() const;
};

/// Hidden truth for one won auction. The censored log exposes its revenue and
/// conversion flag only from arrival_day on.
struct WonEvent {
    int day = 0;
    int cell = 0;
    Micros cost_micros = 0;
    bool converted = false;
    Micros revenue_micros = 0;
    int arrival_day = 0;
};

struct DayTruth {
    int day = 0;
    std::int64_t opportunities = 0;
    std::int64_t wins = 0;
    Micros spend_micros = 0;
    std::int64_t conversions = 0;       // drawn on won auctions, before censoring
    Micros drawn_revenue_micros = 0;
};

struct DayResult {
    std::vector<WonEvent> events;
    DayTruth truth;
};

// One simulated day of first-price auctions. Wins require effective bid >=
// the highest competing bid; cost equals the effective bid. Deterministic
// given (env.seed, day); all per-opportunity draws happen whether or not the
// auction is won, so runs at different plans share common random numbers.
DayResult run_day(const SimEnvironment& env, const BidPlan& plan,
                  std::span<const DimensionSpec> specs, int day);

// Materializes the censored log visible at end of as_of_day.
ImpressionLog censored_log(const SimEnvironment& env, std::span<const WonEvent> events,
                           int as_of_day);

/// What the controller hands back on an adjustment day: the plan plus the
/// group mappings it is expressed over (empty before segmentation).
struct ControllerDecision {
    BidPlan plan;
    std::vector<DimensionSpec> specs;
};

struct ServedPlanRecord {
    int from_day = 0;
    ControllerDecision decision;
};

using Controller = std::function<ControllerDecision(
    const ImpressionLog& censored, int day, std::span<const ServedPlanRecord> served)>;

struct DailyMetrics {
    int day = 0;
    std::int64_t opportunities = 0;
    std::int64_t wins = 0;
    Micros spend_micros = 0;
    Micros arrived_revenue_micros = 0;  // attribution landing on this day
};

struct CampaignMetrics {
    std::int64_t volume = 0;
    std::int64_t orders = 0;  // conversions visible by flight end
    Micros cost_micros = 0;
    Micros sales_micros = 0;

    double roas() const { return cost_micros > 0 ? static_cast<double>(sales_micros) / static_cast<double>(cost_micros) : 0.0; }
    double ecpm() const { return volume > 0 ? static_cast<double>(cost_micros) / 1000.0 / static_cast<double>(volume) : 0.0; }
    double transaction_rate() const { return volume > 0 ? static_cast<double>(orders) / static_cast<double>(volume) : 0.0; }
};

struct CampaignResult {
    std::vector<WonEvent> events;
    ImpressionLog final_log;  // censored at flight end
    std::vector<DailyMetrics> daily;
    std::vector<DayTruth> truth;
    std::vector<ServedPlanRecord> served;
    std::vector<std::string> warnings;
    CampaignMetrics metrics;
};

// Runs days 0..flight_days-1, invoking the controller every
// adjustment_cadence_days with the censored log so far. Out-of-bounds factors
// are clamped with a warning.
CampaignResult run_campaign(const SimEnvironment& env, const Controller& controller,
                            const CampaignConfig& config);

using ControllerFactory = std::function<Controller(std::uint64_t seed)>;

struct ReplicationOutcome {
    CampaignMetrics test;
    CampaignMetrics control;

    double roas_delta() const { return test.roas() - control.roas(); }
    double ecpm_delta() const { return test.ecpm() - control.ecpm(); }
    double trans_delta() const { return test.transaction_rate() - control.transaction_rate(); }
};

struct AbReport {
    std::vector<ReplicationOutcome> replications;
    double median_roas_delta = 0;
    double median_ecpm_delta = 0;
    double median_trans_delta = 0;
    int roas_positive = 0;       // replications with a positive ROAS delta
    double sign_test_p = 1.0;    // one-sided binomial P(X >= roas_positive)
    int median_replication = 0;  // index holding the median ROAS delta

    // replication 0 artifacts, kept for reporting
    ImpressionLog sample_test_log;
    ImpressionLog sample_control_log;
    std::vector<ServedPlanRecord> sample_test_served;
};

// Paired A/B comparison over independently seeded environment copies. Both
// arms of a replication share the environment seed (common random numbers)
// and the same budget via `config`.
AbReport ab_experiment(const SimEnvironment& env, const ControllerFactory& test,
                       const ControllerFactory& control, int replications, std::uint64_t seed,
                       const CampaignConfig& config);

}  // namespace dimbid
