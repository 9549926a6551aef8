#include "dimbid/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dimbid/error.hpp"

namespace dimbid {

double DistSpec::sample(Rng& rng) const {
    switch (family) {
        case Family::constant: return p0;
        case Family::uniform: return rng.uniform(p0, p1);
        case Family::lognormal: return rng.lognormal(p0, p1);
    }
    return p0;
}

double DistSpec::mean() const {
    switch (family) {
        case Family::constant: return p0;
        case Family::uniform: return 0.5 * (p0 + p1);
        case Family::lognormal: return std::exp(p0 + 0.5 * p1 * p1);
    }
    return p0;
}

void DistSpec::validate(const std::string& what) const {
    switch (family) {
        case Family::constant:
            if (p0 < 0) throw data_error(what + ": negative constant");
            break;
        case Family::uniform:
            if (p0 < 0 || p1 < p0) throw data_error(what + ": invalid uniform range");
            break;
        case Family::lognormal:
            if (p1 < 0) throw data_error(what + ": negative lognormal scale");
            break;
    }
}

int DelaySpec::sample(Rng& rng) const {
    switch (kind) {
        case Kind::none: return 0;
        case Kind::uniform: return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_days) + 1));
        case Kind::geometric: {
            int d = 0;
            while (d < max_days && !rng.bernoulli(p)) ++d;
            return d;
        }
    }
    return 0;
}

void SimEnvironment::validate() const {
    if (dimensions.empty()) throw data_error("environment: no dimensions");
    if (base_bid <= 0) throw data_error("environment: base_bid must be positive");
    if (attribution_window_days < 0) throw data_error("environment: negative attribution window");
    std::size_t expected = 1;
    for (const auto& d : dimensions) {
        if (d.values.empty()) throw data_error("environment: dimension '" + d.name + "' has no values");
        expected *= d.values.size();
    }
    if (cells.size() != expected)
        throw data_error("environment: " + std::to_string(cells.size()) + " cells for " +
                         std::to_string(expected) + " value combinations");
    std::set<std::vector<std::string>> seen;
    for (const auto& c : cells) {
        if (c.values.size() != dimensions.size())
            throw data_error("environment: cell with wrong number of feature values");
        for (std::size_t k = 0; k < dimensions.size(); ++k) {
            const auto& vals = dimensions[k].values;
            if (std::find(vals.begin(), vals.end(), c.values[k]) == vals.end())
                throw data_error("environment: cell value '" + c.values[k] +
                                 "' not listed under dimension '" + dimensions[k].name + "'");
        }
        if (!seen.insert(c.values).second) throw data_error("environment: duplicate cell");
        if (c.daily_opportunities < 0) throw data_error("environment: negative opportunity count");
        if (c.conversion_prob < 0 || c.conversion_prob > 1)
            throw data_error("environment: conversion_prob outside [0,1]");
        c.competitor_bid.validate("competitor_bid");
        c.revenue.validate("revenue");
    }
    if (throttle.mode == ThrottlePolicy::Mode::spend_cap && throttle.daily_cap_micros <= 0)
        throw data_error("environment: spend_cap throttle needs a positive daily cap");
}

namespace {

// Effective bid per cell under (plan, specs): base_bid times the factor of the
// group each cell value falls in. Unmapped values use the overflow factor 1.
std::vector<double> cell_bids(const SimEnvironment& env, const BidPlan& plan,
                              std::span<const DimensionSpec> specs) {
    if (specs.size() != static_cast<std::size_t>(plan.dimension_count()))
        throw data_error("run_day: plan and specs dimension counts differ");
    std::vector<int> env_dim_of_spec(specs.size());
    for (std::size_t s = 0; s < specs.size(); ++s) {
        int found = -1;
        for (std::size_t d = 0; d < env.dimensions.size(); ++d)
            if (env.dimensions[d].name == specs[s].name) found = static_cast<int>(d);
        if (found < 0)
            throw data_error("run_day: plan dimension '" + specs[s].name +
                             "' does not exist in the environment");
        env_dim_of_spec[s] = found;
    }

    std::vector<double> bids(env.cells.size(), plan.base_bid);
    for (std::size_t c = 0; c < env.cells.size(); ++c) {
        double bid = plan.base_bid;
        for (std::size_t s = 0; s < specs.size(); ++s) {
            const auto& value = env.cells[c].values[static_cast<std::size_t>(env_dim_of_spec[s])];
            bid *= plan.factor_at(static_cast<int>(s), specs[s].group_for(value));
        }
        bids[c] = bid;
    }
    return bids;
}

}  // namespace

DayResult run_day(const SimEnvironment& env, const BidPlan& plan,
                  std::span<const DimensionSpec> specs, int day) {
    const auto bids = cell_bids(env, plan, specs);
    DayResult result;
    result.truth.day = day;

    const std::uint64_t day_seed = derive_seed(env.seed, "day", static_cast<std::uint64_t>(day));
    const bool capped = env.throttle.mode == ThrottlePolicy::Mode::spend_cap;
    bool participating = true;

    for (std::size_t c = 0; c < env.cells.size(); ++c) {
        const SimCell& cell = env.cells[c];
        Rng rng(derive_seed(day_seed, "cell", c));
        const std::int64_t opportunities = rng.poisson(cell.daily_opportunities);
        result.truth.opportunities += opportunities;
        const double bid = bids[c];
        const Micros cost = static_cast<Micros>(std::llround(bid * 1000.0));  // per-mille price, one impression

        for (std::int64_t o = 0; o < opportunities; ++o) {
            // Everything is drawn for every opportunity so that runs with
            // different plans stay coupled (common random numbers).
            const double competing = cell.competitor_bid.sample(rng);
            const bool converts = rng.bernoulli(cell.conversion_prob);
            const double value = cell.revenue.sample(rng);
            int delay = cell.attribution_delay.sample(rng);
            delay = std::min(delay, env.attribution_window_days);

            if (!participating) continue;
            if (bid < competing) continue;  // lost the auction

            WonEvent ev;
            ev.day = day;
            ev.cell = static_cast<int>(c);
            ev.cost_micros = cost;
            ev.converted = converts;
            ev.revenue_micros = converts ? static_cast<Micros>(std::llround(value * kMicrosPerUnit)) : 0;
            ev.arrival_day = day + delay;
            result.truth.wins += 1;
            result.truth.spend_micros += ev.cost_micros;
            result.truth.conversions += converts ? 1 : 0;
            result.truth.drawn_revenue_micros += ev.revenue_micros;
            result.events.push_back(ev);

            if (capped && result.truth.spend_micros >= env.throttle.daily_cap_micros)
                participating = false;
        }
    }
    return result;
}

ImpressionLog censored_log(const SimEnvironment& env, std::span<const WonEvent> events,
                           int as_of_day) {
    ImpressionLog log;
    for (const auto& d : env.dimensions) log.feature_names.push_back(d.name);
    log.records.reserve(events.size());
    std::size_t n = 0;
    for (const auto& ev : events) {
        if (ev.day > as_of_day) continue;
        ImpressionRecord r;
        r.day = ev.day;
        r.id = "imp-" + std::to_string(n++);
        r.features = env.cells[static_cast<std::size_t>(ev.cell)].values;
        r.cost_micros = ev.cost_micros;
        const bool visible = ev.converted && ev.arrival_day <= as_of_day;
        r.converted = visible;
        r.revenue_micros = visible ? ev.revenue_micros : 0;
        log.records.push_back(std::move(r));
    }
    return log;
}

CampaignResult run_campaign(const SimEnvironment& env, const Controller& controller,
                            const CampaignConfig& config) {
    env.validate();
    if (config.flight_days < 1) throw data_error("run_campaign: flight_days must be >= 1");
    if (config.adjustment_cadence_days < 1)
        throw data_error("run_campaign: adjustment_cadence_days must be >= 1");

    CampaignResult result;
    for (int day = 0; day < config.flight_days; ++day) {
        if (day % config.adjustment_cadence_days == 0) {
            ImpressionLog so_far = censored_log(env, result.events, day - 1);
            ControllerDecision decision = controller(so_far, day, result.served);
            for (auto& row : decision.plan.factors)
                for (double& f : row)
                    if (!config.factor_bounds.contains(f)) {
                        result.warnings.push_back("day " + std::to_string(day) +
                                                  ": factor " + std::to_string(f) + " clamped to bounds");
                        f = config.factor_bounds.clamp(f);
                    }
            result.served.push_back(ServedPlanRecord{day, std::move(decision)});
        }
        const ControllerDecision& current = result.served.back().decision;
        DayResult dr = run_day(env, current.plan, current.specs, day);

        DailyMetrics dm;
        dm.day = day;
        dm.opportunities = dr.truth.opportunities;
        dm.wins = dr.truth.wins;
        dm.spend_micros = dr.truth.spend_micros;
        result.daily.push_back(dm);
        result.truth.push_back(dr.truth);
        result.events.insert(result.events.end(), dr.events.begin(), dr.events.end());
    }

    const int last_day = config.flight_days - 1;
    for (const auto& ev : result.events) {
        result.metrics.volume += 1;
        result.metrics.cost_micros += ev.cost_micros;
        if (ev.converted && ev.arrival_day <= last_day) {
            result.metrics.orders += 1;
            result.metrics.sales_micros += ev.revenue_micros;
            result.daily[static_cast<std::size_t>(std::min(ev.arrival_day, last_day))]
                .arrived_revenue_micros += ev.revenue_micros;
        }
    }
    result.final_log = censored_log(env, result.events, last_day);
    return result;
}

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double binomial_sign_test_p(int successes, int trials) {
    // one-sided P(X >= successes) for X ~ Binomial(trials, 1/2)
    double p = 0;
    for (int k = successes; k <= trials; ++k) {
        double log_c = 0;
        for (int i = 0; i < k; ++i)
            log_c += std::log(static_cast<double>(trials - i)) - std::log(static_cast<double>(i + 1));
        p += std::exp(log_c - trials * std::log(2.0));
    }
    return std::min(p, 1.0);
}

}  // namespace

AbReport ab_experiment(const SimEnvironment& env, const ControllerFactory& test,
                       const ControllerFactory& control, int replications, std::uint64_t seed,
                       const CampaignConfig& config) {
    if (replications < 1) throw data_error("ab_experiment: replications must be >= 1");
    AbReport report;
    for (int r = 0; r < replications; ++r) {
        SimEnvironment env_r = env;
        env_r.seed = derive_seed(seed, "replication", static_cast<std::uint64_t>(r));
        Controller test_ctrl = test(derive_seed(seed, "test-controller", static_cast<std::uint64_t>(r)));
        Controller control_ctrl =
            control(derive_seed(seed, "control-controller", static_cast<std::uint64_t>(r)));

        CampaignResult test_run = run_campaign(env_r, test_ctrl, config);
        CampaignResult control_run = run_campaign(env_r, control_ctrl, config);
        report.replications.push_back(ReplicationOutcome{test_run.metrics, control_run.metrics});
        if (r == 0) {
            report.sample_test_log = std::move(test_run.final_log);
            report.sample_control_log = std::move(control_run.final_log);
            report.sample_test_served = std::move(test_run.served);
        }
    }

    std::vector<double> roas, ecpm, trans;
    for (const auto& rep : report.replications) {
        roas.push_back(rep.roas_delta());
        ecpm.push_back(rep.ecpm_delta());
        trans.push_back(rep.trans_delta());
        if (rep.roas_delta() > 0) ++report.roas_positive;
    }
    report.median_roas_delta = median_of(roas);
    report.median_ecpm_delta = median_of(ecpm);
    report.median_trans_delta = median_of(trans);
    report.sign_test_p = binomial_sign_test_p(report.roas_positive,
                                              static_cast<int>(report.replications.size()));

    std::vector<int> order(report.replications.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return report.replications[static_cast<std::size_t>(a)].roas_delta() <
               report.replications[static_cast<std::size_t>(b)].roas_delta();
    });
    report.median_replication = order[(order.size() - 1) / 2];
    return report;
}

}  // namespace dimbid
