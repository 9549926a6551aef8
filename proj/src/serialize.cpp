#include "dimbid/serialize.hpp"

#include <cmath>
#include <fstream>

#include "dimbid/error.hpp"
#include "dimbid/rng.hpp"

namespace dimbid {

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw data_error("invalid JSON in " + path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& doc) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open output file: " + path);
    out << doc.dump(2) << '\n';
}

Json to_json(const DimensionSpec& spec) {
    Json groups = Json::object();
    for (const auto& [value, group] : spec.group_of) groups[value] = group;
    return Json{{"name", spec.name},
                {"group_count", spec.group_count},
                {"value_prefix_len", spec.value_prefix_len},
                {"groups", std::move(groups)}};
}

DimensionSpec dimension_spec_from_json(const Json& doc) {
    DimensionSpec spec;
    spec.name = doc.at("name").get<std::string>();
    spec.group_count = doc.at("group_count").get<int>();
    spec.value_prefix_len = doc.value("value_prefix_len", 0);
    for (const auto& [value, group] : doc.at("groups").items()) {
        const int g = group.get<int>();
        if (g < 0 || g >= spec.group_count)
            throw data_error("dimension spec: group index " + std::to_string(g) + " out of range");
        spec.group_of[value] = g;
    }
    std::vector<bool> populated(static_cast<std::size_t>(spec.group_count), false);
    for (const auto& [value, group] : spec.group_of) populated[static_cast<std::size_t>(group)] = true;
    for (int g = 0; g < spec.group_count; ++g)
        if (!populated[static_cast<std::size_t>(g)])
            throw data_error("dimension spec: group " + std::to_string(g) + " has no values");
    return spec;
}

Json to_json(const CpmModel& model) {
    return Json{{"intercept", model.intercept}, {"slope", model.slope}};
}

CpmModel cpm_model_from_json(const Json& doc) {
    CpmModel m;
    m.intercept = doc.at("intercept").get<double>();
    m.slope = doc.at("slope").get<double>();
    return m;
}

Json to_json(const MarginalVolumeModel& model) {
    return Json{{"intercepts", model.intercepts}, {"betas", model.betas}};
}

MarginalVolumeModel volume_model_from_json(const Json& doc) {
    MarginalVolumeModel m;
    m.intercepts = doc.at("intercepts").get<std::vector<double>>();
    m.betas = doc.at("betas").get<std::vector<std::vector<double>>>();
    if (m.intercepts.size() != m.betas.size())
        throw data_error("volume model: intercept/beta dimension mismatch");
    return m;
}

Json to_json(const LandscapeDocument& doc) {
    Json cpm = Json::array();
    for (const auto& dim : doc.cpm) {
        Json row = Json::array();
        for (const auto& m : dim) row.push_back(to_json(m));
        cpm.push_back(std::move(row));
    }
    return Json{{"dimensions", doc.dimensions},
                {"volume_model", to_json(doc.volume)},
                {"cpm_models", std::move(cpm)},
                {"fit_objective", doc.fit_objective}};
}

LandscapeDocument landscape_from_json(const Json& doc) {
    LandscapeDocument out;
    out.dimensions = doc.at("dimensions").get<std::vector<std::string>>();
    out.volume = volume_model_from_json(doc.at("volume_model"));
    for (const auto& row : doc.at("cpm_models")) {
        std::vector<CpmModel> models;
        for (const auto& m : row) models.push_back(cpm_model_from_json(m));
        out.cpm.push_back(std::move(models));
    }
    out.fit_objective = doc.value("fit_objective", 0.0);
    if (out.dimensions.size() != out.cpm.size() ||
        out.dimensions.size() != out.volume.betas.size())
        throw data_error("landscape document: dimension count mismatch");
    return out;
}

namespace {

Json to_json(const SegmentStats& s) {
    Json j{{"volume", s.volume},
           {"spend_micros", s.spend_micros},
           {"revenue_micros", s.revenue_micros},
           {"conversions", s.conversions}};
    if (s.has_rates()) {
        j["cpm"] = s.cpm();
        j["rpm"] = s.rpm();
    } else {
        j["cpm"] = nullptr;  // undefined on empty groups
        j["rpm"] = nullptr;
    }
    return j;
}

SegmentStats segment_stats_from_json(const Json& doc) {
    SegmentStats s;
    s.volume = doc.at("volume").get<std::int64_t>();
    s.spend_micros = doc.at("spend_micros").get<Micros>();
    s.revenue_micros = doc.at("revenue_micros").get<Micros>();
    s.conversions = doc.at("conversions").get<std::int64_t>();
    return s;
}

}  // namespace

Json to_json(const StatsDocument& doc) {
    Json dims = Json::array();
    for (const auto& d : doc.dimensions) {
        Json groups = Json::array();
        for (const auto& g : d.groups) groups.push_back(to_json(g));
        dims.push_back(Json{{"name", d.name},
                            {"groups", std::move(groups)},
                            {"overflow", to_json(d.overflow)}});
    }
    return Json{{"day_first", doc.days.first}, {"day_last", doc.days.last},
                {"dimensions", std::move(dims)}};
}

StatsDocument stats_from_json(const Json& doc) {
    StatsDocument out;
    out.days.first = doc.value("day_first", 0);
    out.days.last = doc.value("day_last", 0);
    for (const auto& d : doc.at("dimensions")) {
        StatsDocument::Dimension dim;
        dim.name = d.at("name").get<std::string>();
        for (const auto& g : d.at("groups")) dim.groups.push_back(segment_stats_from_json(g));
        if (d.contains("overflow")) dim.overflow = segment_stats_from_json(d.at("overflow"));
        out.dimensions.push_back(std::move(dim));
    }
    return out;
}

Json to_json(const BidPlan& plan) {
    Json dims = Json::array();
    for (int k = 0; k < plan.dimension_count(); ++k) {
        Json d = Json::object();
        d["name"] = k < static_cast<int>(plan.dimension_names.size())
                        ? plan.dimension_names[static_cast<std::size_t>(k)]
                        : ("dim" + std::to_string(k));
        d["factors"] = plan.factors[static_cast<std::size_t>(k)];
        dims.push_back(std::move(d));
    }
    return Json{{"base_bid", plan.base_bid}, {"dimensions", std::move(dims)}};
}

BidPlan bid_plan_from_json(const Json& doc) {
    BidPlan plan;
    plan.base_bid = doc.at("base_bid").get<double>();
    for (const auto& d : doc.at("dimensions")) {
        plan.dimension_names.push_back(d.at("name").get<std::string>());
        plan.factors.push_back(d.at("factors").get<std::vector<double>>());
    }
    return plan;
}

Json to_json(const ServedPlanRecord& record) {
    Json specs = Json::array();
    for (const auto& s : record.decision.specs) specs.push_back(to_json(s));
    return Json{{"from_day", record.from_day},
                {"plan", to_json(record.decision.plan)},
                {"specs", std::move(specs)}};
}

ServedPlanRecord served_record_from_json(const Json& doc) {
    ServedPlanRecord r;
    r.from_day = doc.at("from_day").get<int>();
    r.decision.plan = bid_plan_from_json(doc.at("plan"));
    for (const auto& s : doc.at("specs")) r.decision.specs.push_back(dimension_spec_from_json(s));
    return r;
}

Json served_history_to_json(std::span<const ServedPlanRecord> served) {
    Json arr = Json::array();
    for (const auto& r : served) arr.push_back(to_json(r));
    return arr;
}

std::vector<ServedPlanRecord> served_history_from_json(const Json& doc) {
    std::vector<ServedPlanRecord> out;
    for (const auto& r : doc) out.push_back(served_record_from_json(r));
    return out;
}

namespace {

DistSpec dist_from_json(const Json& doc, const std::string& what) {
    DistSpec d;
    const std::string family = doc.at("family").get<std::string>();
    if (family == "constant") d.family = DistSpec::Family::constant;
    else if (family == "uniform") d.family = DistSpec::Family::uniform;
    else if (family == "lognormal") d.family = DistSpec::Family::lognormal;
    else throw data_error(what + ": unknown distribution family '" + family + "'");
    const auto& p = doc.at("p");
    if (!p.is_array() || p.empty()) throw data_error(what + ": missing distribution parameters");
    d.p0 = p[0].get<double>();
    d.p1 = p.size() > 1 ? p[1].get<double>() : 0.0;
    d.validate(what);
    return d;
}

Json dist_to_json(const DistSpec& d) {
    const char* family = d.family == DistSpec::Family::constant ? "constant"
                         : d.family == DistSpec::Family::uniform ? "uniform"
                                                                 : "lognormal";
    return Json{{"family", family}, {"p", {d.p0, d.p1}}};
}

DelaySpec delay_from_json(const Json& doc) {
    DelaySpec d;
    const std::string kind = doc.value("kind", "none");
    if (kind == "none") d.kind = DelaySpec::Kind::none;
    else if (kind == "uniform") d.kind = DelaySpec::Kind::uniform;
    else if (kind == "geometric") d.kind = DelaySpec::Kind::geometric;
    else throw data_error("delay: unknown kind '" + kind + "'");
    d.max_days = doc.value("max_days", 0);
    d.p = doc.value("p", 0.5);
    if (d.max_days < 0) throw data_error("delay: negative max_days");
    return d;
}

Json delay_to_json(const DelaySpec& d) {
    const char* kind = d.kind == DelaySpec::Kind::none ? "none"
                       : d.kind == DelaySpec::Kind::uniform ? "uniform"
                                                            : "geometric";
    return Json{{"kind", kind}, {"max_days", d.max_days}, {"p", d.p}};
}

ThrottlePolicy throttle_from_json(const Json& doc) {
    ThrottlePolicy t;
    const std::string mode = doc.value("mode", "off");
    if (mode == "off") t.mode = ThrottlePolicy::Mode::off;
    else if (mode == "spend_cap") t.mode = ThrottlePolicy::Mode::spend_cap;
    else throw data_error("throttle: unknown mode '" + mode + "'");
    if (doc.contains("daily_cap"))
        t.daily_cap_micros = static_cast<Micros>(std::llround(doc.at("daily_cap").get<double>() * kMicrosPerUnit));
    return t;
}

// Compact recipe: per-value conversion weights control the RPM separation of
// the prospective groups; everything else is shared across cells with a
// deterministic jitter.
std::vector<SimCell> expand_generator(const Json& gen, std::vector<SimDimension>& dimensions,
                                      std::uint64_t env_seed) {
    dimensions.clear();
    std::vector<std::vector<double>> weights;
    for (const auto& d : gen.at("dimensions")) {
        SimDimension dim;
        dim.name = d.at("name").get<std::string>();
        dim.values = d.at("values").get<std::vector<std::string>>();
        std::vector<double> w;
        if (d.contains("conversion_weight")) {
            w = d.at("conversion_weight").get<std::vector<double>>();
            if (w.size() != dim.values.size())
                throw data_error("generator: conversion_weight size mismatch for '" + dim.name + "'");
        } else {
            w.assign(dim.values.size(), 1.0);
        }
        dimensions.push_back(std::move(dim));
        weights.push_back(std::move(w));
    }

    const double base_opportunities = gen.at("base_opportunities").get<double>();
    const double opportunity_jitter = gen.value("opportunity_jitter", 0.0);
    const double base_conversion_prob = gen.at("base_conversion_prob").get<double>();
    const DistSpec competitor = dist_from_json(gen.at("competitor"), "generator competitor");
    const DistSpec revenue = dist_from_json(gen.at("revenue"), "generator revenue");
    const DelaySpec delay = gen.contains("delay") ? delay_from_json(gen.at("delay")) : DelaySpec{};

    Rng rng(derive_seed(env_seed, "environment-generator"));
    std::vector<SimCell> cells;
    std::vector<std::size_t> idx(dimensions.size(), 0);
    while (true) {
        SimCell cell;
        double w = 1.0;
        for (std::size_t k = 0; k < dimensions.size(); ++k) {
            cell.values.push_back(dimensions[k].values[idx[k]]);
            w *= weights[k][idx[k]];
        }
        cell.daily_opportunities =
            base_opportunities * (1.0 + opportunity_jitter * (2.0 * rng.uniform() - 1.0));
        cell.competitor_bid = competitor;
        cell.conversion_prob = std::min(base_conversion_prob * w, 1.0);
        cell.revenue = revenue;
        cell.attribution_delay = delay;
        cells.push_back(std::move(cell));

        std::size_t k = dimensions.size();
        while (k > 0) {
            --k;
            if (++idx[k] < dimensions[k].values.size()) break;
            idx[k] = 0;
            if (k == 0) return cells;
        }
    }
}

}  // namespace

SimEnvironment environment_from_json(const Json& doc) {
    SimEnvironment env;
    env.seed = doc.value("seed", 0ULL);
    env.base_bid = doc.at("base_bid").get<double>();
    env.attribution_window_days = doc.value("attribution_window_days", 14);
    if (doc.contains("throttle")) env.throttle = throttle_from_json(doc.at("throttle"));

    if (doc.contains("generator")) {
        env.cells = expand_generator(doc.at("generator"), env.dimensions, env.seed);
    } else {
        for (const auto& d : doc.at("dimensions")) {
            SimDimension dim;
            dim.name = d.at("name").get<std::string>();
            dim.values = d.at("values").get<std::vector<std::string>>();
            env.dimensions.push_back(std::move(dim));
        }
        for (const auto& c : doc.at("cells")) {
            SimCell cell;
            cell.values = c.at("values").get<std::vector<std::string>>();
            cell.daily_opportunities = c.at("daily_opportunities").get<double>();
            cell.competitor_bid = dist_from_json(c.at("competitor_bid"), "competitor_bid");
            cell.conversion_prob = c.at("conversion_prob").get<double>();
            cell.revenue = dist_from_json(c.at("revenue"), "revenue");
            if (c.contains("attribution_delay")) cell.attribution_delay = delay_from_json(c.at("attribution_delay"));
            env.cells.push_back(std::move(cell));
        }
    }
    env.validate();
    return env;
}

Json to_json(const SimEnvironment& env) {
    Json dims = Json::array();
    for (const auto& d : env.dimensions) dims.push_back(Json{{"name", d.name}, {"values", d.values}});
    Json cells = Json::array();
    for (const auto& c : env.cells)
        cells.push_back(Json{{"values", c.values},
                             {"daily_opportunities", c.daily_opportunities},
                             {"competitor_bid", dist_to_json(c.competitor_bid)},
                             {"conversion_prob", c.conversion_prob},
                             {"revenue", dist_to_json(c.revenue)},
                             {"attribution_delay", delay_to_json(c.attribution_delay)}});
    Json throttle{{"mode", env.throttle.mode == ThrottlePolicy::Mode::off ? "off" : "spend_cap"}};
    if (env.throttle.mode == ThrottlePolicy::Mode::spend_cap)
        throttle["daily_cap"] = to_currency(env.throttle.daily_cap_micros);
    return Json{{"seed", env.seed},
                {"base_bid", env.base_bid},
                {"attribution_window_days", env.attribution_window_days},
                {"throttle", std::move(throttle)},
                {"dimensions", std::move(dims)},
                {"cells", std::move(cells)}};
}

Json campaign_config_to_json(const CampaignConfig& config) {
    return Json{{"budget_per_period", to_currency(config.budget_per_period_micros)},
                {"flight_days", config.flight_days},
                {"base_bid", config.base_bid},
                {"attribution_window_days", config.attribution_window_days},
                {"adjustment_cadence_days", config.adjustment_cadence_days},
                {"factor_bounds", {config.factor_bounds.lo, config.factor_bounds.hi}}};
}

CampaignConfig campaign_config_from_json(const Json& doc) {
    CampaignConfig c;
    c.budget_per_period_micros =
        static_cast<Micros>(std::llround(doc.at("budget_per_period").get<double>() * kMicrosPerUnit));
    c.flight_days = doc.at("flight_days").get<int>();
    c.base_bid = doc.at("base_bid").get<double>();
    c.attribution_window_days = doc.value("attribution_window_days", 14);
    c.adjustment_cadence_days = doc.value("adjustment_cadence_days", 2);
    if (doc.contains("factor_bounds")) {
        c.factor_bounds.lo = doc.at("factor_bounds")[0].get<double>();
        c.factor_bounds.hi = doc.at("factor_bounds")[1].get<double>();
    }
    if (c.budget_per_period_micros <= 0) throw data_error("campaign: budget_per_period must be positive");
    if (c.flight_days < 1) throw data_error("campaign: flight_days must be >= 1");
    if (!(c.factor_bounds.lo > 0) || c.factor_bounds.lo > 1.0 || c.factor_bounds.hi < 1.0)
        throw data_error("campaign: factor bounds must satisfy 0 < lo <= 1 <= hi");
    return c;
}

Json grouping_request_to_json(const GroupingRequest& request) {
    return Json{{"dimension", request.dimension},
                {"group_count", request.group_count},
                {"metric", to_string(request.rank_metric)},
                {"min_volume_threshold", request.min_volume_threshold},
                {"min_order_threshold", request.min_order_threshold},
                {"value_prefix_len", request.value_prefix_len},
                {"warmup_days", request.warmup_days}};
}

GroupingRequest grouping_request_from_json(const Json& doc) {
    GroupingRequest r;
    r.dimension = doc.at("dimension").get<std::string>();
    r.group_count = doc.at("group_count").get<int>();
    r.rank_metric = rank_metric_from_string(doc.value("metric", "rpm"));
    r.min_volume_threshold = doc.value("min_volume_threshold", static_cast<std::int64_t>(1000));
    r.min_order_threshold = doc.value("min_order_threshold", static_cast<std::int64_t>(10));
    r.value_prefix_len = doc.value("value_prefix_len", 0);
    r.warmup_days = doc.value("warmup_days", 7);
    return r;
}

}  // namespace dimbid
