#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dimbid/aggregate.hpp"
#include "dimbid/controller.hpp"
#include "dimbid/error.hpp"
#include "dimbid/evaluation.hpp"
#include "dimbid/log_io.hpp"
#include "dimbid/pipeline.hpp"
#include "dimbid/rng.hpp"
#include "dimbid/segmentation.hpp"
#include "dimbid/serialize.hpp"
#include "dimbid/simulator.hpp"

namespace fs = std::filesystem;
using namespace dimbid;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
    std::string out_dir = ".";
    bool strict = false;

    Json config() const { return config_path.empty() ? Json::object() : read_json_file(config_path); }
    std::string out(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

int run_simulate(const GlobalOptions& g, const std::string& env_path, const std::string& plan_path,
                 int days) {
    Json cfg = g.config();
    std::string env_file = !env_path.empty() ? env_path : cfg.value("env_file", "");
    if (env_file.empty()) throw usage_error("simulate: --env is required");
    SimEnvironment env = environment_from_json(read_json_file(env_file));
    if (g.seed_given) env.seed = derive_seed(g.seed, "simulate");

    CampaignConfig campaign;
    if (cfg.contains("campaign")) campaign = campaign_config_from_json(cfg.at("campaign"));
    else campaign.budget_per_period_micros = 1;  // budget is not enforced by the simulator
    campaign.base_bid = env.base_bid;
    campaign.flight_days = days > 0 ? days : campaign.flight_days;
    campaign.adjustment_cadence_days = campaign.flight_days;  // single decision
    campaign.attribution_window_days = env.attribution_window_days;

    ControllerDecision decision;
    decision.plan.base_bid = env.base_bid;
    if (!plan_path.empty()) {
        Json plan_doc = read_json_file(plan_path);
        decision.plan = bid_plan_from_json(plan_doc);
        if (plan_doc.contains("specs"))
            for (const auto& s : plan_doc.at("specs"))
                decision.specs.push_back(dimension_spec_from_json(s));
        if (decision.specs.size() != static_cast<std::size_t>(decision.plan.dimension_count()))
            throw data_error("simulate: plan document must carry one spec per dimension");
    }

    CampaignResult result = run_campaign(env, make_fixed_controller(decision), campaign);

    fs::create_directories(g.out_dir);
    write_log_file(g.out("log.csv"), result.final_log);
    write_json_file(g.out("plans.json"), served_history_to_json(result.served));

    Json truth;
    truth["daily"] = Json::array();
    for (const auto& t : result.truth)
        truth["daily"].push_back(Json{{"day", t.day},
                                      {"opportunities", t.opportunities},
                                      {"wins", t.wins},
                                      {"spend", to_currency(t.spend_micros)},
                                      {"conversions", t.conversions},
                                      {"drawn_revenue", to_currency(t.drawn_revenue_micros)}});
    truth["totals"] = Json{{"volume", result.metrics.volume},
                           {"cost", to_currency(result.metrics.cost_micros)},
                           {"sales", to_currency(result.metrics.sales_micros)},
                           {"roas", result.metrics.roas()},
                           {"ecpm", result.metrics.ecpm()}};
    write_json_file(g.out("truth.json"), truth);

    std::cout << "simulated " << campaign.flight_days << " day(s): " << result.metrics.volume
              << " impressions, cost " << to_currency(result.metrics.cost_micros) << ", sales "
              << to_currency(result.metrics.sales_micros) << "\n";
    return 0;
}

int run_segment(const GlobalOptions& g, const std::string& log_path, GroupingRequest request) {
    ImpressionLog log = ingest_log_file(log_path);
    GroupingOutcome outcome = build_groups(log, request);
    for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
    if (!outcome.ready()) {
        std::cerr << "not ready: activation thresholds not met for dimension '" << request.dimension
                  << "'\n";
        return 2;
    }
    fs::create_directories(g.out_dir);
    const std::string path = g.out("spec_" + request.dimension + ".json");
    write_json_file(path, to_json(*outcome.spec));
    std::cout << "wrote " << path << " (" << outcome.spec->group_count << " groups over "
              << outcome.spec->group_of.size() << " values)\n";
    return 0;
}

int run_evaluate(const GlobalOptions& g, const std::string& log_path,
                 const std::vector<std::string>& spec_paths, double lambda, int horizon,
                 bool plot_data) {
    ImpressionLog log = ingest_log_file(log_path);
    std::vector<DimensionSpec> specs;
    for (const auto& p : spec_paths) specs.push_back(dimension_spec_from_json(read_json_file(p)));
    if (specs.empty()) throw usage_error("evaluate: at least one --spec is required");
    if (horizon <= 0) {
        for (const auto& r : log.records) horizon = std::max(horizon, r.day + 1);
        if (horizon <= 0) horizon = 1;
    }

    fs::create_directories(g.out_dir);
    std::ofstream report(g.out("evaluation.txt"));
    char buf[128];

    for (const auto& spec : specs) {
        report << "dimension " << spec.name << " (" << spec.group_count << " groups)\n";
        if (spec.group_count >= 2) {
            DistanceConfig cfg{lambda, horizon};
            std::vector<RpmSeries> series;
            for (int a = 0; a < spec.group_count; ++a)
                series.push_back(accumulative_rpm_series(log, spec, a, horizon));
            for (int a = 0; a < spec.group_count; ++a)
                for (int b = a + 1; b < spec.group_count; ++b) {
                    const double d = pairwise_distance(series[static_cast<std::size_t>(a)].rpm,
                                                       series[static_cast<std::size_t>(b)].rpm, lambda);
                    std::snprintf(buf, sizeof(buf), "  distance(%d,%d) = %.10g\n", a, b, d);
                    report << buf;
                }
            auto sep = dimension_separation(log, spec, cfg);
            std::snprintf(buf, sizeof(buf), "  median = %.10g, mean = %.10g\n", sep.median, sep.mean);
            report << buf;
        }
        auto table = GroupShareTable::from_log(log, spec, g.strict ? 0.0 : 0.5, g.strict);
        auto woe = modified_woe(table);
        for (std::size_t i = 0; i < woe.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "  woe[%zu] = %.10g\n", i, woe[i]);
            report << buf;
        }
        std::snprintf(buf, sizeof(buf), "  IV = %.10g\n", information_value(table));
        report << buf;

        if (plot_data) {
            std::ofstream curves(g.out("rpm_curves_" + spec.name + ".csv"));
            curves << "day";
            for (int a = 0; a < spec.group_count; ++a) curves << ",group_" << a;
            curves << '\n';
            std::vector<RpmSeries> series;
            for (int a = 0; a < spec.group_count; ++a)
                series.push_back(accumulative_rpm_series(log, spec, a, horizon));
            for (int t = 0; t < horizon; ++t) {
                curves << t;
                for (int a = 0; a < spec.group_count; ++a) {
                    std::snprintf(buf, sizeof(buf), ",%.10g",
                                  series[static_cast<std::size_t>(a)].rpm[static_cast<std::size_t>(t)]);
                    curves << buf;
                }
                curves << '\n';
            }
            std::ofstream woe_csv(g.out("woe_" + spec.name + ".csv"));
            woe_csv << "group,woe,conversion_share,impression_share\n";
            for (std::size_t i = 0; i < woe.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g\n", i, woe[i],
                              table.conversion_share[i], table.impression_share[i]);
                woe_csv << buf;
            }
        }
    }

    for (std::size_t a = 0; a < specs.size(); ++a)
        for (std::size_t b = a + 1; b < specs.size(); ++b) {
            auto table = ContingencyTable::from_log(log, specs[a], specs[b]);
            std::snprintf(buf, sizeof(buf), "MI(%s, %s; Y) = %.10g\n", specs[a].name.c_str(),
                          specs[b].name.c_str(), mutual_information(table));
            report << buf;
        }
    std::cout << "wrote " << g.out("evaluation.txt") << '\n';
    return 0;
}

int run_fit(const GlobalOptions& g, const std::string& log_path,
            const std::vector<std::string>& spec_paths, const std::string& plans_path, int starts) {
    ImpressionLog log = ingest_log_file(log_path);
    std::vector<DimensionSpec> specs;
    for (const auto& p : spec_paths) specs.push_back(dimension_spec_from_json(read_json_file(p)));
    if (specs.empty()) throw usage_error("fit: at least one --spec is required");
    std::vector<ServedPlanRecord> served;
    if (!plans_path.empty()) served = served_history_from_json(read_json_file(plans_path));

    int horizon = 0;
    for (const auto& r : log.records) horizon = std::max(horizon, r.day + 1);
    if (horizon == 0) throw data_error("fit: log is empty");
    double base_bid = 1.0;
    for (auto it = served.rbegin(); it != served.rend(); ++it) {
        base_bid = it->decision.plan.base_bid;
        break;
    }

    MarginalFitOptions options;
    options.starts = starts;
    options.seed = derive_seed(g.seed, "fit");
    DayRange days{0, horizon - 1};
    LandscapeDocument model = fit_landscape(log, specs, served, days, base_bid, options);
    StatsDocument stats = collect_stats(log, specs, days);

    fs::create_directories(g.out_dir);
    write_json_file(g.out("model.json"), to_json(model));
    write_json_file(g.out("stats.json"), to_json(stats));
    std::cout << "fit objective " << model.fit_objective << "; wrote " << g.out("model.json")
              << " and " << g.out("stats.json") << '\n';
    return 0;
}

int run_optimize(const GlobalOptions& g, const std::string& model_path, const std::string& stats_path,
                 double daily_budget, double base_bid, std::vector<double> bounds, int starts) {
    LandscapeDocument model = landscape_from_json(read_json_file(model_path));
    StatsDocument stats = stats_from_json(read_json_file(stats_path));
    if (daily_budget <= 0) throw usage_error("optimize: --budget (daily, currency) must be positive");
    FactorBounds fb;
    if (!bounds.empty()) {
        if (bounds.size() != 2) throw usage_error("optimize: --bounds takes exactly two values");
        fb.lo = bounds[0];
        fb.hi = bounds[1];
    }
    SolverOptions solver;
    solver.starts = starts;
    solver.seed = derive_seed(g.seed, "optimize");

    Json plan = optimize_document(model, stats, daily_budget, base_bid, fb, solver);
    fs::create_directories(g.out_dir);
    write_json_file(g.out("plan.json"), plan);
    std::cout << "wrote " << g.out("plan.json") << " (predicted daily revenue "
              << plan["predicted"]["daily_revenue"].dump() << ", spend "
              << plan["predicted"]["daily_spend"].dump() << ")\n";
    return 0;
}

int run_experiment(const GlobalOptions& g, int replications_override) {
    if (g.config_path.empty()) throw usage_error("experiment: --config is required");
    Json doc = read_json_file(g.config_path);
    ExperimentConfig config = experiment_config_from_json(doc);
    if (replications_override > 0) config.replications = replications_override;

    AbReport report = run_experiment(config, g.seed);
    write_experiment_outputs(g.out_dir, report, config);
    std::cout << "experiment complete: " << report.roas_positive << "/" << report.replications.size()
              << " replications with positive ROAS delta (median "
              << report.median_roas_delta << "); outputs under " << g.out_dir << '\n';
    return 0;
}

int run_report(const GlobalOptions& g, const std::string& in_dir, double lambda) {
    DistanceConfig distance;
    distance.lambda = lambda;
    MarginalFitOptions fit_options;
    fit_options.seed = derive_seed(g.seed, "report");
    ReportOutcome outcome = write_report(in_dir, g.out_dir, distance, fit_options);
    if (outcome.no_data) {
        std::cout << "no data\n";
        return 0;
    }
    std::cout << "wrote " << outcome.files.size() << " file(s) under " << g.out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dimensional bid optimization for offsite display campaigns"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--seed", g.seed, "master seed; stage seeds derive from it")
        ->each([&](const std::string&) { g.seed_given = true; });
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_flag("--strict", g.strict, "disable smoothing and clamping fallbacks");

    auto* simulate = app.add_subcommand("simulate", "generate a censored impression log");
    std::string env_path, plan_path;
    int days = 0;
    simulate->add_option("--env", env_path, "environment description file");
    simulate->add_option("--plan", plan_path, "bid plan document (with specs) to serve");
    simulate->add_option("--days", days, "flight length in days");

    auto* segment = app.add_subcommand("segment", "build equal-volume ranked groups");
    std::string log_path, dimension, metric = "rpm";
    GroupingRequest request;
    segment->add_option("--log", log_path, "impression log CSV")->required();
    segment->add_option("--dimension", dimension, "feature column to group")->required();
    segment->add_option("--groups", request.group_count, "number of groups")->required();
    segment->add_option("--metric", metric, "rank metric: rpm, conversion_count, order_count");
    segment->add_option("--min-volume", request.min_volume_threshold, "volume threshold per group");
    segment->add_option("--min-orders", request.min_order_threshold, "total order threshold");
    segment->add_option("--prefix-len", request.value_prefix_len, "truncate values to this prefix");

    auto* evaluate = app.add_subcommand("evaluate", "score groupings: distances, WOE/IV, MI");
    std::vector<std::string> spec_paths;
    double lambda = 1.0;
    int horizon = 0;
    bool plot_data = false;
    evaluate->add_option("--log", log_path, "impression log CSV")->required();
    evaluate->add_option("--spec", spec_paths, "dimension spec JSON (repeatable)")->required();
    evaluate->add_option("--lambda", lambda, "crossover penalty weight");
    evaluate->add_option("--horizon", horizon, "series length in days (default: log span)");
    evaluate->add_flag("--plot-data", plot_data, "emit WOE and RPM curve CSVs");

    auto* fit = app.add_subcommand("fit", "fit CPM lines and the volume model");
    std::string plans_path;
    int fit_starts = 8;
    fit->add_option("--log", log_path, "impression log CSV")->required();
    fit->add_option("--spec", spec_paths, "dimension spec JSON (repeatable)")->required();
    fit->add_option("--plans", plans_path, "served plan history JSON");
    fit->add_option("--starts", fit_starts, "multi-start count");

    auto* optimize = app.add_subcommand("optimize", "solve for bid factors");
    std::string model_path, stats_path;
    double budget = 0, base_bid = 1.0;
    std::vector<double> bounds;
    int solver_starts = 8;
    optimize->add_option("--model", model_path, "landscape model JSON")->required();
    optimize->add_option("--stats", stats_path, "segment stats JSON")->required();
    optimize->add_option("--budget", budget, "daily budget, currency")->required();
    optimize->add_option("--base-bid", base_bid, "base bid, currency per mille");
    optimize->add_option("--bounds", bounds, "factor bounds: lo hi")->expected(2);
    optimize->add_option("--starts", solver_starts, "multi-start count");

    auto* experiment = app.add_subcommand("experiment", "seeded A/B test of the full loop");
    int replications = 0;
    experiment->add_option("--replications", replications, "override the configured replication count");

    auto* report = app.add_subcommand("report", "render plot data from run artifacts");
    std::string in_dir;
    double report_lambda = 1.0;
    report->add_option("--in", in_dir, "directory with log/plan artifacts")->required();
    report->add_option("--lambda", report_lambda, "crossover penalty weight");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }

    try {
        if (simulate->parsed()) return run_simulate(g, env_path, plan_path, days);
        if (segment->parsed()) {
            request.dimension = dimension;
            request.rank_metric = rank_metric_from_string(metric);
            return run_segment(g, log_path, request);
        }
        if (evaluate->parsed())
            return run_evaluate(g, log_path, spec_paths, lambda, horizon, plot_data);
        if (fit->parsed()) return run_fit(g, log_path, spec_paths, plans_path, fit_starts);
        if (optimize->parsed())
            return run_optimize(g, model_path, stats_path, budget, base_bid, bounds, solver_starts);
        if (experiment->parsed()) return run_experiment(g, replications);
        if (report->parsed()) return run_report(g, in_dir, report_lambda);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::usage: return 1;
            case ErrorKind::data: return 2;
            case ErrorKind::solver: return 3;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
