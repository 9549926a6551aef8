#include "dimbid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dimbid/aggregate.hpp"
#include "dimbid/error.hpp"
#include "dimbid/log_io.hpp"

namespace dimbid {

namespace fs = std::filesystem;

std::vector<PlanVolumeObservation> collect_plan_volume_history(
    const ImpressionLog& log, std::span<const DimensionSpec> specs,
    std::span<const ServedPlanRecord> served, DayRange days, double base_bid,
    std::vector<std::vector<std::vector<CpmObservation>>>* cpm_observations) {
    const int K = static_cast<int>(specs.size());
    if (cpm_observations) {
        cpm_observations->assign(static_cast<std::size_t>(K), {});
        for (int k = 0; k < K; ++k)
            (*cpm_observations)[static_cast<std::size_t>(k)].resize(
                static_cast<std::size_t>(specs[static_cast<std::size_t>(k)].group_count));
    }

    std::vector<PlanVolumeObservation> history;
    for (int d = days.first; d <= days.last; ++d) {
        PlanVolumeObservation obs;
        obs.plan.base_bid = base_bid;
        const ServedPlanRecord* record = nullptr;
        for (const auto& r : served)
            if (r.from_day <= d) record = &r;
        for (int k = 0; k < K; ++k) {
            const auto& spec = specs[static_cast<std::size_t>(k)];
            std::vector<double> f(static_cast<std::size_t>(spec.group_count), 1.0);
            if (record) {
                const auto& plan = record->decision.plan;
                for (int pk = 0; pk < plan.dimension_count(); ++pk)
                    if (record->decision.specs[static_cast<std::size_t>(pk)].name == spec.name &&
                        plan.factors[static_cast<std::size_t>(pk)].size() == f.size())
                        f = plan.factors[static_cast<std::size_t>(pk)];
            }
            obs.plan.factors.push_back(std::move(f));
        }

        obs.volumes.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const auto& spec = specs[static_cast<std::size_t>(k)];
            auto agg = aggregate(log, spec, DayRange{d, d});
            auto& vols = obs.volumes[static_cast<std::size_t>(k)];
            vols.resize(static_cast<std::size_t>(spec.group_count));
            for (int g = 0; g < spec.group_count; ++g) {
                const auto& st = agg.groups[static_cast<std::size_t>(g)];
                vols[static_cast<std::size_t>(g)] = static_cast<double>(st.volume);
                if (cpm_observations && st.has_rates())
                    (*cpm_observations)[static_cast<std::size_t>(k)][static_cast<std::size_t>(g)]
                        .push_back(CpmObservation{
                            obs.plan.factors[static_cast<std::size_t>(k)][static_cast<std::size_t>(g)],
                            st.cpm(), static_cast<double>(st.volume)});
            }
        }
        history.push_back(std::move(obs));
    }
    return history;
}

namespace {

CpmModel ratio_cpm_model(const std::vector<CpmObservation>& obs, double base_bid) {
    double wf = 0, wy = 0;
    for (const auto& o : obs) {
        wf += o.weight * o.factor;
        wy += o.weight * o.cpm;
    }
    CpmModel m;
    m.intercept = 0.0;
    m.slope = wf > 0 ? wy / wf : base_bid;
    return m;
}

}  // namespace

LandscapeDocument fit_landscape(const ImpressionLog& log, std::span<const DimensionSpec> specs,
                                std::span<const ServedPlanRecord> served, DayRange days,
                                double base_bid, const MarginalFitOptions& options) {
    std::vector<std::vector<std::vector<CpmObservation>>> cpm_obs;
    auto history = collect_plan_volume_history(log, specs, served, days, base_bid, &cpm_obs);

    LandscapeDocument doc;
    for (const auto& s : specs) doc.dimensions.push_back(s.name);
    auto fit = fit_volume_marginal(history, options);
    doc.volume = std::move(fit.model);
    doc.fit_objective = fit.objective;

    doc.cpm.resize(specs.size());
    for (std::size_t k = 0; k < specs.size(); ++k)
        for (const auto& obs : cpm_obs[k]) {
            CpmModel m;
            try {
                m = fit_cpm(obs).model;
                if (m.intercept < 0) m = ratio_cpm_model(obs, base_bid);
            } catch (const Error&) {
                m = ratio_cpm_model(obs, base_bid);
            }
            doc.cpm[k].push_back(m);
        }
    return doc;
}

StatsDocument collect_stats(const ImpressionLog& log, std::span<const DimensionSpec> specs,
                            DayRange days) {
    StatsDocument doc;
    doc.days = days;
    for (const auto& spec : specs) {
        auto agg = aggregate(log, spec, days);
        StatsDocument::Dimension dim;
        dim.name = spec.name;
        dim.groups = std::move(agg.groups);
        dim.overflow = agg.overflow;
        doc.dimensions.push_back(std::move(dim));
    }
    return doc;
}

Json optimize_document(const LandscapeDocument& model, const StatsDocument& stats,
                       double daily_budget, double base_bid, FactorBounds bounds,
                       const SolverOptions& solver) {
    if (model.dimensions.size() != stats.dimensions.size())
        throw data_error("optimize: model and stats dimension counts differ");

    OverlappingInstance inst;
    inst.volume = model.volume;
    inst.cpm = model.cpm;
    inst.bounds = bounds;
    inst.budget = daily_budget * 1000.0;  // currency -> volume*CPM units
    inst.rpm.resize(stats.dimensions.size());
    for (std::size_t k = 0; k < stats.dimensions.size(); ++k) {
        if (model.dimensions[k] != stats.dimensions[k].name)
            throw data_error("optimize: dimension order mismatch between model and stats");
        for (const auto& g : stats.dimensions[k].groups)
            inst.rpm[k].push_back(g.has_rates() ? g.rpm() : 0.0);
    }

    OverlappingSolution sol = solve_overlapping(inst, solver);

    BidPlan plan;
    plan.base_bid = base_bid;
    plan.dimension_names = model.dimensions;
    plan.factors = sol.factors;

    // Per-dimension spend identity, reported as a diagnostic: the undivided
    // sums over any one dimension should all approximate total daily spend.
    Json per_dim_spend = Json::array();
    {
        BidPlan shim;
        shim.base_bid = 1.0;
        shim.factors = sol.factors;
        auto volumes = predict_volume_marginal(model.volume, shim);
        for (std::size_t k = 0; k < volumes.size(); ++k) {
            double s = 0;
            for (std::size_t i = 0; i < volumes[k].size(); ++i)
                s += volumes[k][i] * predict_cpm(model.cpm[k][i], sol.factors[k][i]);
            per_dim_spend.push_back(s / 1000.0);  // back to currency
        }
    }

    Json doc = to_json(plan);
    doc["predicted"] = Json{{"daily_revenue", sol.revenue / 1000.0},
                            {"daily_spend", sol.spend / 1000.0}};
    doc["diagnostics"] = Json{{"objective", sol.objective},
                              {"best_start", sol.best_start},
                              {"budget_active", sol.budget_active},
                              {"per_dimension_daily_spend", std::move(per_dim_spend)}};
    return doc;
}

ExperimentConfig experiment_config_from_json(const Json& doc) {
    ExperimentConfig cfg;
    if (doc.contains("env_file")) {
        cfg.env = environment_from_json(read_json_file(doc.at("env_file").get<std::string>()));
    } else {
        cfg.env = environment_from_json(doc.at("env"));
    }
    cfg.campaign = campaign_config_from_json(doc.at("campaign"));
    for (const auto& s : doc.at("segmentation"))
        cfg.segmentation.push_back(grouping_request_from_json(s));
    if (cfg.segmentation.empty()) throw data_error("experiment: no segmentation dimensions");
    if (doc.contains("solver")) {
        cfg.solver.starts = doc.at("solver").value("starts", 8);
        cfg.solver.max_iterations = doc.at("solver").value("max_iterations", 2000);
    }
    if (doc.contains("volume_fit")) {
        cfg.volume_fit.starts = doc.at("volume_fit").value("starts", 8);
        cfg.volume_fit.max_iterations = doc.at("volume_fit").value("max_iterations", 10000);
        cfg.volume_fit.tolerance = doc.at("volume_fit").value("tolerance", 1e-10);
    }
    cfg.exploration_amplitude = doc.value("exploration_amplitude", 0.25);
    cfg.replications = doc.value("replications", 1);
    if (doc.contains("distance")) {
        cfg.distance.lambda = doc.at("distance").value("lambda", 1.0);
    }
    cfg.distance.horizon = cfg.campaign.flight_days;
    return cfg;
}

AbReport run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
    PipelineControllerConfig ctrl;
    ctrl.campaign = config.campaign;
    ctrl.segmentation = config.segmentation;
    ctrl.solver = config.solver;
    ctrl.volume_fit = config.volume_fit;
    ctrl.exploration_amplitude = config.exploration_amplitude;

    ControllerFactory test = [ctrl](std::uint64_t s) { return make_pipeline_controller(ctrl, s); };
    const double base_bid = config.campaign.base_bid;
    ControllerFactory control = [base_bid](std::uint64_t) { return make_uniform_controller(base_bid); };
    return ab_experiment(config.env, test, control, config.replications,
                         derive_seed(seed, "experiment"), config.campaign);
}

namespace {

std::string format(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

CampaignMetrics median_metrics(const std::vector<ReplicationOutcome>& reps, bool test_arm) {
    // median per metric, reported metric-wise like the campaign summary table
    auto med = [&](auto field) {
        std::vector<double> v;
        for (const auto& r : reps) v.push_back(field(test_arm ? r.test : r.control));
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    CampaignMetrics m;
    m.volume = static_cast<std::int64_t>(med([](const CampaignMetrics& x) { return double(x.volume); }));
    m.orders = static_cast<std::int64_t>(med([](const CampaignMetrics& x) { return double(x.orders); }));
    m.cost_micros = static_cast<Micros>(med([](const CampaignMetrics& x) { return double(x.cost_micros); }));
    m.sales_micros = static_cast<Micros>(med([](const CampaignMetrics& x) { return double(x.sales_micros); }));
    return m;
}

Json metrics_to_json(const CampaignMetrics& m) {
    return Json{{"volume", m.volume},
                {"orders", m.orders},
                {"cost", to_currency(m.cost_micros)},
                {"sales", to_currency(m.sales_micros)},
                {"roas", m.roas()},
                {"transaction_rate", m.transaction_rate()},
                {"ecpm", m.ecpm()}};
}

void write_rpm_curves(const std::string& path, const ImpressionLog& log, const DimensionSpec& spec,
                      int horizon) {
    std::ofstream out(path);
    out << "day";
    for (int g = 0; g < spec.group_count; ++g) out << ",group_" << g;
    out << '\n';
    std::vector<RpmSeries> series;
    for (int g = 0; g < spec.group_count; ++g)
        series.push_back(accumulative_rpm_series(log, spec, g, horizon));
    for (int t = 0; t < horizon; ++t) {
        out << t;
        for (int g = 0; g < spec.group_count; ++g)
            out << ',' << format("%.10g", series[static_cast<std::size_t>(g)].rpm[static_cast<std::size_t>(t)]);
        out << '\n';
    }
}

void write_woe(const std::string& path, const ImpressionLog& log, const DimensionSpec& spec) {
    auto table = GroupShareTable::from_log(log, spec);
    auto woe = modified_woe(table);
    std::ofstream out(path);
    out << "group,woe,conversion_share,impression_share\n";
    for (std::size_t g = 0; g < woe.size(); ++g)
        out << g << ',' << format("%.10g", woe[g]) << ',' << format("%.10g", table.conversion_share[g])
            << ',' << format("%.10g", table.impression_share[g]) << '\n';
}

}  // namespace

void write_experiment_outputs(const std::string& out_dir, const AbReport& report,
                              const ExperimentConfig& config) {
    fs::create_directories(out_dir);
    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    // replication table
    {
        std::ofstream out(path("replications.csv"));
        out << "replication,test_cost,test_sales,test_roas,test_trans,test_ecpm,"
               "control_cost,control_sales,control_roas,control_trans,control_ecpm,"
               "roas_delta,ecpm_delta,trans_delta\n";
        for (std::size_t r = 0; r < report.replications.size(); ++r) {
            const auto& rep = report.replications[r];
            out << r << ',' << format("%.10g", to_currency(rep.test.cost_micros)) << ','
                << format("%.10g", to_currency(rep.test.sales_micros)) << ','
                << format("%.10g", rep.test.roas()) << ',' << format("%.10g", rep.test.transaction_rate())
                << ',' << format("%.10g", rep.test.ecpm()) << ','
                << format("%.10g", to_currency(rep.control.cost_micros)) << ','
                << format("%.10g", to_currency(rep.control.sales_micros)) << ','
                << format("%.10g", rep.control.roas()) << ','
                << format("%.10g", rep.control.transaction_rate()) << ','
                << format("%.10g", rep.control.ecpm()) << ',' << format("%.10g", rep.roas_delta())
                << ',' << format("%.10g", rep.ecpm_delta()) << ',' << format("%.10g", rep.trans_delta())
                << '\n';
        }
    }

    const CampaignMetrics med_test = median_metrics(report.replications, true);
    const CampaignMetrics med_control = median_metrics(report.replications, false);

    // Table-style human summary
    {
        std::ofstream out(path("summary.txt"));
        out << "A/B experiment over " << report.replications.size() << " replication(s)\n\n";
        out << "arm      cost        sales       ROAS     trans %   eCPM\n";
        auto line = [&](const char* arm, const CampaignMetrics& m) {
            out << arm << "  " << format("%-10.4f", to_currency(m.cost_micros)) << "  "
                << format("%-10.4f", to_currency(m.sales_micros)) << "  " << format("%-7.4f", m.roas())
                << "  " << format("%-7.4f", m.transaction_rate() * 100.0) << "  "
                << format("%.4f", m.ecpm()) << '\n';
        };
        line("control", med_control);
        line("test   ", med_test);
        out << '\n';
        out << "median ROAS delta:  " << format("%.6f", report.median_roas_delta) << '\n';
        out << "median eCPM delta:  " << format("%.6f", report.median_ecpm_delta) << '\n';
        out << "median trans delta: " << format("%.6f", report.median_trans_delta) << '\n';
        out << "ROAS sign test:     " << report.roas_positive << "/" << report.replications.size()
            << " positive, one-sided p = " << format("%.6g", report.sign_test_p) << '\n';
    }

    // machine summary
    {
        Json doc;
        doc["replications"] = report.replications.size();
        doc["median"] = Json{{"test", metrics_to_json(med_test)},
                             {"control", metrics_to_json(med_control)},
                             {"roas_delta", report.median_roas_delta},
                             {"ecpm_delta", report.median_ecpm_delta},
                             {"trans_delta", report.median_trans_delta}};
        doc["sign_test"] = Json{{"roas_positive", report.roas_positive},
                                {"p_one_sided", report.sign_test_p}};
        doc["median_replication"] = report.median_replication;
        Json reps = Json::array();
        for (const auto& r : report.replications)
            reps.push_back(Json{{"test", metrics_to_json(r.test)}, {"control", metrics_to_json(r.control)}});
        doc["per_replication"] = std::move(reps);
        write_json_file(path("summary.json"), doc);
    }

    write_log_file(path("log_test.csv"), report.sample_test_log);
    write_log_file(path("log_control.csv"), report.sample_control_log);
    write_json_file(path("plans.json"), served_history_to_json(report.sample_test_served));

    // plot data from the sample test log, per dimension, once groups exist
    if (!report.sample_test_served.empty()) {
        const auto& last = report.sample_test_served.back().decision;
        for (const auto& spec : last.specs) {
            write_rpm_curves(path("rpm_curves_" + spec.name + ".csv"), report.sample_test_log, spec,
                             config.campaign.flight_days);
            write_woe(path("woe_" + spec.name + ".csv"), report.sample_test_log, spec);
        }
    }
}

ReportOutcome write_report(const std::string& in_dir, const std::string& out_dir,
                           const DistanceConfig& distance, const MarginalFitOptions& fit_options) {
    ReportOutcome outcome;
    fs::create_directories(out_dir);
    const auto in = [&](const std::string& name) { return (fs::path(in_dir) / name).string(); };
    const auto out_path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    std::string log_path = in("log_test.csv");
    if (!fs::exists(log_path)) log_path = in("log.csv");
    std::ofstream manifest(out_path("manifest.txt"));
    std::ofstream summary(out_path("report.txt"));

    if (!fs::exists(log_path)) {
        summary << "no data: no log found under " << in_dir << '\n';
        outcome.no_data = true;
        outcome.files.push_back("report.txt");
        manifest << "report.txt\n";
        return outcome;
    }
    ImpressionLog log = ingest_log_file(log_path);
    if (log.records.empty()) {
        summary << "no data: log is empty\n";
        outcome.no_data = true;
        outcome.files.push_back("report.txt");
        manifest << "report.txt\n";
        return outcome;
    }

    std::vector<ServedPlanRecord> served;
    if (fs::exists(in("plans.json")))
        served = served_history_from_json(read_json_file(in("plans.json")));
    std::vector<DimensionSpec> specs;
    double base_bid = 1.0;
    for (auto it = served.rbegin(); it != served.rend(); ++it)
        if (!it->decision.specs.empty()) {
            specs = it->decision.specs;
            base_bid = it->decision.plan.base_bid;
            break;
        }

    int horizon = 0;
    for (const auto& r : log.records) horizon = std::max(horizon, r.day + 1);

    summary << "log: " << log.records.size() << " impressions over " << horizon << " day(s)\n";

    for (const auto& spec : specs) {
        write_rpm_curves(out_path("rpm_curves_" + spec.name + ".csv"), log, spec, horizon);
        outcome.files.push_back("rpm_curves_" + spec.name + ".csv");
        write_woe(out_path("woe_" + spec.name + ".csv"), log, spec);
        outcome.files.push_back("woe_" + spec.name + ".csv");
        if (spec.group_count >= 2) {
            DistanceConfig cfg = distance;
            cfg.horizon = horizon;
            auto sep = dimension_separation(log, spec, cfg);
            summary << "dimension " << spec.name << ": median pairwise distance "
                    << format("%.6g", sep.median) << ", mean " << format("%.6g", sep.mean) << '\n';
        }
        auto table = GroupShareTable::from_log(log, spec);
        summary << "dimension " << spec.name << ": IV = " << format("%.6g", information_value(table))
                << '\n';
    }

    // one-step-ahead predicted vs observed volume scatter
    if (!specs.empty() && !served.empty()) {
        std::ofstream scatter(out_path("volume_scatter.csv"));
        scatter << "day,dimension,group,predicted,observed\n";
        auto history = collect_plan_volume_history(log, specs, served, DayRange{0, horizon - 1}, base_bid);
        std::vector<double> preds, obs;
        for (int d = 4; d < horizon; ++d) {
            std::span<const PlanVolumeObservation> past(history.data(), static_cast<std::size_t>(d));
            MarginalFitResult fit;
            try {
                fit = fit_volume_marginal(past, fit_options);
            } catch (const Error&) {
                continue;
            }
            auto predicted = predict_volume_marginal(fit.model, history[static_cast<std::size_t>(d)].plan);
            for (std::size_t k = 0; k < predicted.size(); ++k)
                for (std::size_t i = 0; i < predicted[k].size(); ++i) {
                    const double p = predicted[k][i];
                    const double o = history[static_cast<std::size_t>(d)].volumes[k][i];
                    scatter << d << ',' << specs[k].name << ',' << i << ',' << format("%.10g", p)
                            << ',' << format("%.10g", o) << '\n';
                    preds.push_back(p);
                    obs.push_back(o);
                }
        }
        outcome.files.push_back("volume_scatter.csv");
        if (preds.size() >= 3) {
            double mp = 0, mo = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                mp += preds[i];
                mo += obs[i];
            }
            mp /= static_cast<double>(preds.size());
            mo /= static_cast<double>(preds.size());
            double spo = 0, spp = 0, soo = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                spo += (preds[i] - mp) * (obs[i] - mo);
                spp += (preds[i] - mp) * (preds[i] - mp);
                soo += (obs[i] - mo) * (obs[i] - mo);
            }
            if (spp > 0 && soo > 0) {
                outcome.volume_correlation = spo / std::sqrt(spp * soo);
                summary << "volume model one-step-ahead correlation: "
                        << format("%.6f", *outcome.volume_correlation) << " over " << preds.size()
                        << " points\n";
            }
        }
    }

    outcome.files.push_back("report.txt");
    std::sort(outcome.files.begin(), outcome.files.end());
    for (const auto& f : outcome.files) manifest << f << '\n';
    return outcome;
}

}  // namespace dimbid
