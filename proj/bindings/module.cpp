#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dimbid/aggregate.hpp"
#include "dimbid/controller.hpp"
#include "dimbid/error.hpp"
#include "dimbid/evaluation.hpp"
#include "dimbid/log_io.hpp"
#include "dimbid/optimizer.hpp"
#include "dimbid/pipeline.hpp"
#include "dimbid/segmentation.hpp"
#include "dimbid/serialize.hpp"
#include "dimbid/simulator.hpp"

namespace py = pybind11;
using namespace dimbid;

namespace {

ImpressionLog log_from_csv(const std::string& text) {
    std::istringstream in(text);
    return ingest_log(in);
}

std::string log_to_csv(const ImpressionLog& log) {
    std::ostringstream out;
    write_log(out, log);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_dimbid, m) {
    m.doc() = "dimensional bid optimization core";

    py::register_exception<Error>(m, "DimbidError");

    py::class_<ImpressionRecord>(m, "ImpressionRecord")
        .def(py::init<>())
        .def_readwrite("day", &ImpressionRecord::day)
        .def_readwrite("id", &ImpressionRecord::id)
        .def_readwrite("features", &ImpressionRecord::features)
        .def_readwrite("cost_micros", &ImpressionRecord::cost_micros)
        .def_readwrite("revenue_micros", &ImpressionRecord::revenue_micros)
        .def_readwrite("converted", &ImpressionRecord::converted);

    py::class_<ImpressionLog>(m, "ImpressionLog")
        .def(py::init<>())
        .def_readwrite("feature_names", &ImpressionLog::feature_names)
        .def_readwrite("records", &ImpressionLog::records)
        .def("__len__", [](const ImpressionLog& l) { return l.records.size(); });

    m.def("ingest_log", &log_from_csv, py::arg("csv_text"));
    m.def("ingest_log_file", &ingest_log_file, py::arg("path"));
    m.def("write_log", &log_to_csv, py::arg("log"));

    py::class_<DimensionSpec>(m, "DimensionSpec")
        .def(py::init<>())
        .def_readwrite("name", &DimensionSpec::name)
        .def_readwrite("group_of", &DimensionSpec::group_of)
        .def_readwrite("group_count", &DimensionSpec::group_count)
        .def_readwrite("value_prefix_len", &DimensionSpec::value_prefix_len)
        .def("group_for", [](const DimensionSpec& s, const std::string& v) { return s.group_for(v); })
        .def("to_json", [](const DimensionSpec& s) { return to_json(s).dump(2); })
        .def_static("from_json",
                    [](const std::string& text) { return dimension_spec_from_json(Json::parse(text)); });

    py::class_<SegmentStats>(m, "SegmentStats")
        .def_readonly("volume", &SegmentStats::volume)
        .def_readonly("spend_micros", &SegmentStats::spend_micros)
        .def_readonly("revenue_micros", &SegmentStats::revenue_micros)
        .def_readonly("conversions", &SegmentStats::conversions)
        .def_property_readonly("defined", &SegmentStats::has_rates)
        .def_property_readonly("cpm", [](const SegmentStats& s) -> py::object {
            return s.has_rates() ? py::cast(s.cpm()) : py::none();
        })
        .def_property_readonly("rpm", [](const SegmentStats& s) -> py::object {
            return s.has_rates() ? py::cast(s.rpm()) : py::none();
        });

    py::class_<AggregateResult>(m, "AggregateResult")
        .def_readonly("groups", &AggregateResult::groups)
        .def_readonly("overflow", &AggregateResult::overflow);

    m.def(
        "aggregate",
        [](const ImpressionLog& log, const DimensionSpec& spec, int day_first, int day_last,
           bool strict) { return aggregate(log, spec, DayRange{day_first, day_last}, strict); },
        py::arg("log"), py::arg("spec"), py::arg("day_first") = 0,
        py::arg("day_last") = 1 << 30, py::arg("strict") = false);

    m.def(
        "accumulative_rpm_series",
        [](const ImpressionLog& log, const DimensionSpec& spec, int group, int horizon) {
            auto s = accumulative_rpm_series(log, spec, group, horizon);
            std::vector<bool> defined(s.defined.begin(), s.defined.end());
            return py::make_tuple(s.rpm, defined);
        },
        py::arg("log"), py::arg("spec"), py::arg("group"), py::arg("horizon"));

    py::class_<GroupingRequest>(m, "GroupingRequest")
        .def(py::init<>())
        .def_readwrite("dimension", &GroupingRequest::dimension)
        .def_readwrite("group_count", &GroupingRequest::group_count)
        .def_property(
            "metric", [](const GroupingRequest& r) { return to_string(r.rank_metric); },
            [](GroupingRequest& r, const std::string& m) { r.rank_metric = rank_metric_from_string(m); })
        .def_readwrite("min_volume_threshold", &GroupingRequest::min_volume_threshold)
        .def_readwrite("min_order_threshold", &GroupingRequest::min_order_threshold)
        .def_readwrite("value_prefix_len", &GroupingRequest::value_prefix_len)
        .def_readwrite("warmup_days", &GroupingRequest::warmup_days);

    m.def(
        "build_groups",
        [](const ImpressionLog& log, const GroupingRequest& request)
            -> py::object {
            auto outcome = build_groups(log, request);
            if (!outcome.ready()) return py::none();
            return py::cast(*outcome.spec);
        },
        py::arg("log"), py::arg("request"));

    py::class_<CpmModel>(m, "CpmModel")
        .def(py::init<>())
        .def(py::init([](double a, double b) {
                 CpmModel m2;
                 m2.intercept = a;
                 m2.slope = b;
                 return m2;
             }),
             py::arg("intercept"), py::arg("slope"))
        .def_readwrite("intercept", &CpmModel::intercept)
        .def_readwrite("slope", &CpmModel::slope);

    m.def(
        "fit_cpm",
        [](const std::vector<std::tuple<double, double, double>>& points) {
            std::vector<CpmObservation> obs;
            for (const auto& [f, y, w] : points) obs.push_back(CpmObservation{f, y, w});
            auto fit = fit_cpm(obs);
            return py::make_tuple(fit.model, fit.rss);
        },
        py::arg("observations"));
    m.def("predict_cpm", &predict_cpm, py::arg("model"), py::arg("factor"));

    py::class_<MarginalVolumeModel>(m, "MarginalVolumeModel")
        .def(py::init<>())
        .def(py::init([](std::vector<double> a, std::vector<std::vector<double>> b) {
                 MarginalVolumeModel mm;
                 mm.intercepts = std::move(a);
                 mm.betas = std::move(b);
                 return mm;
             }),
             py::arg("intercepts"), py::arg("betas"))
        .def_readwrite("intercepts", &MarginalVolumeModel::intercepts)
        .def_readwrite("betas", &MarginalVolumeModel::betas);

    py::class_<BidPlan>(m, "BidPlan")
        .def(py::init<>())
        .def(py::init([](double base_bid, std::vector<std::vector<double>> factors) {
                 BidPlan p;
                 p.base_bid = base_bid;
                 p.factors = std::move(factors);
                 return p;
             }),
             py::arg("base_bid"), py::arg("factors"))
        .def_readwrite("base_bid", &BidPlan::base_bid)
        .def_readwrite("dimension_names", &BidPlan::dimension_names)
        .def_readwrite("factors", &BidPlan::factors);

    m.def(
        "predict_volume_marginal",
        [](const MarginalVolumeModel& model, const std::vector<std::vector<double>>& factors) {
            BidPlan plan;
            plan.base_bid = 1.0;
            plan.factors = factors;
            return predict_volume_marginal(model, plan);
        },
        py::arg("model"), py::arg("factors"));

    m.def(
        "fit_volume_marginal",
        [](const std::vector<std::pair<std::vector<std::vector<double>>,
                                       std::vector<std::vector<double>>>>& history,
           std::uint64_t seed, int starts) {
            std::vector<PlanVolumeObservation> obs;
            for (const auto& [factors, volumes] : history) {
                PlanVolumeObservation o;
                o.plan.base_bid = 1.0;
                o.plan.factors = factors;
                o.volumes = volumes;
                obs.push_back(std::move(o));
            }
            MarginalFitOptions options;
            options.seed = seed;
            options.starts = starts;
            auto fit = fit_volume_marginal(obs, options);
            return py::make_tuple(fit.model, fit.objective);
        },
        py::arg("history"), py::arg("seed") = 0, py::arg("starts") = 8);

    py::class_<DisjointSolution>(m, "DisjointSolution")
        .def_readonly("factors", &DisjointSolution::factors)
        .def_readonly("spend", &DisjointSolution::spend)
        .def_readonly("revenue", &DisjointSolution::revenue);

    m.def(
        "solve_disjoint",
        [](const std::vector<double>& rpm, const std::vector<double>& beta, double budget) {
            return solve_disjoint(DisjointInstance{rpm, beta, budget});
        },
        py::arg("rpm"), py::arg("beta"), py::arg("budget"));

    py::class_<OverlappingInstance>(m, "OverlappingInstance")
        .def(py::init<>())
        .def_readwrite("volume", &OverlappingInstance::volume)
        .def_readwrite("cpm", &OverlappingInstance::cpm)
        .def_readwrite("rpm", &OverlappingInstance::rpm)
        .def_readwrite("budget", &OverlappingInstance::budget)
        .def_property(
            "bounds",
            [](const OverlappingInstance& i) { return py::make_tuple(i.bounds.lo, i.bounds.hi); },
            [](OverlappingInstance& i, std::pair<double, double> b) {
                i.bounds.lo = b.first;
                i.bounds.hi = b.second;
            })
        .def("revenue_at", &OverlappingInstance::revenue_at)
        .def("spend_at", &OverlappingInstance::spend_at);

    py::class_<OverlappingSolution>(m, "OverlappingSolution")
        .def_readonly("factors", &OverlappingSolution::factors)
        .def_readonly("revenue", &OverlappingSolution::revenue)
        .def_readonly("spend", &OverlappingSolution::spend)
        .def_readonly("objective", &OverlappingSolution::objective)
        .def_readonly("best_start", &OverlappingSolution::best_start)
        .def_readonly("budget_active", &OverlappingSolution::budget_active);

    m.def(
        "solve_overlapping",
        [](const OverlappingInstance& inst, std::uint64_t seed, int starts) {
            SolverOptions options;
            options.seed = seed;
            options.starts = starts;
            return solve_overlapping(inst, options);
        },
        py::arg("instance"), py::arg("seed") = 0, py::arg("starts") = 8);

    m.def(
        "effective_bid",
        [](const BidPlan& plan, const std::vector<int>& groups) { return effective_bid(plan, groups); },
        py::arg("plan"), py::arg("groups"));

    m.def("crossover_ratio",
          [](const std::vector<double>& a, const std::vector<double>& b) { return crossover_ratio(a, b); });
    m.def(
        "pairwise_distance",
        [](const std::vector<double>& a, const std::vector<double>& b, double lambda) {
            return pairwise_distance(a, b, lambda);
        },
        py::arg("a"), py::arg("b"), py::arg("lambda") = 1.0);

    m.def(
        "modified_woe",
        [](const std::vector<std::int64_t>& conversions, const std::vector<std::int64_t>& impressions,
           double smoothing, bool strict) {
            return modified_woe(GroupShareTable::from_counts(conversions, impressions, smoothing, strict));
        },
        py::arg("conversions"), py::arg("impressions"), py::arg("smoothing") = 0.5,
        py::arg("strict") = false);
    m.def(
        "information_value",
        [](const std::vector<std::int64_t>& conversions, const std::vector<std::int64_t>& impressions,
           double smoothing, bool strict) {
            return information_value(GroupShareTable::from_counts(conversions, impressions, smoothing, strict));
        },
        py::arg("conversions"), py::arg("impressions"), py::arg("smoothing") = 0.5,
        py::arg("strict") = false);
    m.def(
        "mutual_information",
        [](const std::vector<std::vector<std::vector<std::int64_t>>>& counts) {
            const int rows = static_cast<int>(counts.size());
            const int cols = rows > 0 ? static_cast<int>(counts[0].size()) : 0;
            auto table = ContingencyTable::zeros(rows, cols);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    for (int y = 0; y < 2; ++y)
                        table.at(i, j, y) = counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                                                  [static_cast<std::size_t>(y)];
            return mutual_information(table);
        },
        py::arg("counts"));

    m.def(
        "load_environment",
        [](const std::string& path) { return environment_from_json(read_json_file(path)); },
        py::arg("path"));
    py::class_<SimEnvironment>(m, "SimEnvironment")
        .def_readwrite("seed", &SimEnvironment::seed)
        .def_readonly("base_bid", &SimEnvironment::base_bid)
        .def_property_readonly("dimension_names", [](const SimEnvironment& e) {
            std::vector<std::string> names;
            for (const auto& d : e.dimensions) names.push_back(d.name);
            return names;
        });

    py::class_<CampaignMetrics>(m, "CampaignMetrics")
        .def_readonly("volume", &CampaignMetrics::volume)
        .def_readonly("orders", &CampaignMetrics::orders)
        .def_property_readonly("cost", [](const CampaignMetrics& m2) { return to_currency(m2.cost_micros); })
        .def_property_readonly("sales",
                               [](const CampaignMetrics& m2) { return to_currency(m2.sales_micros); })
        .def_property_readonly("roas", &CampaignMetrics::roas)
        .def_property_readonly("ecpm", &CampaignMetrics::ecpm)
        .def_property_readonly("transaction_rate", &CampaignMetrics::transaction_rate);

    m.def(
        "run_uniform_campaign",
        [](const SimEnvironment& env, int flight_days, int cadence) {
            CampaignConfig config;
            config.budget_per_period_micros = 1;
            config.flight_days = flight_days;
            config.base_bid = env.base_bid;
            config.adjustment_cadence_days = cadence;
            config.attribution_window_days = env.attribution_window_days;
            auto result = run_campaign(env, make_uniform_controller(env.base_bid), config);
            return py::make_tuple(result.metrics, log_to_csv(result.final_log));
        },
        py::arg("env"), py::arg("flight_days"), py::arg("cadence") = 2);

    m.def(
        "run_experiment_config",
        [](const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
            ExperimentConfig config = experiment_config_from_json(read_json_file(config_path));
            AbReport report = run_experiment(config, seed);
            if (!out_dir.empty()) write_experiment_outputs(out_dir, report, config);
            return py::make_tuple(report.median_roas_delta, report.roas_positive,
                                  static_cast<int>(report.replications.size()));
        },
        py::arg("config_path"), py::arg("seed") = 0, py::arg("out_dir") = "");
}
