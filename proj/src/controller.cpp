#include "dimbid/controller.hpp"

#include <algorithm>
#include <cmath>

#include "dimbid/aggregate.hpp"
#include "dimbid/error.hpp"
#include "dimbid/pipeline.hpp"
#include "dimbid/rng.hpp"

namespace dimbid {

Controller make_uniform_controller(double base_bid) {
    return [base_bid](const ImpressionLog&, int, std::span<const ServedPlanRecord>) {
        ControllerDecision d;
        d.plan.base_bid = base_bid;
        return d;
    };
}

Controller make_fixed_controller(ControllerDecision decision) {
    return [decision](const ImpressionLog&, int, std::span<const ServedPlanRecord>) {
        return decision;
    };
}

namespace {

class PipelineController {
public:
    PipelineController(PipelineControllerConfig config, std::uint64_t seed,
                       std::shared_ptr<PipelineDiagnostics> diagnostics)
        : config_(std::move(config)), seed_(seed), diagnostics_(std::move(diagnostics)) {
        for (const auto& req : config_.segmentation) schedulers_.emplace_back(req);
    }

    ControllerDecision operator()(const ImpressionLog& log, int day,
                                  std::span<const ServedPlanRecord> served) {
        if (diagnostics_) ++diagnostics_->decisions;

        if (!specs_) {
            std::vector<DimensionSpec> specs;
            for (auto& sched : schedulers_) {
                const auto& s = sched.on_day(log, day);
                if (!s) break;
                specs.push_back(*s);
            }
            if (specs.size() == schedulers_.size() && !specs.empty()) {
                specs_ = std::move(specs);
                freeze_day_ = day;
            }
        }
        if (!specs_) {
            // warmup: base bid, no dimensions
            ControllerDecision d;
            d.plan.base_bid = config_.campaign.base_bid;
            return d;
        }

        const auto history = collect_history(log, day, served);
        ControllerDecision decision;
        decision.specs = *specs_;
        decision.plan.base_bid = config_.campaign.base_bid;
        decision.plan.dimension_names.clear();
        for (const auto& s : *specs_) decision.plan.dimension_names.push_back(s.name);

        MarginalFitResult fit;
        try {
            MarginalFitOptions opts = config_.volume_fit;
            opts.seed = derive_seed(seed_, "volume-fit", static_cast<std::uint64_t>(day));
            fit = fit_volume_marginal(history, opts);
        } catch (const Error&) {
            decision.plan.factors = exploration_factors(day);
            if (diagnostics_) ++diagnostics_->explorations;
            return decision;
        }
        if (diagnostics_) diagnostics_->last_fit_objective = fit.objective;

        try {
            OverlappingInstance instance = build_instance(log, day, history, fit.model);
            SolverOptions solver = config_.solver;
            solver.seed = derive_seed(seed_, "solver", static_cast<std::uint64_t>(day));
            OverlappingSolution sol = solve_overlapping(instance, solver);
            decision.plan.factors = sol.factors;
            if (diagnostics_) {
                ++diagnostics_->optimizations;
                diagnostics_->last_predicted_revenue = sol.revenue;
                diagnostics_->last_predicted_spend = sol.spend;
            }
        } catch (const Error&) {
            // keep the last served factors rather than stalling the flight
            if (diagnostics_) ++diagnostics_->fallbacks;
            if (!served.empty() && served.back().decision.plan.dimension_count() ==
                                       static_cast<int>(specs_->size()))
                decision.plan.factors = served.back().decision.plan.factors;
            else
                decision.plan.factors = uniform_factors();
        }
        return decision;
    }

private:
    std::vector<std::vector<double>> uniform_factors() const {
        std::vector<std::vector<double>> f;
        for (const auto& s : *specs_) f.emplace_back(static_cast<std::size_t>(s.group_count), 1.0);
        return f;
    }

    std::vector<std::vector<double>> exploration_factors(int day) {
        Rng rng(derive_seed(seed_, "exploration", static_cast<std::uint64_t>(day)));
        auto f = uniform_factors();
        const double amp = config_.exploration_amplitude;
        int flip = 0;
        for (auto& row : f)
            for (double& v : row) {
                const double sign = (flip++ % 2 == 0) ? 1.0 : -1.0;
                v = config_.campaign.factor_bounds.clamp(1.0 + sign * amp * (0.5 + 0.5 * rng.uniform()));
            }
        return f;
    }

    // Per-day factor/volume/cpm observations over days 0..day-1. The frozen
    // grouping applies retroactively, so warmup days count with factor 1.
    std::vector<PlanVolumeObservation> collect_history(const ImpressionLog& log, int day,
                                                       std::span<const ServedPlanRecord> served) {
        return collect_plan_volume_history(log, *specs_, served, DayRange{0, day - 1},
                                           config_.campaign.base_bid, &cpm_obs_);
    }

    OverlappingInstance build_instance(const ImpressionLog& log, int day,
                                       std::span<const PlanVolumeObservation> history,
                                       MarginalVolumeModel model) {
        (void)history;
        const int K = static_cast<int>(specs_->size());
        OverlappingInstance inst;
        inst.volume = std::move(model);
        inst.bounds = config_.campaign.factor_bounds;
        // daily budget in volume-times-CPM units (CPM is per mille, so scale
        // the currency budget by 1000)
        inst.budget = to_currency(config_.campaign.budget_per_period_micros) /
                      config_.campaign.adjustment_cadence_days * 1000.0;

        inst.cpm.resize(static_cast<std::size_t>(K));
        inst.rpm.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const auto& spec = (*specs_)[static_cast<std::size_t>(k)];
            auto agg = aggregate(log, spec, DayRange{0, day - 1});
            for (int g = 0; g < spec.group_count; ++g) {
                const auto& st = agg.groups[static_cast<std::size_t>(g)];
                inst.rpm[static_cast<std::size_t>(k)].push_back(st.has_rates() ? st.rpm() : 0.0);

                const auto& obs = cpm_obs_[static_cast<std::size_t>(k)][static_cast<std::size_t>(g)];
                CpmModel cm;
                try {
                    cm = fit_cpm(obs).model;
                    if (cm.intercept < 0) {
                        // negative cost at low factors is an artifact of thin
                        // data; fall back to the through-origin ratio
                        cm = ratio_model(obs);
                    }
                } catch (const Error&) {
                    cm = ratio_model(obs);
                }
                inst.cpm[static_cast<std::size_t>(k)].push_back(cm);
            }
        }
        return inst;
    }

    CpmModel ratio_model(const std::vector<CpmObservation>& obs) const {
        // first-price fallback: CPM proportional to the factor
        double wf = 0, wy = 0;
        for (const auto& o : obs) {
            wf += o.weight * o.factor;
            wy += o.weight * o.cpm;
        }
        CpmModel m;
        m.intercept = 0.0;
        m.slope = wf > 0 ? wy / wf : config_.campaign.base_bid;
        return m;
    }

    PipelineControllerConfig config_;
    std::uint64_t seed_;
    std::shared_ptr<PipelineDiagnostics> diagnostics_;
    std::vector<SegmentationScheduler> schedulers_;
    std::optional<std::vector<DimensionSpec>> specs_;
    int freeze_day_ = -1;
    std::vector<std::vector<std::vector<CpmObservation>>> cpm_obs_;  // [dim][group][day]
};

}  // namespace

Controller make_pipeline_controller(PipelineControllerConfig config, std::uint64_t seed,
                                    std::shared_ptr<PipelineDiagnostics> diagnostics) {
    auto state = std::make_shared<PipelineController>(std::move(config), seed, std::move(diagnostics));
    return [state](const ImpressionLog& log, int day, std::span<const ServedPlanRecord> served) {
        return (*state)(log, day, served);
    };
}

Controller make_pipeline_controller(PipelineControllerConfig config, std::uint64_t seed) {
    return make_pipeline_controller(std::move(config), seed, nullptr);
}

}  // namespace dimbid
