#include "dimbid/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dimbid/error.hpp"
#include "dimbid/rng.hpp"

namespace dimbid {

CpmFit fit_cpm(std::span<const CpmObservation> observations) {
    if (observations.size() < 2) throw data_error("fit_cpm: need at least 2 observations");
    double sw = 0, swf = 0, swff = 0, swy = 0, swfy = 0;
    for (const auto& o : observations) {
        if (o.weight < 0) throw data_error("fit_cpm: negative weight");
        sw += o.weight;
        swf += o.weight * o.factor;
        swff += o.weight * o.factor * o.factor;
        swy += o.weight * o.cpm;
        swfy += o.weight * o.factor * o.cpm;
    }
    if (sw <= 0) throw data_error("fit_cpm: all weights zero");
    const double denom = sw * swff - swf * swf;
    const double scale = sw * swff + swf * swf;
    if (denom <= 1e-12 * std::max(scale, 1.0))
        throw data_error("fit_cpm: unidentifiable slope (all factors identical)");

    CpmFit fit;
    fit.points = observations.size();
    double b = (sw * swfy - swf * swy) / denom;
    if (b < 0) b = 0;  // CPM must be non-decreasing in the factor
    fit.model.slope = b;
    fit.model.intercept = (swy - b * swf) / sw;
    for (const auto& o : observations) {
        const double r = o.cpm - predict_cpm(fit.model, o.factor);
        fit.rss += o.weight * r * r;
    }
    return fit;
}

LinearVolumeModel fit_volume_linear(std::span<const std::vector<double>> factors_per_day,
                                    std::span<const std::vector<double>> volumes_per_day) {
    if (factors_per_day.size() != volumes_per_day.size() || factors_per_day.empty())
        throw data_error("fit_volume_linear: empty or mismatched history");
    const std::size_t m = factors_per_day[0].size();
    LinearVolumeModel model;
    model.betas.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double sff = 0, sfn = 0;
        for (std::size_t d = 0; d < factors_per_day.size(); ++d) {
            if (factors_per_day[d].size() != m || volumes_per_day[d].size() != m)
                throw data_error("fit_volume_linear: ragged history");
            sff += factors_per_day[d][i] * factors_per_day[d][i];
            sfn += factors_per_day[d][i] * volumes_per_day[d][i];
        }
        if (sff <= 0) throw data_error("fit_volume_linear: segment " + std::to_string(i) + " has no factor signal");
        model.betas[i] = std::max(sfn / sff, 0.0);
    }
    return model;
}

namespace {

// Shared evaluation of Eq.-style predictions. sigma[d] = sum_j beta[d][j] *
// f[d][j]; a dimension with sigma == 0 (all betas zero) is skipped in the
// other dimensions' products.
struct Shapes {
    int K = 0;
    std::vector<int> groups;  // I_k
    int param_count = 0;      // K intercepts + sum I_k betas

    int beta_offset(int k) const {
        int off = K;
        for (int d = 0; d < k; ++d) off += groups[static_cast<std::size_t>(d)];
        return off;
    }
};

Shapes shapes_of(const MarginalVolumeModel& m) {
    Shapes s;
    s.K = m.dimension_count();
    s.param_count = s.K;
    for (const auto& b : m.betas) {
        s.groups.push_back(static_cast<int>(b.size()));
        s.param_count += static_cast<int>(b.size());
    }
    return s;
}

void check_plan_shape(const MarginalVolumeModel& model, const BidPlan& plan) {
    if (plan.dimension_count() != model.dimension_count())
        throw data_error("volume model: plan has " + std::to_string(plan.dimension_count()) +
                         " dimensions, model has " + std::to_string(model.dimension_count()));
    for (int k = 0; k < model.dimension_count(); ++k)
        if (plan.factors[static_cast<std::size_t>(k)].size() != model.betas[static_cast<std::size_t>(k)].size())
            throw data_error("volume model: group count mismatch in dimension " + std::to_string(k));
}

std::vector<double> sigmas_of(const MarginalVolumeModel& model, const BidPlan& plan) {
    const int K = model.dimension_count();
    std::vector<double> sigma(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
        const auto& beta = model.betas[static_cast<std::size_t>(k)];
        const auto& f = plan.factors[static_cast<std::size_t>(k)];
        double s = 0;
        for (std::size_t i = 0; i < beta.size(); ++i) s += beta[i] * f[i];
        sigma[static_cast<std::size_t>(k)] = s;
    }
    return sigma;
}

// prod over active dimensions except those in {skip1, skip2}
double product_excluding(const std::vector<double>& sigma, int skip1, int skip2 = -1) {
    double p = 1.0;
    for (int d = 0; d < static_cast<int>(sigma.size()); ++d) {
        if (d == skip1 || d == skip2) continue;
        if (sigma[static_cast<std::size_t>(d)] > 0.0) p *= sigma[static_cast<std::size_t>(d)];
    }
    return p;
}

}  // namespace

std::vector<std::vector<double>> predict_volume_marginal(const MarginalVolumeModel& model,
                                                         const BidPlan& plan) {
    check_plan_shape(model, plan);
    const int K = model.dimension_count();
    const auto sigma = sigmas_of(model, plan);
    std::vector<std::vector<double>> n(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const auto& beta = model.betas[static_cast<std::size_t>(k)];
        const auto& f = plan.factors[static_cast<std::size_t>(k)];
        const double pk = product_excluding(sigma, k);
        auto& row = n[static_cast<std::size_t>(k)];
        row.resize(beta.size());
        for (std::size_t i = 0; i < beta.size(); ++i)
            row[i] = model.intercepts[static_cast<std::size_t>(k)] + beta[i] * f[i] * pk;
    }
    return n;
}

double marginal_fit_objective(const MarginalVolumeModel& model,
                              std::span<const PlanVolumeObservation> history) {
    double obj = 0;
    for (const auto& obs : history) {
        auto n = predict_volume_marginal(model, obs.plan);
        for (std::size_t k = 0; k < n.size(); ++k)
            for (std::size_t i = 0; i < n[k].size(); ++i) {
                const double r = n[k][i] - obs.volumes[k][i];
                obj += r * r;
            }
    }
    return obj;
}

std::vector<double> marginal_fit_gradient(const MarginalVolumeModel& model,
                                          std::span<const PlanVolumeObservation> history) {
    const Shapes sh = shapes_of(model);
    std::vector<double> grad(static_cast<std::size_t>(sh.param_count), 0.0);
    for (const auto& obs : history) {
        check_plan_shape(model, obs.plan);
        const auto sigma = sigmas_of(model, obs.plan);
        const auto n = predict_volume_marginal(model, obs.plan);

        // residuals and per-dimension weighted residual sums
        std::vector<std::vector<double>> r(n.size());
        std::vector<double> q(n.size(), 0.0);  // q[d] = sum_j r[d][j] beta[d][j] f[d][j]
        for (std::size_t k = 0; k < n.size(); ++k) {
            r[k].resize(n[k].size());
            const auto& beta = model.betas[k];
            const auto& f = obs.plan.factors[k];
            for (std::size_t i = 0; i < n[k].size(); ++i) {
                r[k][i] = n[k][i] - obs.volumes[k][i];
                q[k] += r[k][i] * beta[i] * f[i];
            }
        }

        for (int k = 0; k < sh.K; ++k) {
            const auto& beta = model.betas[static_cast<std::size_t>(k)];
            const auto& f = obs.plan.factors[static_cast<std::size_t>(k)];
            const double pk = product_excluding(sigma, k);
            double* gbeta = grad.data() + sh.beta_offset(k);
            double ga = 0;
            const bool active_k = sigma[static_cast<std::size_t>(k)] > 0.0;
            for (std::size_t i = 0; i < beta.size(); ++i) {
                ga += 2.0 * r[static_cast<std::size_t>(k)][i];
                double g = 2.0 * r[static_cast<std::size_t>(k)][i] * f[i] * pk;
                if (active_k) {
                    // this beta also feeds every other dimension's product
                    double cross = 0;
                    for (int d = 0; d < sh.K; ++d) {
                        if (d == k) continue;
                        cross += q[static_cast<std::size_t>(d)] * product_excluding(sigma, d, k);
                    }
                    g += 2.0 * f[i] * cross;
                }
                gbeta[i] += g;
            }
            grad[static_cast<std::size_t>(k)] += ga;
        }
    }
    return grad;
}

namespace {

std::vector<double> pack(const MarginalVolumeModel& m, const Shapes& sh) {
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(sh.param_count));
    for (double a : m.intercepts) x.push_back(a);
    for (const auto& row : m.betas) x.insert(x.end(), row.begin(), row.end());
    return x;
}

MarginalVolumeModel unpack(const std::vector<double>& x, const Shapes& sh) {
    MarginalVolumeModel m;
    m.intercepts.assign(x.begin(), x.begin() + sh.K);
    std::size_t off = static_cast<std::size_t>(sh.K);
    for (int k = 0; k < sh.K; ++k) {
        const std::size_t n = static_cast<std::size_t>(sh.groups[static_cast<std::size_t>(k)]);
        m.betas.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(off),
                             x.begin() + static_cast<std::ptrdiff_t>(off + n));
        off += n;
    }
    return m;
}

// Euclidean projection onto the unit simplex (Duchi et al.).
void project_simplex(double* v, std::size_t n) {
    std::vector<double> u(v, v + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0;
    double theta = 0;
    int rho = -1;
    for (std::size_t j = 0; j < n; ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0) {
            rho = static_cast<int>(j);
            theta = t;
        }
    }
    (void)rho;
    for (std::size_t i = 0; i < n; ++i) v[i] = std::max(v[i] - theta, 0.0);
}

void project(std::vector<double>& x, const Shapes& sh) {
    // intercepts >= 0 (volumes are counts)
    for (int k = 0; k < sh.K; ++k)
        x[static_cast<std::size_t>(k)] = std::max(x[static_cast<std::size_t>(k)], 0.0);
    // dimension 0: non-negative orthant; dimensions >= 1: unit simplex
    std::size_t off = static_cast<std::size_t>(sh.K);
    for (int k = 0; k < sh.K; ++k) {
        const std::size_t n = static_cast<std::size_t>(sh.groups[static_cast<std::size_t>(k)]);
        if (k == 0) {
            for (std::size_t i = 0; i < n; ++i) x[off + i] = std::max(x[off + i], 0.0);
        } else {
            project_simplex(x.data() + off, n);
        }
        off += n;
    }
}

}  // namespace

MarginalFitResult fit_volume_marginal(std::span<const PlanVolumeObservation> history,
                                      const MarginalFitOptions& options) {
    if (history.empty()) throw data_error("fit_volume_marginal: empty history");
    const int K = history[0].plan.dimension_count();
    if (K < 1) throw data_error("fit_volume_marginal: plans carry no dimensions");
    Shapes sh;
    sh.K = K;
    sh.param_count = K;
    for (const auto& row : history[0].plan.factors) {
        sh.groups.push_back(static_cast<int>(row.size()));
        sh.param_count += static_cast<int>(row.size());
    }
    int obs_per_day = 0;
    for (int g : sh.groups) obs_per_day += g;
    for (const auto& obs : history) {
        if (obs.plan.dimension_count() != K ||
            obs.volumes.size() != static_cast<std::size_t>(K))
            throw data_error("fit_volume_marginal: inconsistent history shapes");
        for (int k = 0; k < K; ++k)
            if (obs.plan.factors[static_cast<std::size_t>(k)].size() !=
                    static_cast<std::size_t>(sh.groups[static_cast<std::size_t>(k)]) ||
                obs.volumes[static_cast<std::size_t>(k)].size() !=
                    static_cast<std::size_t>(sh.groups[static_cast<std::size_t>(k)]))
                throw data_error("fit_volume_marginal: inconsistent history shapes");
    }

    // Identifiability needs enough days and at least two distinct plans.
    const int free_params = K + obs_per_day - (K - 1);
    const int needed_days = (free_params + obs_per_day - 1) / obs_per_day;
    std::size_t distinct = 1;
    for (std::size_t d = 1; d < history.size(); ++d) {
        bool same_as_earlier = false;
        for (std::size_t e = 0; e < d && !same_as_earlier; ++e)
            same_as_earlier = history[d].plan.factors == history[e].plan.factors;
        if (!same_as_earlier) ++distinct;
    }
    if (static_cast<int>(history.size()) < needed_days || distinct < 2)
        throw data_error(
            "fit_volume_marginal: history is rank-deficient (" + std::to_string(distinct) +
            " distinct plan(s) over " + std::to_string(history.size()) +
            " day(s)); perturb the bid factors across days to identify the volume model");

    // Scale anchors for initialization.
    std::vector<std::vector<double>> mean_vol(static_cast<std::size_t>(K));
    std::vector<std::vector<double>> mean_f(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        mean_vol[static_cast<std::size_t>(k)].assign(
            static_cast<std::size_t>(sh.groups[static_cast<std::size_t>(k)]), 0.0);
        mean_f[static_cast<std::size_t>(k)].assign(
            static_cast<std::size_t>(sh.groups[static_cast<std::size_t>(k)]), 0.0);
    }
    for (const auto& obs : history)
        for (int k = 0; k < K; ++k)
            for (std::size_t i = 0; i < obs.volumes[static_cast<std::size_t>(k)].size(); ++i) {
                mean_vol[static_cast<std::size_t>(k)][i] +=
                    obs.volumes[static_cast<std::size_t>(k)][i] / static_cast<double>(history.size());
                mean_f[static_cast<std::size_t>(k)][i] +=
                    obs.plan.factors[static_cast<std::size_t>(k)][i] / static_cast<double>(history.size());
            }
    double objective_scale = 0;
    for (const auto& obs : history)
        for (const auto& row : obs.volumes)
            for (double y : row) objective_scale += y * y;
    objective_scale = std::max(objective_scale, 1.0);

    auto objective_of = [&](const std::vector<double>& x) {
        return marginal_fit_objective(unpack(x, sh), history);
    };

    MarginalFitResult best;
    best.objective = std::numeric_limits<double>::infinity();

    for (int start = 0; start < std::max(options.starts, 1); ++start) {
        Rng rng(derive_seed(options.seed, "volume-fit-start", static_cast<std::uint64_t>(start)));
        auto jitter = [&](double lo, double hi) {
            return start == 0 ? 0.5 * (lo + hi) : rng.uniform(lo, hi);
        };

        // Heuristic init: simplex dimensions carry shape, dimension 0 carries scale.
        MarginalVolumeModel init;
        init.intercepts.resize(static_cast<std::size_t>(K));
        init.betas.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const auto& mv = mean_vol[static_cast<std::size_t>(k)];
            const double vmin = *std::min_element(mv.begin(), mv.end());
            init.intercepts[static_cast<std::size_t>(k)] = jitter(0.0, 0.6) * vmin;
            auto& beta = init.betas[static_cast<std::size_t>(k)];
            beta.resize(mv.size());
            for (std::size_t i = 0; i < mv.size(); ++i)
                beta[i] = std::max(mv[i] - init.intercepts[static_cast<std::size_t>(k)], 1e-6) *
                          jitter(0.5, 1.5);
            if (k > 0) {
                double s = std::accumulate(beta.begin(), beta.end(), 0.0);
                for (double& b : beta) b /= s;
            }
        }
        // rescale dimension 0 so initial predictions land near the data
        {
            auto sigma = sigmas_of(init, history[0].plan);
            double prod = product_excluding(sigma, 0);
            if (prod > 0)
                for (double& b : init.betas[0]) b /= prod;
        }

        std::vector<double> x = pack(init, sh);
        project(x, sh);
        double obj = objective_of(x);
        double alpha = 1.0;
        int iters = 0;
        for (; iters < options.max_iterations; ++iters) {
            const auto grad = marginal_fit_gradient(unpack(x, sh), history);
            alpha = std::min(alpha * 2.0, 1e8);
            std::vector<double> x_new(x.size());
            double obj_new = obj;
            bool accepted = false;
            for (int bt = 0; bt < 70; ++bt) {
                double step_sq = 0;
                for (std::size_t i = 0; i < x.size(); ++i) x_new[i] = x[i] - alpha * grad[i];
                project(x_new, sh);
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double d = x_new[i] - x[i];
                    step_sq += d * d;
                }
                if (step_sq == 0) break;  // stationary under projection
                obj_new = objective_of(x_new);
                if (obj_new <= obj - 1e-4 / alpha * step_sq) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) break;
            const double rel = (obj - obj_new) / std::max(obj, 1e-300);
            x.swap(x_new);
            obj = obj_new;
            if (rel < options.tolerance) break;
            if (obj < 1e-24 * objective_scale) break;  // machine zero for this data
        }

        if (obj < best.objective) {
            best.objective = obj;
            best.model = unpack(x, sh);
            best.best_start = start;
            best.iterations = iters;
        }
    }
    return best;
}

}  // namespace dimbid
