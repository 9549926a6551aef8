#include "dimbid/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dimbid/error.hpp"
#include "dimbid/rng.hpp"

namespace dimbid {

DisjointSolution solve_disjoint(const DisjointInstance& instance) {
    const std::size_t m = instance.rpm.size();
    if (m == 0 || instance.beta.size() != m) throw data_error("solve_disjoint: empty or mismatched instance");
    if (instance.budget <= 0) throw data_error("solve_disjoint: budget must be positive");
    double denom = 0;
    double max_rpm = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (instance.beta[i] <= 0) throw data_error("solve_disjoint: beta must be positive");
        if (instance.rpm[i] < 0) throw data_error("solve_disjoint: negative rpm");
        denom += instance.rpm[i] * instance.rpm[i] * instance.beta[i];
        max_rpm = std::max(max_rpm, instance.rpm[i]);
    }
    if (max_rpm == 0) throw solver_error("solve_disjoint: no revenue signal (all rpm are zero)");

    DisjointSolution sol;
    sol.factors.resize(m);
    const double scale = std::sqrt(instance.budget / denom);
    for (std::size_t i = 0; i < m; ++i) {
        sol.factors[i] = instance.rpm[i] * scale;
        sol.spend += instance.beta[i] * sol.factors[i] * sol.factors[i];
        sol.revenue += instance.rpm[i] * instance.beta[i] * sol.factors[i];
    }
    return sol;
}

namespace {

double product_excluding(const std::vector<double>& sigma, int skip1, int skip2 = -1) {
    double p = 1.0;
    for (int d = 0; d < static_cast<int>(sigma.size()); ++d) {
        if (d == skip1 || d == skip2) continue;
        if (sigma[static_cast<std::size_t>(d)] > 0.0) p *= sigma[static_cast<std::size_t>(d)];
    }
    return p;
}

struct Evaluation {
    std::vector<double> sigma;
    double revenue = 0;
    double spend = 0;
};

Evaluation evaluate(const OverlappingInstance& inst, const std::vector<std::vector<double>>& f) {
    const int K = inst.volume.dimension_count();
    Evaluation ev;
    ev.sigma.assign(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
        const auto& beta = inst.volume.betas[static_cast<std::size_t>(k)];
        const auto& fk = f[static_cast<std::size_t>(k)];
        double s = 0;
        for (std::size_t i = 0; i < beta.size(); ++i) s += beta[i] * fk[i];
        ev.sigma[static_cast<std::size_t>(k)] = s;
    }
    for (int k = 0; k < K; ++k) {
        const auto& beta = inst.volume.betas[static_cast<std::size_t>(k)];
        const auto& fk = f[static_cast<std::size_t>(k)];
        const double pk = product_excluding(ev.sigma, k);
        const double a = inst.volume.intercepts[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < beta.size(); ++i) {
            const double n = a + beta[i] * fk[i] * pk;
            ev.revenue += n * inst.rpm[static_cast<std::size_t>(k)][i];
            ev.spend += n * predict_cpm(inst.cpm[static_cast<std::size_t>(k)][i], fk[i]);
        }
    }
    ev.revenue /= K;
    ev.spend /= K;
    return ev;
}

// Gradients of revenue and spend with respect to every factor.
void gradients(const OverlappingInstance& inst, const std::vector<std::vector<double>>& f,
               std::vector<std::vector<double>>& grad_r, std::vector<std::vector<double>>& grad_s) {
    const int K = inst.volume.dimension_count();
    Evaluation ev = evaluate(inst, f);

    // per-dimension beta*f-weighted sums of rpm and cpm
    std::vector<double> qr(static_cast<std::size_t>(K), 0.0), qs(static_cast<std::size_t>(K), 0.0);
    for (int d = 0; d < K; ++d) {
        const auto& beta = inst.volume.betas[static_cast<std::size_t>(d)];
        const auto& fd = f[static_cast<std::size_t>(d)];
        for (std::size_t j = 0; j < beta.size(); ++j) {
            const double bf = beta[j] * fd[j];
            qr[static_cast<std::size_t>(d)] += bf * inst.rpm[static_cast<std::size_t>(d)][j];
            qs[static_cast<std::size_t>(d)] += bf * predict_cpm(inst.cpm[static_cast<std::size_t>(d)][j], fd[j]);
        }
    }

    for (int k = 0; k < K; ++k) {
        const auto& beta = inst.volume.betas[static_cast<std::size_t>(k)];
        const auto& fk = f[static_cast<std::size_t>(k)];
        const double pk = product_excluding(ev.sigma, k);
        const double a = inst.volume.intercepts[static_cast<std::size_t>(k)];
        double cross_r = 0, cross_s = 0;
        for (int d = 0; d < K; ++d) {
            if (d == k) continue;
            const double pdk = product_excluding(ev.sigma, d, k);
            cross_r += qr[static_cast<std::size_t>(d)] * pdk;
            cross_s += qs[static_cast<std::size_t>(d)] * pdk;
        }
        auto& gr = grad_r[static_cast<std::size_t>(k)];
        auto& gs = grad_s[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < beta.size(); ++i) {
            const auto& cm = inst.cpm[static_cast<std::size_t>(k)][i];
            const double n = a + beta[i] * fk[i] * pk;
            gr[i] = (beta[i] * pk * inst.rpm[static_cast<std::size_t>(k)][i] + beta[i] * cross_r) / K;
            gs[i] = (beta[i] * pk * predict_cpm(cm, fk[i]) + n * cm.slope + beta[i] * cross_s) / K;
        }
    }
}

bool lex_less(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].size(); ++i) {
            if (a[k][i] < b[k][i]) return true;
            if (a[k][i] > b[k][i]) return false;
        }
    return false;
}

}  // namespace

void OverlappingInstance::validate() const {
    const int K = volume.dimension_count();
    if (K < 1) throw data_error("overlapping instance: no dimensions");
    if (static_cast<int>(volume.intercepts.size()) != K)
        throw data_error("overlapping instance: intercept count mismatch");
    if (static_cast<int>(cpm.size()) != K || static_cast<int>(rpm.size()) != K)
        throw data_error("overlapping instance: cpm/rpm shape mismatch");
    for (int k = 0; k < K; ++k) {
        const std::size_t n = volume.betas[static_cast<std::size_t>(k)].size();
        if (n == 0) throw data_error("overlapping instance: dimension with no groups");
        if (cpm[static_cast<std::size_t>(k)].size() != n || rpm[static_cast<std::size_t>(k)].size() != n)
            throw data_error("overlapping instance: cpm/rpm shape mismatch");
        if (volume.intercepts[static_cast<std::size_t>(k)] < 0)
            throw data_error("overlapping instance: negative volume intercept");
        for (std::size_t i = 0; i < n; ++i) {
            if (volume.betas[static_cast<std::size_t>(k)][i] < 0)
                throw data_error("overlapping instance: negative beta");
            if (rpm[static_cast<std::size_t>(k)][i] < 0)
                throw data_error("overlapping instance: negative rpm");
            if (cpm[static_cast<std::size_t>(k)][i].slope < 0)
                throw data_error("overlapping instance: negative cpm slope");
        }
    }
    if (budget <= 0) throw data_error("overlapping instance: budget must be positive");
    if (!(bounds.lo > 0) || !(bounds.lo < bounds.hi))
        throw data_error("overlapping instance: degenerate factor bounds");
}

double OverlappingInstance::revenue_at(const std::vector<std::vector<double>>& factors) const {
    return evaluate(*this, factors).revenue;
}

double OverlappingInstance::spend_at(const std::vector<std::vector<double>>& factors) const {
    return evaluate(*this, factors).spend;
}

OverlappingSolution solve_overlapping(const OverlappingInstance& inst, const SolverOptions& options) {
    inst.validate();
    const int K = inst.volume.dimension_count();
    const double B = inst.budget;
    const double feas_limit = B * (1.0 + options.budget_tolerance);

    std::vector<std::vector<double>> floor_point;
    for (const auto& row : inst.volume.betas)
        floor_point.emplace_back(row.size(), inst.bounds.lo);
    if (evaluate(inst, floor_point).spend > feas_limit)
        throw solver_error("solve_overlapping: budget infeasible at floor");

    auto clamp_all = [&](std::vector<std::vector<double>>& f) {
        for (auto& row : f)
            for (double& v : row) v = inst.bounds.clamp(v);
    };

    // One penalized projected-ascent solve: maximize R - mu * max(S - B, 0)^2.
    auto ascend = [&](std::vector<std::vector<double>> f, double mu) {
        auto phi = [&](const std::vector<std::vector<double>>& x) {
            Evaluation ev = evaluate(inst, x);
            const double v = std::max(ev.spend - B, 0.0);
            return ev.revenue - mu * v * v;
        };
        std::vector<std::vector<double>> gr = f, gs = f, trial = f;
        double value = phi(f);
        double alpha = 1.0;
        for (int iter = 0; iter < options.max_iterations; ++iter) {
            gradients(inst, f, gr, gs);
            const Evaluation ev = evaluate(inst, f);
            const double v = std::max(ev.spend - B, 0.0);
            // ascent direction of the penalized objective
            for (std::size_t k = 0; k < gr.size(); ++k)
                for (std::size_t i = 0; i < gr[k].size(); ++i)
                    gr[k][i] -= 2.0 * mu * v * gs[k][i];

            alpha = std::min(alpha * 2.0, 1e8);
            bool accepted = false;
            for (int bt = 0; bt < 70; ++bt) {
                double step_sq = 0;
                for (std::size_t k = 0; k < f.size(); ++k)
                    for (std::size_t i = 0; i < f[k].size(); ++i) {
                        trial[k][i] = inst.bounds.clamp(f[k][i] + alpha * gr[k][i]);
                        const double d = trial[k][i] - f[k][i];
                        step_sq += d * d;
                    }
                if (step_sq == 0) break;
                const double trial_value = phi(trial);
                if (trial_value >= value + 1e-4 / alpha * step_sq) {
                    accepted = true;
                    value = trial_value;
                    f.swap(trial);
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) break;
        }
        return f;
    };

    const double scale_r = std::max(std::abs(evaluate(inst, floor_point).revenue), 1e-9);

    OverlappingSolution best;
    best.objective = -std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (int start = 0; start < std::max(options.starts, 1); ++start) {
        Rng rng(derive_seed(options.seed, "overlap-start", static_cast<std::uint64_t>(start)));
        std::vector<std::vector<double>> f;
        for (const auto& row : inst.volume.betas) f.emplace_back(row.size(), 1.0);
        if (start == 1) {
            for (auto& row : f)
                for (double& v : row) v = 0.5 * (inst.bounds.lo + inst.bounds.hi);
        } else if (start >= 2) {
            for (auto& row : f)
                for (double& v : row) v = rng.uniform(inst.bounds.lo, inst.bounds.hi);
        }
        clamp_all(f);

        // Outer penalty loop: double mu until feasible.
        double mu = scale_r / std::max(0.05 * B * 0.05 * B, 1e-12);
        double mu_infeasible = 0;  // largest mu seen infeasible
        std::vector<std::vector<double>> sol;
        bool feasible = false;
        for (int outer = 0; outer < 60; ++outer) {
            sol = ascend(f, mu);
            if (evaluate(inst, sol).spend <= feas_limit) {
                feasible = true;
                break;
            }
            mu_infeasible = mu;
            mu *= 2.0;
            f = sol;  // warm start
        }
        if (!feasible) {
            // exterior penalty failed to push inside; shrink toward the floor
            double t_lo = 0.0, t_hi = 1.0;
            auto blend = [&](double t) {
                auto g = sol;
                for (std::size_t k = 0; k < g.size(); ++k)
                    for (std::size_t i = 0; i < g[k].size(); ++i)
                        g[k][i] = inst.bounds.lo + t * (g[k][i] - inst.bounds.lo);
                return g;
            };
            for (int it = 0; it < 80; ++it) {
                const double t = 0.5 * (t_lo + t_hi);
                if (evaluate(inst, blend(t)).spend <= feas_limit) t_lo = t;
                else t_hi = t;
            }
            sol = blend(t_lo);
            feasible = true;
        } else if (mu_infeasible > 0) {
            // Polish: bisect the penalty weight toward the feasibility
            // boundary so spend approaches the budget from below.
            double lo = mu_infeasible, hi = mu;
            auto best_sol = sol;
            double best_rev = evaluate(inst, sol).revenue;
            for (int it = 0; it < 30; ++it) {
                const double mid = std::sqrt(lo * hi);
                auto cand = ascend(best_sol, mid);
                if (evaluate(inst, cand).spend <= feas_limit) {
                    hi = mid;
                    const double rev = evaluate(inst, cand).revenue;
                    if (rev > best_rev) {
                        best_rev = rev;
                        best_sol = cand;
                    }
                } else {
                    lo = mid;
                }
                if (hi / lo < 1.001) break;
            }
            sol = best_sol;
        }

        // Dead coordinates (zero revenue gradient, non-negative spend
        // gradient) are parked at the cheapest bound.
        {
            std::vector<std::vector<double>> gr = sol, gs = sol;
            gradients(inst, sol, gr, gs);
            for (std::size_t k = 0; k < sol.size(); ++k)
                for (std::size_t i = 0; i < sol[k].size(); ++i)
                    if (gr[k][i] == 0.0 && gs[k][i] >= 0.0) sol[k][i] = inst.bounds.lo;
        }

        const Evaluation ev = evaluate(inst, sol);
        if (ev.spend > feas_limit) continue;  // should not happen; skip defective start
        if (!have_best || ev.revenue > best.objective ||
            (ev.revenue == best.objective && lex_less(sol, best.factors))) {
            best.factors = sol;
            best.revenue = ev.revenue;
            best.spend = ev.spend;
            best.objective = ev.revenue;
            best.best_start = start;
            have_best = true;
        }
    }
    if (!have_best) throw solver_error("solve_overlapping: no feasible solution found");
    best.budget_active = best.spend >= B * (1.0 - 1e-3);
    return best;
}

double effective_bid(const BidPlan& plan, std::span<const int> groups) {
    if (static_cast<int>(groups.size()) != plan.dimension_count())
        throw data_error("effective_bid: group selection does not cover all plan dimensions");
    double bid = plan.base_bid;
    for (int k = 0; k < plan.dimension_count(); ++k) {
        const int g = groups[static_cast<std::size_t>(k)];
        const auto& row = plan.factors[static_cast<std::size_t>(k)];
        if (g < 0 || g > static_cast<int>(row.size()))
            throw data_error("effective_bid: missing group " + std::to_string(g) + " in dimension " +
                             std::to_string(k));
        bid *= plan.factor_at(k, g);
    }
    return bid;
}

}  // namespace dimbid
