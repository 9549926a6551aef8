#pragma once

// Test-side oracles, written directly from the model definitions and kept
// independent of the solver implementations they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dimbid/optimizer.hpp"

namespace dimbid::oracle {

// Maximize sum_i rpm_i * beta_i * f_i subject to sum_i beta_i * f_i^2 = B by
// cyclic pairwise exchanges along the active-constraint surface, each pair
// resolved by a grid scan at the given step per coordinate.
inline std::vector<double> disjoint_surface_search(const DisjointInstance& inst,
                                                   double step = 1e-3, int max_sweeps = 80) {
    const std::size_t m = inst.rpm.size();
    std::vector<double> f(m);
    for (std::size_t i = 0; i < m; ++i)
        f[i] = std::sqrt(inst.budget / (static_cast<double>(m) * inst.beta[i]));
    if (m == 1) return f;  // the surface is a single point

    auto value = [&](double fi, std::size_t i) { return inst.rpm[i] * inst.beta[i] * fi; };
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool moved = false;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const double pair_budget = inst.beta[i] * f[i] * f[i] + inst.beta[j] * f[j] * f[j];
                const double fi_max = std::sqrt(pair_budget / inst.beta[i]);
                double best_fi = f[i], best_fj = f[j];
                double best = value(f[i], i) + value(f[j], j);
                for (double fi = 0; fi <= fi_max + 1e-15; fi += step) {
                    const double rem = pair_budget - inst.beta[i] * fi * fi;
                    const double fj = rem > 0 ? std::sqrt(rem / inst.beta[j]) : 0.0;
                    const double v = value(fi, i) + value(fj, j);
                    if (v > best + 1e-14) {
                        best = v;
                        best_fi = fi;
                        best_fj = fj;
                    }
                }
                if (best_fi != f[i] || best_fj != f[j]) {
                    f[i] = best_fi;
                    f[j] = best_fj;
                    moved = true;
                }
            }
        if (!moved) break;
    }
    return f;
}

// Direct evaluation of the overlapping objective/constraint for K=2, I=2,
// written from the formulas (a dimension whose beta-weighted factor sum is
// zero drops out of the other dimension's product).
struct Overlap22Eval {
    double revenue = 0;
    double spend = 0;
};

inline Overlap22Eval evaluate22(const OverlappingInstance& inst, double f10, double f11, double f20,
                                double f21) {
    const double a1 = inst.volume.intercepts[0], a2 = inst.volume.intercepts[1];
    const double b10 = inst.volume.betas[0][0], b11 = inst.volume.betas[0][1];
    const double b20 = inst.volume.betas[1][0], b21 = inst.volume.betas[1][1];
    const double sigma1 = b10 * f10 + b11 * f11;
    const double sigma2 = b20 * f20 + b21 * f21;
    const double p1 = sigma2 > 0 ? sigma2 : 1.0;  // product over the other dimension
    const double p2 = sigma1 > 0 ? sigma1 : 1.0;
    const double n10 = a1 + b10 * f10 * p1;
    const double n11 = a1 + b11 * f11 * p1;
    const double n20 = a2 + b20 * f20 * p2;
    const double n21 = a2 + b21 * f21 * p2;
    auto cpm = [&](int k, int i, double f) {
        return inst.cpm[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].intercept +
               inst.cpm[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].slope * f;
    };
    Overlap22Eval ev;
    ev.revenue = 0.5 * (n10 * inst.rpm[0][0] + n11 * inst.rpm[0][1] + n20 * inst.rpm[1][0] +
                        n21 * inst.rpm[1][1]);
    ev.spend = 0.5 * (n10 * cpm(0, 0, f10) + n11 * cpm(0, 1, f11) + n20 * cpm(1, 0, f20) +
                      n21 * cpm(1, 1, f21));
    return ev;
}

struct GridResult {
    double best_revenue = -1e300;
    std::vector<double> factors;  // f10 f11 f20 f21
    bool found = false;
};

// Dense 4-D scan at the given resolution over the instance bounds. Iteration
// is lexicographic and acceptance strict, so ties keep the lowest vector.
inline GridResult grid_search22(const OverlappingInstance& inst, double resolution = 0.01) {
    const double lo = inst.bounds.lo, hi = inst.bounds.hi;
    const int steps = static_cast<int>(std::round((hi - lo) / resolution));
    std::vector<double> axis;
    for (int s = 0; s <= steps; ++s) axis.push_back(lo + resolution * s);
    const std::size_t n = axis.size();

    // per-pair partial terms, one table per dimension
    struct Partial {
        double sigma, u, w, const_r, const_s;
    };
    auto make_partials = [&](int k) {
        const double a = inst.volume.intercepts[static_cast<std::size_t>(k)];
        const double b0 = inst.volume.betas[static_cast<std::size_t>(k)][0];
        const double b1 = inst.volume.betas[static_cast<std::size_t>(k)][1];
        const double r0 = inst.rpm[static_cast<std::size_t>(k)][0];
        const double r1 = inst.rpm[static_cast<std::size_t>(k)][1];
        const auto& c0 = inst.cpm[static_cast<std::size_t>(k)][0];
        const auto& c1 = inst.cpm[static_cast<std::size_t>(k)][1];
        std::vector<Partial> table(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double f0 = axis[i], f1 = axis[j];
                Partial p;
                p.sigma = b0 * f0 + b1 * f1;
                p.u = b0 * f0 * r0 + b1 * f1 * r1;
                p.w = b0 * f0 * (c0.intercept + c0.slope * f0) + b1 * f1 * (c1.intercept + c1.slope * f1);
                p.const_r = a * (r0 + r1);
                p.const_s = a * (c0.intercept + c0.slope * f0 + c1.intercept + c1.slope * f1);
                table[i * n + j] = p;
            }
        return table;
    };
    const auto t1 = make_partials(0);
    const auto t2 = make_partials(1);

    GridResult result;
    for (std::size_t i = 0; i < n * n; ++i) {
        const Partial& p1 = t1[i];
        const double s1 = p1.sigma > 0 ? p1.sigma : 1.0;
        for (std::size_t j = 0; j < n * n; ++j) {
            const Partial& p2 = t2[j];
            const double s2 = p2.sigma > 0 ? p2.sigma : 1.0;
            const double spend = 0.5 * (p1.const_s + p2.const_s + s2 * p1.w + s1 * p2.w);
            if (spend > inst.budget) continue;
            const double revenue = 0.5 * (p1.const_r + p2.const_r + s2 * p1.u + s1 * p2.u);
            if (revenue > result.best_revenue) {
                result.best_revenue = revenue;
                result.factors = {axis[i / n], axis[i % n], axis[j / n], axis[j % n]};
                result.found = true;
            }
        }
    }
    return result;
}

}  // namespace dimbid::oracle
