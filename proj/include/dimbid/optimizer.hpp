#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dimbid/landscape.hpp"
#include "dimbid/types.hpp"

namespace dimbid {

/// Disjoint segments: volume linear in the factor, spend quadratic. Budget and
/// rpm must be in consistent units (spend is accounted as volume * price).
struct DisjointInstance {
    std::vector<double> rpm;   // >= 0, at least one positive
    std::vector<double> beta;  // > 0
    double budget = 0;         // > 0
};

struct DisjointSolution {
    std::vector<double> factors;
    double spend = 0;    // equals budget at the optimum
    double revenue = 0;  // predicted
};

// Closed form: each factor proportional to its segment's rpm, scaled so the
// quadratic spend exhausts the budget.
DisjointSolution solve_disjoint(const DisjointInstance& instance);

/// Overlapping dimensions: marginal volume model plus per-(dimension, group)
/// CPM lines and rpm estimates. Revenue and spend sums are de-duplicated by
/// 1/K. Budget is in the same volume-times-price units as n * CPM.
struct OverlappingInstance {
    MarginalVolumeModel volume;
    std::vector<std::vector<CpmModel>> cpm;  // [dimension][group]
    std::vector<std::vector<double>> rpm;    // [dimension][group]
    double budget = 0;
    FactorBounds bounds{};

    void validate() const;
    double revenue_at(const std::vector<std::vector<double>>& factors) const;
    double spend_at(const std::vector<std::vector<double>>& factors) const;
};

struct SolverOptions {
    std::uint64_t seed = 0;
    int starts = 8;
    int max_iterations = 2000;       // projected ascent iterations per penalty solve
    double budget_tolerance = 1e-6;  // relative spend overshoot allowed at the solution
};

struct OverlappingSolution {
    std::vector<std::vector<double>> factors;
    double revenue = 0;
    double spend = 0;
    double objective = 0;  // best revenue across starts (== revenue)
    int best_start = 0;
    bool budget_active = false;  // spend within tolerance of the budget
};

// Projected gradient ascent on revenue with an exterior quadratic penalty on
// spend above budget; the penalty weight doubles until the solve lands
// feasible, then a bisection on the weight polishes spend up to the budget.
// Deterministic for a fixed (seed, starts).
OverlappingSolution solve_overlapping(const OverlappingInstance& instance,
                                      const SolverOptions& options = {});

// b0 times the product of the selected groups' factors.
double effective_bid(const BidPlan& plan, std::span<const int> groups);

}  // namespace dimbid
