#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dimbid/types.hpp"

namespace dimbid {

struct DistanceConfig {
    double lambda = 1.0;  // crossover penalty weight
    int horizon = 1;      // series length in days
};

// (count of days a > b, plus one) over (count of days a <= b, plus one).
double crossover_ratio(std::span<const double> series_a, std::span<const double> series_b);

// |sum of daily differences| + lambda * max{r, 1/r} / T.
double pairwise_distance(std::span<const double> series_a, std::span<const double> series_b,
                         double lambda);

struct SeparationSummary {
    double median = 0;
    double mean = 0;
    std::size_t pairs = 0;
};

// Median and mean pairwise distance between the accumulative RPM series of all
// group pairs of one dimension.
SeparationSummary dimension_separation(const ImpressionLog& log, const DimensionSpec& spec,
                                       const DistanceConfig& config);

/// Per-group conversion and impression shares, additively smoothed.
struct GroupShareTable {
    std::vector<double> conversion_share;
    std::vector<double> impression_share;
    double smoothing = 0.5;

    // strict = no smoothing; zero cells become errors.
    static GroupShareTable from_counts(std::span<const std::int64_t> conversions,
                                       std::span<const std::int64_t> impressions,
                                       double smoothing = 0.5, bool strict = false);
    static GroupShareTable from_log(const ImpressionLog& log, const DimensionSpec& spec,
                                    double smoothing = 0.5, bool strict = false);
};

// WOE_i = log(%conversions_i / %impressions_i) * 100, natural log.
std::vector<double> modified_woe(const GroupShareTable& table);

// IV = sum_i (%conversions_i - %impressions_i) * log(%conversions_i / %impressions_i).
double information_value(const GroupShareTable& table);

/// I x J x 2 contingency counts over (group of dimension a, group of dimension
/// b, conversion flag).
struct ContingencyTable {
    int rows = 0;
    int cols = 0;
    std::vector<std::int64_t> counts;  // rows * cols * 2, y fastest

    std::int64_t& at(int i, int j, int y) {
        return counts[static_cast<std::size_t>((i * cols + j) * 2 + y)];
    }
    std::int64_t at(int i, int j, int y) const {
        return counts[static_cast<std::size_t>((i * cols + j) * 2 + y)];
    }

    static ContingencyTable zeros(int rows, int cols);
    static ContingencyTable from_log(const ImpressionLog& log, const DimensionSpec& a,
                                     const DimensionSpec& b);
};

// MI(g_a, g_b, Y) in nats, with the 0 * log(0 / .) = 0 convention. Computed on
// raw counts; zero cells are well defined and exact independence gives 0.
double mutual_information(const ContingencyTable& table);

}  // namespace dimbid
