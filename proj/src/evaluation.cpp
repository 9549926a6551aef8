#include "dimbid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dimbid/aggregate.hpp"
#include "dimbid/error.hpp"

namespace dimbid {

double crossover_ratio(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw data_error("crossover_ratio: series length mismatch");
    if (a.empty()) throw data_error("crossover_ratio: empty series");
    std::size_t above = 0;
    for (std::size_t t = 0; t < a.size(); ++t)
        if (a[t] > b[t]) ++above;
    const std::size_t at_or_below = a.size() - above;  // ties count as a <= b
    return static_cast<double>(above + 1) / static_cast<double>(at_or_below + 1);
}

double pairwise_distance(std::span<const double> a, std::span<const double> b, double lambda) {
    if (a.size() != b.size()) throw data_error("pairwise_distance: series length mismatch");
    if (a.empty()) throw data_error("pairwise_distance: empty series");
    double diff = 0;
    for (std::size_t t = 0; t < a.size(); ++t) diff += a[t] - b[t];
    const double r = crossover_ratio(a, b);
    return std::abs(diff) + lambda * std::max(r, 1.0 / r) / static_cast<double>(a.size());
}

SeparationSummary dimension_separation(const ImpressionLog& log, const DimensionSpec& spec,
                                       const DistanceConfig& config) {
    if (spec.group_count < 2) throw data_error("dimension_separation: need at least 2 groups");
    if (config.horizon < 1) throw data_error("dimension_separation: horizon must be >= 1");
    std::vector<std::vector<double>> series;
    series.reserve(static_cast<std::size_t>(spec.group_count));
    for (int g = 0; g < spec.group_count; ++g)
        series.push_back(accumulative_rpm_series(log, spec, g, config.horizon).rpm);

    std::vector<double> distances;
    for (int i = 0; i < spec.group_count; ++i)
        for (int j = i + 1; j < spec.group_count; ++j)
            distances.push_back(pairwise_distance(series[static_cast<std::size_t>(i)],
                                                  series[static_cast<std::size_t>(j)],
                                                  config.lambda));
    SeparationSummary out;
    out.pairs = distances.size();
    for (double d : distances) out.mean += d;
    out.mean /= static_cast<double>(distances.size());
    std::sort(distances.begin(), distances.end());
    const std::size_t n = distances.size();
    out.median = (n % 2 == 1) ? distances[n / 2] : 0.5 * (distances[n / 2 - 1] + distances[n / 2]);
    return out;
}

GroupShareTable GroupShareTable::from_counts(std::span<const std::int64_t> conversions,
                                             std::span<const std::int64_t> impressions,
                                             double smoothing, bool strict) {
    if (conversions.size() != impressions.size() || conversions.empty())
        throw data_error("group share table: empty or mismatched counts");
    if (strict) smoothing = 0.0;
    GroupShareTable t;
    t.smoothing = smoothing;
    double conv_total = 0, imp_total = 0;
    for (std::size_t i = 0; i < conversions.size(); ++i) {
        if (conversions[i] < 0 || impressions[i] < 0) throw data_error("group share table: negative count");
        if (strict && (conversions[i] == 0 || impressions[i] == 0))
            throw data_error("group share table: zero cell in group " + std::to_string(i) +
                             " (strict mode forbids smoothing)");
        conv_total += static_cast<double>(conversions[i]) + smoothing;
        imp_total += static_cast<double>(impressions[i]) + smoothing;
    }
    if (conv_total <= 0 || imp_total <= 0) throw data_error("group share table: no signal");
    for (std::size_t i = 0; i < conversions.size(); ++i) {
        t.conversion_share.push_back((static_cast<double>(conversions[i]) + smoothing) / conv_total);
        t.impression_share.push_back((static_cast<double>(impressions[i]) + smoothing) / imp_total);
    }
    return t;
}

GroupShareTable GroupShareTable::from_log(const ImpressionLog& log, const DimensionSpec& spec,
                                          double smoothing, bool strict) {
    auto agg = aggregate(log, spec, DayRange{0, std::numeric_limits<int>::max()});
    std::vector<std::int64_t> conv, imp;
    for (const auto& g : agg.groups) {
        conv.push_back(g.conversions);
        imp.push_back(g.volume);
    }
    return from_counts(conv, imp, smoothing, strict);
}

std::vector<double> modified_woe(const GroupShareTable& table) {
    std::vector<double> woe;
    woe.reserve(table.conversion_share.size());
    for (std::size_t i = 0; i < table.conversion_share.size(); ++i) {
        if (table.conversion_share[i] <= 0 || table.impression_share[i] <= 0)
            throw data_error("modified_woe: zero share in group " + std::to_string(i));
        woe.push_back(std::log(table.conversion_share[i] / table.impression_share[i]) * 100.0);
    }
    return woe;
}

double information_value(const GroupShareTable& table) {
    double iv = 0;
    for (std::size_t i = 0; i < table.conversion_share.size(); ++i) {
        if (table.conversion_share[i] <= 0 || table.impression_share[i] <= 0)
            throw data_error("information_value: zero share in group " + std::to_string(i));
        iv += (table.conversion_share[i] - table.impression_share[i]) *
              std::log(table.conversion_share[i] / table.impression_share[i]);
    }
    return iv;
}

ContingencyTable ContingencyTable::zeros(int rows, int cols) {
    if (rows < 1 || cols < 1) throw data_error("contingency table: empty shape");
    ContingencyTable t;
    t.rows = rows;
    t.cols = cols;
    t.counts.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 2, 0);
    return t;
}

ContingencyTable ContingencyTable::from_log(const ImpressionLog& log, const DimensionSpec& a,
                                            const DimensionSpec& b) {
    const int col_a = log.feature_index(a.name);
    const int col_b = log.feature_index(b.name);
    if (col_a < 0 || col_b < 0) throw data_error("contingency table: dimension column missing from log");
    // overflow groups get their own row/column
    auto t = zeros(a.group_count + 1, b.group_count + 1);
    for (const auto& r : log.records) {
        const int i = a.group_for(r.features[static_cast<std::size_t>(col_a)]);
        const int j = b.group_for(r.features[static_cast<std::size_t>(col_b)]);
        ++t.at(i, j, r.converted ? 1 : 0);
    }
    return t;
}

double mutual_information(const ContingencyTable& table) {
    if (table.counts.empty()) throw data_error("mutual_information: empty table");
    double total = 0;
    for (std::int64_t c : table.counts) {
        if (c < 0) throw data_error("mutual_information: negative count");
        total += static_cast<double>(c);
    }
    if (total <= 0) throw data_error("mutual_information: table has no mass");

    std::vector<double> p_ij(static_cast<std::size_t>(table.rows) * static_cast<std::size_t>(table.cols), 0.0);
    double p_y[2] = {0, 0};
    for (int i = 0; i < table.rows; ++i)
        for (int j = 0; j < table.cols; ++j)
            for (int y = 0; y < 2; ++y) {
                const double p = static_cast<double>(table.at(i, j, y)) / total;
                p_ij[static_cast<std::size_t>(i * table.cols + j)] += p;
                p_y[y] += p;
            }

    double mi = 0;
    for (int i = 0; i < table.rows; ++i)
        for (int j = 0; j < table.cols; ++j)
            for (int y = 0; y < 2; ++y) {
                const double p = static_cast<double>(table.at(i, j, y)) / total;
                if (p <= 0) continue;
                mi += p * std::log(p / (p_ij[static_cast<std::size_t>(i * table.cols + j)] * p_y[y]));
            }
    return mi;
}

}  // namespace dimbid
