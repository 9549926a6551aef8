#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dimbid/error.hpp"
#include "dimbid/evaluation.hpp"
#include "dimbid/log_io.hpp"
#include "dimbid/rng.hpp"

using namespace dimbid;

TEST_CASE("crossover ratio: dominance, ties and a hand-counted pattern") {
    std::vector<double> a{2, 2, 2, 2};
    std::vector<double> b{1, 1, 1, 1};
    CHECK(crossover_ratio(a, b) == doctest::Approx(5.0));          // (4+1)/(0+1)
    CHECK(crossover_ratio(a, a) == doctest::Approx(1.0 / 5.0));    // ties count as <=
    std::vector<double> c{2, 0, 2, 2};                             // above/below/above/above
    std::vector<double> d{1, 1, 1, 1};
    CHECK(crossover_ratio(c, d) == doctest::Approx(2.0));          // (3+1)/(1+1)
    CHECK_THROWS_AS(crossover_ratio(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("pairwise distance: identical series and constant offsets") {
    std::vector<double> a{1, 2, 3, 4, 5};
    CHECK(pairwise_distance(a, a, 0.0) == doctest::Approx(0.0));
    // identical, lambda=1, T=5: max{1/6, 6}/5 = 1.2
    CHECK(pairwise_distance(a, a, 1.0) == doctest::Approx(1.2));
    std::vector<double> b{2, 3, 4};
    std::vector<double> c{1, 2, 3};
    CHECK(pairwise_distance(b, c, 0.0) == doctest::Approx(3.0));
    CHECK(pairwise_distance(a, a, 0.5) >= 0.5 / 5 - 1e-15);  // lower bound lambda/T
}

TEST_CASE("pairwise distance symmetry") {
    Rng rng(606);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a, b;
        for (int i = 0; i < 7; ++i) {
            a.push_back(rng.uniform(0, 10));
            b.push_back(rng.uniform(0, 10));
        }
        CHECK(pairwise_distance(a, b, 0.0) == doctest::Approx(pairwise_distance(b, a, 0.0)));
        // no ties almost surely, so r(b,a) = 1/r(a,b) and the penalty matches
        CHECK(pairwise_distance(a, b, 1.5) == doctest::Approx(pairwise_distance(b, a, 1.5)));
    }
}

namespace {

ImpressionLog parse(const std::string& csv) {
    std::istringstream in(csv);
    return ingest_log(in);
}

}  // namespace

TEST_CASE("dimension separation: two groups collapse to a single distance") {
    std::ostringstream csv;
    csv << "day,impression_id,zip,cost_micros,revenue_micros,converted\n";
    for (int d = 0; d < 4; ++d) {
        csv << d << ",a" << d << ",v-lo,1000,0,0\n";
        csv << d << ",b" << d << ",v-hi,1000,50000,1\n";
    }
    auto log = parse(csv.str());
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 2;
    spec.group_of = {{"v-lo", 0}, {"v-hi", 1}};
    auto sep = dimension_separation(log, spec, DistanceConfig{0.0, 4});
    CHECK(sep.pairs == 1);
    CHECK(sep.median == doctest::Approx(sep.mean));
    CHECK(sep.median == doctest::Approx(4 * 50.0));  // constant 50 rpm gap over 4 days

    DimensionSpec one;
    one.name = "zip";
    one.group_count = 1;
    one.group_of = {{"v-lo", 0}, {"v-hi", 0}};
    CHECK_THROWS_AS(dimension_separation(log, one, DistanceConfig{0.0, 4}), Error);
}

TEST_CASE("dimension separation: identical groups have zero distance at lambda 0") {
    std::ostringstream csv;
    csv << "day,impression_id,zip,cost_micros,revenue_micros,converted\n";
    for (int d = 0; d < 3; ++d)
        for (const char* v : {"x", "y", "z"}) csv << d << ",r" << d << v << ',' << v << ",1000,20000,1\n";
    auto log = parse(csv.str());
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 3;
    spec.group_of = {{"x", 0}, {"y", 1}, {"z", 2}};
    auto sep = dimension_separation(log, spec, DistanceConfig{0.0, 3});
    CHECK(sep.median == doctest::Approx(0.0));
    CHECK(sep.mean == doctest::Approx(0.0));
}

TEST_CASE("modified WOE: equal shares and hand values") {
    GroupShareTable t;
    t.conversion_share = {0.5, 0.5};
    t.impression_share = {0.5, 0.5};
    for (double w : modified_woe(t)) CHECK(w == doctest::Approx(0.0));

    GroupShareTable u;
    u.conversion_share = {0.2, 0.8};
    u.impression_share = {0.1, 0.9};
    auto woe = modified_woe(u);
    CHECK(woe[0] == doctest::Approx(std::log(2.0) * 100.0).epsilon(1e-12));  // ~69.31

    GroupShareTable v;
    v.conversion_share = {0.5, 0.5};
    v.impression_share = {0.25, 0.75};
    auto w2 = modified_woe(v);
    CHECK(w2[0] == doctest::Approx(std::log(2.0) * 100.0).epsilon(1e-12));
    CHECK(w2[1] == doctest::Approx(std::log(2.0 / 3.0) * 100.0).epsilon(1e-12));
}

TEST_CASE("WOE is invariant under uniform count scaling") {
    const std::int64_t conv[] = {3, 9, 1};
    const std::int64_t imp[] = {100, 250, 75};
    const std::int64_t conv10[] = {30, 90, 10};
    const std::int64_t imp10[] = {1000, 2500, 750};
    auto a = modified_woe(GroupShareTable::from_counts(conv, imp, 0.0));
    auto b = modified_woe(GroupShareTable::from_counts(conv10, imp10, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("information value: independence, a hand case and non-negativity") {
    GroupShareTable eq;
    eq.conversion_share = {0.3, 0.7};
    eq.impression_share = {0.3, 0.7};
    CHECK(information_value(eq) == doctest::Approx(0.0));

    GroupShareTable t;
    t.conversion_share = {0.8, 0.2};
    t.impression_share = {0.5, 0.5};
    const double expected = 0.3 * std::log(1.6) + (-0.3) * std::log(0.4);
    CHECK(information_value(t) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(information_value(t) >= 0.0);
}

TEST_CASE("IV and MI are non-negative over random tables") {
    Rng rng(2718);
    for (int trial = 0; trial < 1000; ++trial) {
        const int groups = 2 + static_cast<int>(rng.uniform_index(5));
        std::vector<std::int64_t> conv, imp;
        for (int g = 0; g < groups; ++g) {
            conv.push_back(static_cast<std::int64_t>(rng.uniform_index(50)));
            imp.push_back(1 + static_cast<std::int64_t>(rng.uniform_index(1000)));
        }
        CHECK(information_value(GroupShareTable::from_counts(conv, imp, 0.5)) >= 0.0);

        auto table = ContingencyTable::zeros(2 + static_cast<int>(rng.uniform_index(3)),
                                             2 + static_cast<int>(rng.uniform_index(3)));
        for (auto& c : table.counts) c = static_cast<std::int64_t>(rng.uniform_index(40));
        if (std::all_of(table.counts.begin(), table.counts.end(), [](auto c) { return c == 0; }))
            table.counts[0] = 1;
        CHECK(mutual_information(table) >= 0.0);
    }
}

TEST_CASE("mutual information: exact zero under product-form counts") {
    // counts(i,j,y) = r_i * c_j * s_y factorizes, so (g_i,g_j) carries nothing about Y
    const std::int64_t r[] = {2, 3};
    const std::int64_t c[] = {1, 4};
    const std::int64_t s[] = {5, 2};
    auto table = ContingencyTable::zeros(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int y = 0; y < 2; ++y) table.at(i, j, y) = r[i] * c[j] * s[y];
    CHECK(std::abs(mutual_information(table)) <= 1e-12);
}

TEST_CASE("mutual information: deterministic Y reaches the entropy of Y") {
    // y = 1 exactly when i == j; H(Y) with p(y=1) = 1/2 is log 2
    auto table = ContingencyTable::zeros(2, 2);
    table.at(0, 0, 1) = 5;
    table.at(1, 1, 1) = 5;
    table.at(0, 1, 0) = 5;
    table.at(1, 0, 0) = 5;
    CHECK(mutual_information(table) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mutual information: hand-computed 2x2x2 table") {
    auto table = ContingencyTable::zeros(2, 2);
    table.at(0, 0, 0) = 3;
    table.at(0, 0, 1) = 1;
    table.at(1, 1, 0) = 1;
    table.at(1, 1, 1) = 3;
    // 2 * [3/8 log(3/2) + 1/8 log(1/2)] = 0.75 log 1.5 + 0.25 log 0.5
    const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
    CHECK(mutual_information(table) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(mutual_information(table) == doctest::Approx(0.13081203594113694).epsilon(1e-12));
}

TEST_CASE("mutual information is invariant under group relabeling") {
    Rng rng(11);
    auto table = ContingencyTable::zeros(3, 2);
    for (auto& c : table.counts) c = static_cast<std::int64_t>(rng.uniform_index(30));
    auto permuted = ContingencyTable::zeros(3, 2);
    const int row_perm[] = {2, 0, 1};
    const int col_perm[] = {1, 0};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            for (int y = 0; y < 2; ++y) permuted.at(row_perm[i], col_perm[j], y) = table.at(i, j, y);
    CHECK(mutual_information(permuted) == doctest::Approx(mutual_information(table)).epsilon(1e-12));
}

TEST_CASE("group share table: smoothing keeps zero cells usable, strict mode rejects them") {
    const std::int64_t conv[] = {0, 10};
    const std::int64_t imp[] = {50, 50};
    auto t = GroupShareTable::from_counts(conv, imp, 0.5);
    CHECK(t.conversion_share[0] > 0.0);
    CHECK_NOTHROW(modified_woe(t));
    CHECK_THROWS_WITH_AS(GroupShareTable::from_counts(conv, imp, 0.5, true),
                         doctest::Contains("strict"), Error);
}

TEST_CASE("shares sum to one before smoothing by construction") {
    const std::int64_t conv[] = {5, 15, 30};
    const std::int64_t imp[] = {100, 300, 600};
    auto t = GroupShareTable::from_counts(conv, imp, 0.0);
    double cs = 0, is = 0;
    for (std::size_t i = 0; i < t.conversion_share.size(); ++i) {
        cs += t.conversion_share[i];
        is += t.impression_share[i];
    }
    CHECK(cs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(is == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("contingency table from a log routes overflow to its own bucket") {
    auto log = parse(
        "day,impression_id,zip,site,cost_micros,revenue_micros,converted\n"
        "0,a,z0,s0,1000,0,0\n"
        "0,b,z1,s1,1000,10000,1\n"
        "0,c,weird,s0,1000,0,0\n");
    DimensionSpec zip;
    zip.name = "zip";
    zip.group_count = 2;
    zip.group_of = {{"z0", 0}, {"z1", 1}};
    DimensionSpec site;
    site.name = "site";
    site.group_count = 2;
    site.group_of = {{"s0", 0}, {"s1", 1}};
    auto table = ContingencyTable::from_log(log, zip, site);
    CHECK(table.rows == 3);  // 2 groups + overflow
    CHECK(table.at(0, 0, 0) == 1);
    CHECK(table.at(1, 1, 1) == 1);
    CHECK(table.at(2, 0, 0) == 1);
}
