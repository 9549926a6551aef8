#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "dimbid/aggregate.hpp"
#include "dimbid/error.hpp"
#include "dimbid/log_io.hpp"
#include "dimbid/rng.hpp"

using namespace dimbid;

namespace {

ImpressionLog parse(const std::string& csv) {
    std::istringstream in(csv);
    return ingest_log(in);
}

DimensionSpec single_group_spec(const std::string& name) {
    DimensionSpec spec;
    spec.name = name;
    spec.group_count = 1;
    spec.group_of["*"] = 0;  // placeholder; tests map values explicitly
    return spec;
}

}  // namespace

TEST_CASE("ingest: header-only stream yields no records") {
    auto log = parse("day,impression_id,zip,site,device,hour,cost_micros,revenue_micros,converted\n");
    CHECK(log.records.empty());
    CHECK(log.feature_names == std::vector<std::string>{"zip", "site", "device", "hour"});
}

TEST_CASE("ingest: single zero-revenue row") {
    auto log = parse(
        "day,impression_id,zip,site,device,hour,cost_micros,revenue_micros,converted\n"
        "0,x,98004,a.com,mobile,7,2000,0,0\n");
    REQUIRE(log.records.size() == 1);
    const auto& r = log.records[0];
    CHECK(r.day == 0);
    CHECK(r.cost_micros == 2000);
    CHECK(r.revenue_micros == 0);
    CHECK_FALSE(r.converted);
    CHECK(r.features == std::vector<std::string>{"98004", "a.com", "mobile", "7"});
}

TEST_CASE("ingest: three-row fixture matches hand-transcribed fields") {
    auto log = ingest_log_file(std::string(TEST_DATA_DIR) + "/log_fixture.csv");
    REQUIRE(log.records.size() == 3);
    CHECK(log.records[0].id == "a-001");
    CHECK(log.records[0].cost_micros == 2000);
    CHECK(log.records[1].day == 1);
    CHECK(log.records[1].revenue_micros == 120000);
    CHECK(log.records[1].converted);
    CHECK(log.records[1].features[1] == "video.example");
    CHECK(log.records[2].day == 2);
    CHECK(log.records[2].cost_micros == 1500);
    CHECK(log.records[2].features[3] == "13");
}

TEST_CASE("ingest: malformed rows name the offending row") {
    CHECK_THROWS_WITH_AS(parse("day,impression_id,cost_micros,revenue_micros,converted\n"
                               "0,x,abc,0,0\n"),
                         doctest::Contains("row 2"), Error);
    CHECK_THROWS_WITH_AS(parse("day,impression_id,cost_micros,revenue_micros,converted\n"
                               "0,x,-5,0,0\n"),
                         doctest::Contains("negative cost"), Error);
    CHECK_THROWS_WITH_AS(parse("day,impression_id,cost_micros,revenue_micros,converted\n"
                               "0,x,5,0,2\n"),
                         doctest::Contains("converted"), Error);
    CHECK_THROWS_AS(parse("day,impression_id,cost_micros\n0,x,5\n"), Error);
    // revenue on an unconverted row breaks the record invariant
    CHECK_THROWS_AS(parse("day,impression_id,cost_micros,revenue_micros,converted\n0,x,5,10,0\n"), Error);
}

TEST_CASE("ingest/write round trip preserves rows") {
    auto log = ingest_log_file(std::string(TEST_DATA_DIR) + "/log_fixture.csv");
    std::ostringstream out;
    write_log(out, log);
    auto again = parse(out.str());
    REQUIRE(again.records.size() == log.records.size());
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        CHECK(again.records[i].id == log.records[i].id);
        CHECK(again.records[i].cost_micros == log.records[i].cost_micros);
        CHECK(again.records[i].features == log.records[i].features);
    }
}

TEST_CASE("aggregate: hand-computed cpm and rpm") {
    // costs 0.001 and 0.003, revenue 0.05 on the second -> cpm 2.0, rpm 25.0
    auto log = parse(
        "day,impression_id,zip,cost_micros,revenue_micros,converted\n"
        "0,a,v1,1000,0,0\n"
        "0,b,v1,3000,50000,1\n");
    DimensionSpec spec = single_group_spec("zip");
    spec.group_of = {{"v1", 0}};
    auto res = aggregate(log, spec, DayRange{0, 0});
    REQUIRE(res.groups.size() == 1);
    CHECK(res.groups[0].volume == 2);
    CHECK(res.groups[0].spend_micros == 4000);
    CHECK(res.groups[0].revenue_micros == 50000);
    CHECK(res.groups[0].cpm() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(res.groups[0].rpm() == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("aggregate: empty group is undefined, single group equals totals") {
    auto log = parse(
        "day,impression_id,zip,cost_micros,revenue_micros,converted\n"
        "0,a,v1,1000,0,0\n"
        "1,b,v1,3000,50000,1\n");
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 2;
    spec.group_of = {{"v1", 0}, {"v2", 1}};
    auto res = aggregate(log, spec, DayRange{0, 5});
    CHECK(res.groups[0].volume == 2);
    CHECK_FALSE(res.groups[1].has_rates());
    CHECK(res.groups[1].volume == 0);
    auto totals = res.totals();
    CHECK(totals.volume == 2);
    CHECK(totals.spend_micros == 4000);
}

TEST_CASE("aggregate: strict mode rejects unmapped values, lax mode routes to overflow") {
    auto log = parse(
        "day,impression_id,zip,cost_micros,revenue_micros,converted\n"
        "0,a,mystery,1000,0,0\n");
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 1;
    spec.group_of = {{"known", 0}};
    CHECK_THROWS_WITH_AS(aggregate(log, spec, DayRange{0, 0}, true), doctest::Contains("mystery"), Error);
    auto res = aggregate(log, spec, DayRange{0, 0}, false);
    CHECK(res.overflow.volume == 1);
    CHECK(res.groups[0].volume == 0);
}

TEST_CASE("aggregate: empty day range is an error") {
    auto log = parse("day,impression_id,zip,cost_micros,revenue_micros,converted\n");
    DimensionSpec spec = single_group_spec("zip");
    CHECK_THROWS_AS(aggregate(log, spec, DayRange{3, 2}), Error);
}

TEST_CASE("aggregate: partition consistency on a randomized log") {
    // dims: zip (3 groups), site (2 groups); totals must agree along both
    Rng rng(20240817);
    std::ostringstream csv;
    csv << "day,impression_id,zip,site,cost_micros,revenue_micros,converted\n";
    const char* zips[] = {"z0", "z1", "z2", "z3", "z4", "z5"};
    const char* sites[] = {"s0", "s1", "s2", "s3"};
    for (int i = 0; i < 500; ++i) {
        const bool conv = rng.bernoulli(0.1);
        csv << (i % 14) << ",r" << i << ',' << zips[rng.uniform_index(6)] << ','
            << sites[rng.uniform_index(4)] << ',' << (1000 + rng.uniform_index(5000)) << ','
            << (conv ? 10000 + rng.uniform_index(100000) : 0) << ',' << (conv ? 1 : 0) << '\n';
    }
    auto log = parse(csv.str());

    DimensionSpec zip;
    zip.name = "zip";
    zip.group_count = 3;
    zip.group_of = {{"z0", 0}, {"z1", 0}, {"z2", 1}, {"z3", 1}, {"z4", 2}, {"z5", 2}};
    DimensionSpec site;
    site.name = "site";
    site.group_count = 2;
    site.group_of = {{"s0", 0}, {"s1", 0}, {"s2", 1}, {"s3", 1}};

    auto rz = aggregate(log, zip, DayRange{0, 13});
    auto rs = aggregate(log, site, DayRange{0, 13});
    const auto tz = rz.totals();
    const auto ts = rs.totals();
    CHECK(tz.volume == 500);
    CHECK(ts.volume == 500);  // same total along any dimension
    CHECK(tz.spend_micros == ts.spend_micros);
    CHECK(tz.revenue_micros == ts.revenue_micros);
    // per-dimension spend identity: summing over all K dimensions gives K * total
    const Micros sum_k = tz.spend_micros + ts.spend_micros;
    CHECK(sum_k == 2 * tz.spend_micros);
}

TEST_CASE("accumulative rpm: constant volume and revenue gives a constant series") {
    std::ostringstream csv;
    csv << "day,impression_id,zip,cost_micros,revenue_micros,converted\n";
    for (int d = 0; d < 5; ++d) {
        csv << d << ",a" << d << ",v1,1000,20000,1\n";
        csv << d << ",b" << d << ",v1,1000,0,0\n";
    }
    auto log = parse(csv.str());
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 1;
    spec.group_of = {{"v1", 0}};
    auto series = accumulative_rpm_series(log, spec, 0, 5);
    for (int t = 0; t < 5; ++t) {
        CHECK(series.defined[static_cast<std::size_t>(t)] == 1);
        CHECK(series.rpm[static_cast<std::size_t>(t)] == doctest::Approx(10.0).epsilon(1e-12));
    }
}

TEST_CASE("accumulative rpm: revenue landing on day 3 of a 5-day fixture") {
    // 10 impressions/day at zero cost; 0.06 currency lands on day index 2.
    std::ostringstream csv;
    csv << "day,impression_id,zip,cost_micros,revenue_micros,converted\n";
    for (int d = 0; d < 5; ++d)
        for (int i = 0; i < 10; ++i) {
            const bool pay = d == 2 && i == 0;
            csv << d << ",r" << d << '-' << i << ",v1,1000," << (pay ? 60000 : 0) << ','
                << (pay ? 1 : 0) << '\n';
        }
    auto log = parse(csv.str());
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 1;
    spec.group_of = {{"v1", 0}};
    auto series = accumulative_rpm_series(log, spec, 0, 5);
    // hand-computed: 0, 0, 0.06/30*1000 = 2, 0.06/40*1000 = 1.5, 0.06/50*1000 = 1.2
    CHECK(series.rpm[0] == 0.0);
    CHECK(series.rpm[1] == 0.0);
    CHECK(series.rpm[2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(series.rpm[3] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(series.rpm[4] == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(series.defined[0] == 1);  // volume exists from day 0
}

TEST_CASE("accumulative rpm: zero-volume prefix is flagged undefined") {
    auto log = parse(
        "day,impression_id,zip,cost_micros,revenue_micros,converted\n"
        "2,a,v1,1000,0,0\n");
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 1;
    spec.group_of = {{"v1", 0}};
    auto series = accumulative_rpm_series(log, spec, 0, 4);
    CHECK(series.defined[0] == 0);
    CHECK(series.rpm[0] == 0.0);
    CHECK(series.defined[2] == 1);
    CHECK_THROWS_AS(accumulative_rpm_series(log, spec, 7, 4), Error);  // unknown group
}

TEST_CASE("cpm/rpm scale linearly with a uniform cost/revenue scaling") {
    auto base = parse(
        "day,impression_id,zip,cost_micros,revenue_micros,converted\n"
        "0,a,v1,1000,30000,1\n"
        "0,b,v1,2000,0,0\n");
    auto scaled = parse(
        "day,impression_id,zip,cost_micros,revenue_micros,converted\n"
        "0,a,v1,3000,90000,1\n"
        "0,b,v1,6000,0,0\n");
    DimensionSpec spec;
    spec.name = "zip";
    spec.group_count = 1;
    spec.group_of = {{"v1", 0}};
    auto rb = aggregate(base, spec, DayRange{0, 0});
    auto rs = aggregate(scaled, spec, DayRange{0, 0});
    CHECK(rs.groups[0].cpm() == doctest::Approx(3.0 * rb.groups[0].cpm()).epsilon(1e-12));
    CHECK(rs.groups[0].rpm() == doctest::Approx(3.0 * rb.groups[0].rpm()).epsilon(1e-12));
}

TEST_CASE("seed derivation is stable and tag-sensitive") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
}
