#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dimbid/error.hpp"
#include "dimbid/landscape.hpp"
#include "dimbid/rng.hpp"

using namespace dimbid;

namespace {

BidPlan plan_of(std::vector<std::vector<double>> factors) {
    BidPlan p;
    p.base_bid = 1.0;
    p.factors = std::move(factors);
    return p;
}

MarginalVolumeModel model_of(std::vector<double> intercepts, std::vector<std::vector<double>> betas) {
    MarginalVolumeModel m;
    m.intercepts = std::move(intercepts);
    m.betas = std::move(betas);
    return m;
}

// random plans within [0.5, 2.0]
BidPlan random_plan(Rng& rng, const std::vector<int>& groups) {
    std::vector<std::vector<double>> f;
    for (int g : groups) {
        std::vector<double> row;
        for (int i = 0; i < g; ++i) row.push_back(rng.uniform(0.5, 2.0));
        f.push_back(std::move(row));
    }
    return plan_of(std::move(f));
}

std::vector<PlanVolumeObservation> noiseless_history(const MarginalVolumeModel& truth,
                                                     const std::vector<int>& groups, int days,
                                                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PlanVolumeObservation> history;
    for (int d = 0; d < days; ++d) {
        PlanVolumeObservation obs;
        obs.plan = random_plan(rng, groups);
        obs.volumes = predict_volume_marginal(truth, obs.plan);
        history.push_back(std::move(obs));
    }
    return history;
}

}  // namespace

TEST_CASE("fit_cpm: two points define the exact line") {
    const CpmObservation obs[] = {{1.0, 3.0, 1.0}, {2.0, 5.0, 1.0}};
    auto fit = fit_cpm(obs);
    CHECK(fit.model.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.model.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.rss == doctest::Approx(0.0));
}

TEST_CASE("fit_cpm: flat landscape fits a constant") {
    const CpmObservation obs[] = {{0.8, 2.5, 5.0}, {1.0, 2.5, 3.0}, {1.4, 2.5, 9.0}};
    auto fit = fit_cpm(obs);
    CHECK(fit.model.slope == doctest::Approx(0.0));
    CHECK(fit.model.intercept == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("fit_cpm: noiseless generate-then-fit recovers parameters") {
    std::vector<CpmObservation> obs;
    for (double f : {0.6, 0.9, 1.0, 1.3, 1.8}) obs.push_back({f, 0.5 + 1.5 * f, 2.0 + f});
    auto fit = fit_cpm(obs);
    CHECK(fit.model.intercept == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fit.model.slope == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("fit_cpm: downward-sloping data clamps to zero slope") {
    const CpmObservation obs[] = {{1.0, 5.0, 1.0}, {2.0, 3.0, 1.0}, {3.0, 1.0, 1.0}};
    auto fit = fit_cpm(obs);
    CHECK(fit.model.slope == 0.0);
    CHECK(fit.model.intercept == doctest::Approx(3.0).epsilon(1e-12));  // weighted mean
}

TEST_CASE("fit_cpm: identical factors are unidentifiable") {
    const CpmObservation obs[] = {{1.0, 3.0, 1.0}, {1.0, 4.0, 2.0}};
    CHECK_THROWS_WITH_AS(fit_cpm(obs), doctest::Contains("unidentifiable"), Error);
}

TEST_CASE("predict_cpm examples") {
    CHECK(predict_cpm(CpmModel{0.0, 1.0}, 1.0) == doctest::Approx(1.0));
    CHECK(predict_cpm(CpmModel{1.0, 2.0}, 2.0) == doctest::Approx(5.0));
    CHECK(predict_cpm(CpmModel{3.25, 0.0}, 1.7) == doctest::Approx(3.25));
}

TEST_CASE("predict_volume_marginal: zero betas give the intercepts") {
    auto m = model_of({4.0, 7.0}, {{0.0, 0.0}, {0.0, 0.0, 0.0}});
    auto n = predict_volume_marginal(m, plan_of({{1.0, 2.0}, {0.5, 1.0, 1.5}}));
    for (double v : n[0]) CHECK(v == doctest::Approx(4.0));
    for (double v : n[1]) CHECK(v == doctest::Approx(7.0));
}

TEST_CASE("predict_volume_marginal: single dimension reduces to intercept plus linear term") {
    auto m = model_of({2.0}, {{3.0, 5.0}});
    auto n = predict_volume_marginal(m, plan_of({{1.5, 0.5}}));
    CHECK(n[0][0] == doctest::Approx(2.0 + 3.0 * 1.5));
    CHECK(n[0][1] == doctest::Approx(2.0 + 5.0 * 0.5));
}

TEST_CASE("predict_volume_marginal: K=2 hand evaluation at unit factors") {
    // n_i^1 = a1 + b1_i * 1 * (sum_j b2_j), n_j^2 = a2 + b2_j * (sum_i b1_i)
    auto m = model_of({1.0, 2.0}, {{0.5, 1.5}, {0.25, 0.75}});
    auto n = predict_volume_marginal(m, plan_of({{1.0, 1.0}, {1.0, 1.0}}));
    CHECK(n[0][0] == doctest::Approx(1.0 + 0.5 * 1.0));   // sigma_2 = 1.0
    CHECK(n[0][1] == doctest::Approx(1.0 + 1.5 * 1.0));
    CHECK(n[1][0] == doctest::Approx(2.0 + 0.25 * 2.0));  // sigma_1 = 2.0
    CHECK(n[1][1] == doctest::Approx(2.0 + 0.75 * 2.0));
}

TEST_CASE("predict_volume_marginal: shape mismatch is an error") {
    auto m = model_of({1.0}, {{0.5, 1.5}});
    CHECK_THROWS_AS(predict_volume_marginal(m, plan_of({{1.0}})), Error);
    CHECK_THROWS_AS(predict_volume_marginal(m, plan_of({{1.0, 1.0}, {1.0}})), Error);
}

TEST_CASE("monotonicity: predictions never decrease when one factor rises") {
    Rng rng(404);
    for (int trial = 0; trial < 40; ++trial) {
        const std::vector<int> groups{2, 3};
        MarginalVolumeModel m;
        m.intercepts = {rng.uniform(0, 5), rng.uniform(0, 5)};
        for (int g : groups) {
            std::vector<double> b;
            for (int i = 0; i < g; ++i) b.push_back(rng.uniform(0.0, 3.0));
            m.betas.push_back(std::move(b));
        }
        BidPlan base = random_plan(rng, groups);
        BidPlan bumped = base;
        const int k = static_cast<int>(rng.uniform_index(2));
        const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(groups[static_cast<std::size_t>(k)])));
        bumped.factors[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] += rng.uniform(0.01, 1.0);

        auto n0 = predict_volume_marginal(m, base);
        auto n1 = predict_volume_marginal(m, bumped);
        for (std::size_t kk = 0; kk < n0.size(); ++kk)
            for (std::size_t ii = 0; ii < n0[kk].size(); ++ii)
                CHECK(n1[kk][ii] >= n0[kk][ii] - 1e-12);
    }
}

TEST_CASE("gauge invariance: rescaling betas across dimensions preserves predictions") {
    auto m = model_of({1.0, 2.0}, {{0.5, 1.5}, {0.25, 0.75}});
    const double c = 3.7;
    auto scaled = m;
    for (double& b : scaled.betas[0]) b *= c;
    for (double& b : scaled.betas[1]) b /= c;
    Rng rng(17);
    for (int t = 0; t < 10; ++t) {
        auto plan = random_plan(rng, {2, 2});
        auto n0 = predict_volume_marginal(m, plan);
        auto n1 = predict_volume_marginal(scaled, plan);
        for (std::size_t k = 0; k < n0.size(); ++k)
            for (std::size_t i = 0; i < n0[k].size(); ++i)
                CHECK(n1[k][i] == doctest::Approx(n0[k][i]).epsilon(1e-12));
    }
}

TEST_CASE("fit_volume_marginal: noiseless recovery, held-out predictions within 1e-6 relative") {
    auto truth = model_of({5.0, 12.0}, {{40.0, 25.0, 10.0}, {0.2, 0.5, 0.3}});
    const std::vector<int> groups{3, 3};
    auto history = noiseless_history(truth, groups, 10, 31);

    MarginalFitOptions options;
    options.seed = 7;
    auto fit = fit_volume_marginal(history, options);
    CHECK(fit.objective < 1e-8);

    Rng rng(99);
    for (int t = 0; t < 20; ++t) {
        auto plan = random_plan(rng, groups);
        auto want = predict_volume_marginal(truth, plan);
        auto got = predict_volume_marginal(fit.model, plan);
        for (std::size_t k = 0; k < want.size(); ++k)
            for (std::size_t i = 0; i < want[k].size(); ++i)
                CHECK(std::abs(got[k][i] - want[k][i]) <=
                      1e-6 * std::max(1.0, std::abs(want[k][i])));
    }
    // normalization constraint holds exactly for every dimension after the first
    double sum = 0;
    for (double b : fit.model.betas[1]) sum += b;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit_volume_marginal: refitting a model's own output reproduces its predictions") {
    auto truth = model_of({2.0, 3.0}, {{8.0, 4.0}, {0.6, 0.4}});
    auto history = noiseless_history(truth, {2, 2}, 8, 5);
    MarginalFitOptions options;
    options.seed = 11;
    auto fit = fit_volume_marginal(history, options);
    auto history2 = noiseless_history(fit.model, {2, 2}, 8, 5);
    auto refit = fit_volume_marginal(history2, options);
    Rng rng(55);
    for (int t = 0; t < 10; ++t) {
        auto plan = random_plan(rng, {2, 2});
        auto a = predict_volume_marginal(fit.model, plan);
        auto b = predict_volume_marginal(refit.model, plan);
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t i = 0; i < a[k].size(); ++i)
                CHECK(b[k][i] == doctest::Approx(a[k][i]).epsilon(1e-6));
    }
}

TEST_CASE("fit_volume_marginal: a single repeated plan is rank-deficient") {
    auto truth = model_of({5.0, 12.0}, {{40.0, 25.0}, {0.5, 0.5}});
    PlanVolumeObservation obs;
    obs.plan = plan_of({{1.0, 1.0}, {1.0, 1.0}});
    obs.volumes = predict_volume_marginal(truth, obs.plan);
    std::vector<PlanVolumeObservation> history(6, obs);
    CHECK_THROWS_WITH_AS(fit_volume_marginal(history), doctest::Contains("perturb"), Error);
}

TEST_CASE("fit gradient matches central finite differences") {
    Rng rng(2024);
    const std::vector<int> groups{2, 3};
    for (int trial = 0; trial < 20; ++trial) {
        MarginalVolumeModel m;
        m.intercepts = {rng.uniform(0.1, 4.0), rng.uniform(0.1, 4.0)};
        m.betas.clear();
        for (int g : groups) {
            std::vector<double> b;
            for (int i = 0; i < g; ++i) b.push_back(rng.uniform(0.05, 2.0));
            m.betas.push_back(std::move(b));
        }
        auto truth = model_of({3.0, 6.0}, {{10.0, 20.0}, {0.3, 0.5, 0.2}});
        auto history = noiseless_history(truth, groups, 6, 1000 + static_cast<std::uint64_t>(trial));

        auto grad = marginal_fit_gradient(m, history);
        const double h = 1e-6;
        std::size_t idx = 0;
        auto check_param = [&](double* p) {
            const double save = *p;
            *p = save + h;
            const double up = marginal_fit_objective(m, history);
            *p = save - h;
            const double dn = marginal_fit_objective(m, history);
            *p = save;
            const double fd = (up - dn) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(grad[idx]), 1.0});
            CHECK(std::abs(grad[idx] - fd) <= 1e-5 * scale);
            ++idx;
        };
        for (auto& a : m.intercepts) check_param(&a);
        for (auto& row : m.betas)
            for (auto& b : row) check_param(&b);
    }
}

TEST_CASE("fit_volume_linear: least squares through the origin, clamped") {
    std::vector<std::vector<double>> factors{{1.0, 1.0}, {2.0, 1.0}};
    std::vector<std::vector<double>> volumes{{3.0, 5.0}, {6.0, 5.0}};
    auto m = fit_volume_linear(factors, volumes);
    CHECK(m.betas[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m.betas[1] == doctest::Approx(5.0).epsilon(1e-12));
}
