#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowcast/ensemble.hpp"
#include "flowcast/rng.hpp"
#include "helpers.hpp"

using namespace flowcast;

namespace {

ProbabilisticForecast flat_forecast(const std::vector<Date>& dates,
                                    const std::vector<QuantileLevel>& levels,
                                    const std::vector<double>& row) {
    ProbabilisticForecast f;
    f.dates = dates;
    f.levels = levels;
    for (std::size_t i = 0; i < dates.size(); ++i) {
        f.values.insert(f.values.end(), row.begin(), row.end());
    }
    return f;
}

ForecastPanel make_panel(const std::vector<std::vector<double>>& rows) {
    const std::vector<Date> dates = {Date{10}, Date{11}};
    const std::vector<QuantileLevel> levels = {QuantileLevel(0.5)};
    ForecastPanel panel;
    panel.gauge_id = "g";
    for (std::size_t m = 0; m < rows.size(); ++m) {
        panel.algorithms.push_back("alg" + std::to_string(m));
        ProbabilisticForecast f;
        f.dates = dates;
        f.levels = levels;
        f.values = {rows[m][0], rows[m][0]};
        panel.forecasts.push_back(std::move(f));
    }
    return panel;
}

}  // namespace

TEST_CASE("combining five identical forecasts returns that forecast") {
    const std::vector<Date> dates = {Date{1}, Date{2}, Date{3}};
    const std::vector<QuantileLevel> levels = canonical_levels();
    ForecastPanel panel;
    panel.gauge_id = "g";
    for (int m = 0; m < 5; ++m) {
        panel.algorithms.push_back("a" + std::to_string(m));
        panel.forecasts.push_back(flat_forecast(dates, levels, {1.0, 2.0, 3.0, 4.0, 5.0}));
    }
    const CrossingRepair mean_result = combine(panel, CombineRule::mean);
    const CrossingRepair median_result = combine(panel, CombineRule::median);
    CHECK(mean_result.forecast.values == panel.forecasts[0].values);
    CHECK(median_result.forecast.values == panel.forecasts[0].values);
    CHECK(mean_result.repaired_rows == 0);
}

TEST_CASE("mean and median combiners on skewed values") {
    const ForecastPanel plain = make_panel({{1.0}, {2.0}, {3.0}, {4.0}, {5.0}});
    CHECK(combine(plain, CombineRule::mean).forecast.values[0] == doctest::Approx(3.0));
    CHECK(combine(plain, CombineRule::median).forecast.values[0] == 3.0);

    const ForecastPanel skewed = make_panel({{1.0}, {2.0}, {3.0}, {4.0}, {100.0}});
    CHECK(combine(skewed, CombineRule::mean).forecast.values[0] == doctest::Approx(22.0));
    CHECK(combine(skewed, CombineRule::median).forecast.values[0] == 3.0);
}

TEST_CASE("combiner input validation") {
    ForecastPanel short_panel = make_panel({{1.0}, {2.0}, {3.0}, {4.0}});
    CHECK_THROWS_AS(combine(short_panel, CombineRule::mean), std::invalid_argument);

    ForecastPanel misaligned = make_panel({{1.0}, {2.0}, {3.0}, {4.0}, {5.0}});
    misaligned.forecasts[2].dates[0] = Date{99};
    CHECK_THROWS_AS(combine(misaligned, CombineRule::mean), std::invalid_argument);
}

TEST_CASE("combined values stay within the five and need no repair for monotone inputs") {
    Rng rng(81);
    const std::vector<QuantileLevel> levels = canonical_levels();
    const std::vector<Date> dates = {Date{5}};
    for (int trial = 0; trial < 200; ++trial) {
        ForecastPanel panel;
        panel.gauge_id = "g";
        std::vector<std::vector<double>> rows(5, std::vector<double>(5));
        for (int m = 0; m < 5; ++m) {
            for (double& v : rows[m]) v = rng.next_double(-4.0, 4.0);
            std::sort(rows[m].begin(), rows[m].end());
            panel.algorithms.push_back("a");
            panel.forecasts.push_back(flat_forecast(dates, levels, rows[m]));
        }
        for (CombineRule rule : {CombineRule::mean, CombineRule::median}) {
            const CrossingRepair result = combine(panel, rule);
            CHECK(result.repaired_rows == 0);
            for (std::size_t l = 0; l < 5; ++l) {
                double lo = 1e300, hi = -1e300;
                for (int m = 0; m < 5; ++m) {
                    lo = std::min(lo, rows[m][l]);
                    hi = std::max(hi, rows[m][l]);
                }
                CHECK(result.forecast.at(0, l) >= lo - 1e-12);
                CHECK(result.forecast.at(0, l) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("relative improvement fixtures") {
    CHECK(relative_improvement(2.0, 2.0) == 0.0);
    CHECK(relative_improvement(1.5, 2.0) == doctest::Approx(25.0));
    CHECK(relative_improvement(3.0, 2.0) == doctest::Approx(-50.0));
    CHECK_THROWS_AS(relative_improvement(1.0, 0.0), std::runtime_error);

    double prev = 1e300;
    for (double score = 0.1; score < 5.0; score += 0.1) {
        const double imp = relative_improvement(score, 2.0);
        CHECK(imp < prev);
        prev = imp;
    }
}

TEST_CASE("rank_algorithms fixtures") {
    const std::vector<double> scores = {1.2, 1.5, 1.1, 2.0, 3.0, 4.0, 5.0};
    CHECK(rank_algorithms(scores) ==
          std::vector<double>{2.0, 3.0, 1.0, 4.0, 5.0, 6.0, 7.0});

    CHECK(rank_algorithms(std::vector<double>(7, 3.3)) == std::vector<double>(7, 4.0));

    const std::vector<double> tie = {1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    const std::vector<double> ranks = rank_algorithms(tie);
    CHECK(ranks[0] == 1.5);
    CHECK(ranks[1] == 1.5);
    CHECK(ranks[2] == 3.0);

    const std::vector<double> bad = {1.0, std::nan(""), 2.0};
    CHECK_THROWS_AS(rank_algorithms(bad), std::invalid_argument);
}

TEST_CASE("rank vectors over seven algorithms always sum to 28") {
    Rng rng(82);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> scores(7);
        for (double& s : scores) {
            s = rng.next_double() < 0.3 ? 1.0 : rng.next_double(0.0, 3.0);  // frequent ties
        }
        const std::vector<double> ranks = rank_algorithms(scores);
        double sum = 0.0;
        for (double r : ranks) sum += r;
        CHECK(sum == doctest::Approx(28.0).epsilon(1e-12));
    }
}

TEST_CASE("spearman fixtures") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> inc = {10.0, 20.0, 30.0, 40.0};
    const std::vector<double> dec = {5.0, 4.0, 3.0, 2.0};
    CHECK(spearman(x, inc).value() == doctest::Approx(1.0));
    CHECK(spearman(x, dec).value() == doctest::Approx(-1.0));

    const std::vector<double> y = {2.0, 1.0, 4.0, 3.0};
    CHECK(spearman(x, y).value() == doctest::Approx(0.6).epsilon(1e-12));

    const std::vector<double> constant = {7.0, 7.0, 7.0, 7.0};
    CHECK_FALSE(spearman(x, constant).has_value());
    const std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(spearman(two, two), std::invalid_argument);
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
    Rng rng(83);
    std::vector<double> x(50), y(50);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.next_gauss();
        y[i] = 0.5 * x[i] + rng.next_gauss();
    }
    const double base = spearman(x, y).value();
    std::vector<double> tx(x.size()), ty(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        tx[i] = std::exp(x[i]);
        ty[i] = std::atan(y[i]) * 3.0 + 11.0;
    }
    CHECK(spearman(tx, ty).value() == doctest::Approx(base).epsilon(1e-12));
    CHECK(spearman(tx, y).value() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("aggregate_report single gauge mirrors that gauge") {
    GaugeEvaluation g;
    g.gauge_id = "g1";
    // 3 algorithms x 2 levels; qr is the benchmark.
    g.scores = {2.0, 4.0, 1.0, 5.0, 2.0, 3.0};
    g.importance = {0.7, 0.2, 0.1};
    const std::vector<std::string> algos = {"qr", "b", "c"};
    const std::vector<QuantileLevel> levels = {QuantileLevel(0.1), QuantileLevel(0.9)};
    const std::vector<std::string> features = {"f1", "f2", "f3"};
    const EvaluationReport report = aggregate_report({g}, algos, levels, 0, features);

    CHECK(report.improvements[report.cube_index(0, 0, 0)] == 0.0);
    CHECK(report.improvements[report.cube_index(0, 0, 1)] == 0.0);
    CHECK(report.improvements[report.cube_index(0, 1, 0)] == doctest::Approx(50.0));
    CHECK(report.improvements[report.cube_index(0, 1, 1)] == doctest::Approx(-25.0));
    CHECK(report.mean_improvement[report.agg_index(1, 0)] == doctest::Approx(50.0));
    CHECK(report.median_improvement[report.agg_index(1, 0)] == doctest::Approx(50.0));
    // Level 0 scores (2.0, 1.0, 2.0): qr and c tie for second.
    CHECK(report.mean_rank[report.agg_index(0, 0)] == 2.5);
    CHECK(report.mean_rank[report.agg_index(1, 0)] == 1.0);
    CHECK(report.mean_rank[report.agg_index(2, 0)] == 2.5);

    CHECK(report.importance_rank[0] == 1.0);
    CHECK(report.importance_rank[1] == 2.0);
    CHECK(report.importance_rank[2] == 3.0);
    CHECK(report.importance_mean_rank == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(report.importance_order() == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("aggregate_report two-gauge aggregates match hand computation") {
    const std::vector<std::string> algos = {"qr", "b"};
    const std::vector<QuantileLevel> levels = {QuantileLevel(0.5)};
    GaugeEvaluation g1{"g1", {2.0, 1.0}, {}, {}, {}};
    GaugeEvaluation g2{"g2", {4.0, 5.0}, {}, {}, {}};
    const EvaluationReport report = aggregate_report({g1, g2}, algos, levels, 0, {});

    // Improvements for b: g1 -> 100*(2-1)/2 = 50, g2 -> 100*(4-5)/4 = -25.
    CHECK(report.improvements[report.cube_index(0, 1, 0)] == doctest::Approx(50.0));
    CHECK(report.improvements[report.cube_index(1, 1, 0)] == doctest::Approx(-25.0));
    CHECK(report.mean_improvement[report.agg_index(1, 0)] == doctest::Approx(12.5));
    CHECK(report.median_improvement[report.agg_index(1, 0)] == doctest::Approx(12.5));
    // Benchmark aggregates are identically zero.
    CHECK(report.mean_improvement[report.agg_index(0, 0)] == 0.0);
    CHECK(report.median_improvement[report.agg_index(0, 0)] == 0.0);
    CHECK(report.overall_mean_levels_first[0] == 0.0);
    CHECK(report.overall_median_gauges_first[0] == 0.0);
    // Ranks: g1 favours b (1 vs 2), g2 favours qr.
    CHECK(report.ranks[report.cube_index(0, 0, 0)] == 2.0);
    CHECK(report.ranks[report.cube_index(0, 1, 0)] == 1.0);
    CHECK(report.ranks[report.cube_index(1, 0, 0)] == 1.0);
    CHECK(report.ranks[report.cube_index(1, 1, 0)] == 2.0);
    CHECK(report.mean_rank[report.agg_index(0, 0)] == doctest::Approx(1.5));
    CHECK(report.mean_rank[report.agg_index(1, 0)] == doctest::Approx(1.5));
}

TEST_CASE("aggregate_report honours the ranked mask") {
    const std::vector<std::string> algos = {"qr", "b", "c"};
    const std::vector<QuantileLevel> levels = {QuantileLevel(0.5)};
    GaugeEvaluation g{"g1", {2.0, 1.0, 3.0}, {}, {}, {}};
    const EvaluationReport report =
        aggregate_report({g}, algos, levels, 0, {}, {false, true, true});
    CHECK(std::isnan(report.ranks[report.cube_index(0, 0, 0)]));
    CHECK(report.ranks[report.cube_index(0, 1, 0)] == 1.0);
    CHECK(report.ranks[report.cube_index(0, 2, 0)] == 2.0);
    // Improvements vs the unranked benchmark are still defined.
    CHECK(report.improvements[report.cube_index(0, 1, 0)] == doctest::Approx(50.0));
}

TEST_CASE("correlation report is a valid ordered spearman matrix") {
    Rng rng(84);
    const std::size_t n_days = 120;
    std::vector<double> flow(n_days);
    for (std::size_t i = 0; i < n_days; ++i) {
        flow[i] = 10.0 + std::sin(static_cast<double>(i) / 5.0) + 0.3 * rng.next_gauss();
    }
    const SupervisedSet samples = build_supervised(
        testutil::make_daily(Date{0}, flow), testutil::make_meteo(Date{0}, n_days));
    std::vector<std::size_t> order(kPredictorCount);
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;

    const CorrelationReport report = correlation_report(samples, order);
    const std::size_t v = report.variables.size();
    REQUIRE(v == kPredictorCount + 1);
    CHECK(report.variables[0] == "target");
    for (std::size_t i = 0; i < v; ++i) {
        CHECK(report.at(i, i) == 1.0);
        for (std::size_t j = 0; j < v; ++j) {
            const double r = report.at(i, j);
            if (!std::isnan(r)) {
                CHECK(r >= -1.0 - 1e-12);
                CHECK(r <= 1.0 + 1e-12);
                CHECK(report.at(j, i) == r);
            }
        }
    }
    // Lag-1 flow is strongly rank-correlated with the target on this fixture.
    CHECK(report.at(0, 1) > 0.5);
}
