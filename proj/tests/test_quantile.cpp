#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowcast/quantile.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/stats.hpp"

using namespace flowcast;

namespace {

double mean_pinball_at(const std::vector<double>& sample, double r, double a) {
    double total = 0.0;
    for (double x : sample) total += pinball_loss(r, x, QuantileLevel(a));
    return total / static_cast<double>(sample.size());
}

}  // namespace

TEST_CASE("pinball loss fixtures") {
    CHECK(pinball_loss(3.7, 3.7, QuantileLevel(0.5)) == 0.0);
    // Direct evaluation of the loss formula.
    CHECK(pinball_loss(2.0, 1.0, QuantileLevel(0.975)) == (2.0 - 1.0) * (1.0 - 0.975));
    CHECK(pinball_loss(2.0, 1.0, QuantileLevel(0.975)) == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(pinball_loss(0.0, 4.0, QuantileLevel(0.5)) == 2.0);
}

TEST_CASE("pinball loss rejects non-finite input") {
    CHECK_THROWS_AS(pinball_loss(std::nan(""), 1.0, QuantileLevel(0.5)), std::invalid_argument);
    CHECK_THROWS_AS(pinball_loss(1.0, INFINITY, QuantileLevel(0.5)), std::invalid_argument);
    CHECK_THROWS_AS(QuantileLevel(0.0), std::invalid_argument);
    CHECK_THROWS_AS(QuantileLevel(1.0), std::invalid_argument);
}

TEST_CASE("pinball loss is non-negative and zero only at the observation") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double r = rng.next_double(-10.0, 10.0);
        const double x = rng.next_double(-10.0, 10.0);
        const double a = rng.next_double(0.01, 0.99);
        const double loss = pinball_loss(r, x, QuantileLevel(a));
        CHECK(loss >= 0.0);
        if (r != x) CHECK(loss > 0.0);
    }
}

TEST_CASE("pinball loss is convex in the prediction") {
    Rng rng(12);
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.next_double(-5.0, 5.0);
        const double a = rng.next_double(0.01, 0.99);
        const double r1 = rng.next_double(-8.0, 8.0);
        const double r2 = rng.next_double(-8.0, 8.0);
        const double lambda = rng.next_double();
        const QuantileLevel level(a);
        const double blend = pinball_loss(lambda * r1 + (1.0 - lambda) * r2, x, level);
        const double bound =
            lambda * pinball_loss(r1, x, level) + (1.0 - lambda) * pinball_loss(r2, x, level);
        CHECK(blend <= bound + 1e-12);
    }
}

TEST_CASE("constant minimizing mean pinball loss is the empirical quantile") {
    // Brute-force grid over candidate constants; the empirical quantile must
    // match the grid optimum to within the loss change of one grid step.
    Rng rng(21);
    const double resolution = 5e-3;
    for (double a : {0.025, 0.10, 0.50, 0.90, 0.975}) {
        std::vector<double> sample(20);
        for (double& v : sample) v = rng.next_double(0.0, 1.0);
        const double q = quantile_type7(sample, a);

        double grid_best = 1e300;
        for (double r = -0.2; r <= 1.2; r += resolution) {
            grid_best = std::min(grid_best, mean_pinball_at(sample, r, a));
        }
        CHECK(std::abs(mean_pinball_at(sample, q, a) - grid_best) <= resolution);
    }
}

TEST_CASE("pinball_minimizer_quantile attains the grid minimum") {
    Rng rng(22);
    for (double a : {0.025, 0.10, 0.50, 0.90, 0.975}) {
        std::vector<double> sample(17);
        for (double& v : sample) v = rng.next_double(0.0, 4.0);
        const double q = pinball_minimizer_quantile(sample, a);
        const double loss_q = mean_pinball_at(sample, q, a);
        for (double r = -1.0; r <= 5.0; r += 1e-3) {
            CHECK(loss_q <= mean_pinball_at(sample, r, a) + 1e-12);
        }
    }
}

TEST_CASE("type-7 quantile reference values") {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_type7(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_type7(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile_type7(v, 0.0) == 1.0);
    CHECK(quantile_type7(v, 1.0) == 4.0);
    CHECK(quantile_type7({5.0}, 0.9) == 5.0);
}

TEST_CASE("weighted quantile reduces to type-7 under uniform weights") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.next_index(40);
        std::vector<double> values(n), weights(n, 1.0);
        for (double& v : values) v = rng.next_double(-3.0, 3.0);
        const double a = rng.next_double(0.01, 0.99);
        CHECK(weighted_quantile_type7(values, weights, a) ==
              doctest::Approx(quantile_type7(values, a)).epsilon(1e-12));
    }
}

TEST_CASE("weighted quantile point mass and zero-weight handling") {
    const std::vector<double> values = {1.0, 7.0, 3.0};
    const std::vector<double> point_mass = {0.0, 2.5, 0.0};
    const std::vector<double> all_zero = {0.0, 0.0, 0.0};
    const std::vector<double> negative = {1.0, -1.0, 1.0};
    CHECK(weighted_quantile_type7(values, point_mass, 0.025) == 7.0);
    CHECK(weighted_quantile_type7(values, point_mass, 0.975) == 7.0);
    CHECK_THROWS(weighted_quantile_type7(values, all_zero, 0.5));
    CHECK_THROWS(weighted_quantile_type7(values, negative, 0.5));
    // Monotone in the level.
    const std::vector<double> w = {0.2, 0.5, 0.3};
    double prev = -1e300;
    for (double a = 0.01; a < 1.0; a += 0.01) {
        const double q = weighted_quantile_type7(values, w, a);
        CHECK(q >= prev);
        prev = q;
    }
}

TEST_CASE("average quantile score fixtures") {
    const std::vector<QuantileLevel> levels = {QuantileLevel(0.5), QuantileLevel(0.975)};
    ProbabilisticForecast forecast;
    forecast.dates = {Date{100}, Date{101}, Date{102}};
    forecast.levels = levels;
    forecast.values = {4.0, 5.0, 4.0, 5.0, 4.0, 5.0};  // per date: [q50, q975]

    SUBCASE("perfect forecast scores zero") {
        const DatedSeries obs{{Date{100}, Date{101}, Date{102}}, {4.0, 4.0, 4.0}};
        const ScoreCard card = average_quantile_score(forecast, obs, levels[0]);
        CHECK(card.average_score == 0.0);
        CHECK(card.n == 3);
        CHECK(card.skipped == 0);
    }
    SUBCASE("arithmetic mean of per-date losses; 0.025 and 2.0 average to 1.0125") {
        ProbabilisticForecast f2;
        f2.dates = {Date{10}, Date{11}};
        f2.levels = {QuantileLevel(0.975)};
        f2.values = {2.0, 2.0};
        // Observation 1.0 gives loss (2-1)*(1-0.975) = 0.025; observation
        // 84.0 gives loss (2-84)*(0-0.975) = 79.95. Use a pair chosen to
        // land exactly on the stated losses instead:
        // loss2 = 2.0 needs (2 - x)*(0 - 0.975) = 2 -> x = 2 + 2/0.975.
        const double x2 = 2.0 + 2.0 / 0.975;
        const DatedSeries obs{{Date{10}, Date{11}}, {1.0, x2}};
        const ScoreCard card = average_quantile_score(f2, obs, QuantileLevel(0.975));
        const double l1 = pinball_loss(2.0, 1.0, QuantileLevel(0.975));
        const double l2 = pinball_loss(2.0, x2, QuantileLevel(0.975));
        CHECK(l1 == doctest::Approx(0.025).epsilon(1e-12));
        CHECK(l2 == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(card.average_score == doctest::Approx(1.0125).epsilon(1e-12));
        CHECK(card.average_score == (l1 + l2) / 2.0);
    }
    SUBCASE("dates missing from observations are skipped and counted") {
        const DatedSeries obs{{Date{100}, Date{102}}, {4.0, 4.0}};
        const ScoreCard card = average_quantile_score(forecast, obs, levels[0]);
        CHECK(card.n == 2);
        CHECK(card.skipped == 1);
        CHECK(card.average_score == 0.0);
    }
    SUBCASE("empty overlap is an error") {
        const DatedSeries obs{{Date{900}}, {4.0}};
        CHECK_THROWS_AS(average_quantile_score(forecast, obs, levels[0]), std::runtime_error);
    }
    SUBCASE("unknown level is an error") {
        const DatedSeries obs{{Date{100}}, {4.0}};
        CHECK_THROWS_AS(average_quantile_score(forecast, obs, QuantileLevel(0.33)),
                        std::invalid_argument);
    }
}

TEST_CASE("repair_crossing fixtures") {
    const std::vector<QuantileLevel> five = canonical_levels();
    SUBCASE("already sorted row is unchanged") {
        const CrossingRepair r = repair_crossing({Date{1}}, five, {1.0, 2.0, 3.0, 4.0, 5.0});
        CHECK(r.repaired_rows == 0);
        CHECK(r.forecast.values == std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
    }
    SUBCASE("crossing row is sorted") {
        const std::vector<QuantileLevel> three = {QuantileLevel(0.1), QuantileLevel(0.5),
                                                  QuantileLevel(0.9)};
        const CrossingRepair r = repair_crossing({Date{1}}, three, {5.0, 3.0, 4.0});
        CHECK(r.repaired_rows == 1);
        CHECK(r.forecast.values == std::vector<double>{3.0, 4.0, 5.0});
    }
    SUBCASE("all-equal row is unchanged") {
        const CrossingRepair r = repair_crossing({Date{1}}, five, {2.0, 2.0, 2.0, 2.0, 2.0});
        CHECK(r.repaired_rows == 0);
        CHECK(r.forecast.values == std::vector<double>(5, 2.0));
    }
    SUBCASE("non-finite cell is rejected") {
        CHECK_THROWS_AS(repair_crossing({Date{1}}, five, {1.0, 2.0, std::nan(""), 4.0, 5.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("repair_crossing is idempotent and never hurts the summed score") {
    Rng rng(41);
    const std::vector<QuantileLevel> levels = canonical_levels();
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n_dates = 1 + rng.next_index(8);
        std::vector<Date> dates;
        for (std::size_t i = 0; i < n_dates; ++i) {
            dates.push_back(Date{static_cast<std::int32_t>(i)});
        }
        std::vector<double> raw(n_dates * 5);
        for (double& v : raw) v = rng.next_double(-5.0, 5.0);
        DatedSeries obs{dates, {}};
        obs.values.resize(n_dates);
        for (double& v : obs.values) v = rng.next_double(-5.0, 5.0);

        const CrossingRepair first = repair_crossing(dates, levels, raw);
        const CrossingRepair second = repair_crossing(dates, levels, first.forecast.values);
        CHECK(second.repaired_rows == 0);
        CHECK(second.forecast.values == first.forecast.values);

        double raw_total = 0.0, repaired_total = 0.0;
        for (std::size_t l = 0; l < 5; ++l) {
            for (std::size_t i = 0; i < n_dates; ++i) {
                raw_total += pinball_loss(raw[i * 5 + l], obs.values[i], levels[l]);
                repaired_total += pinball_loss(first.forecast.at(i, l), obs.values[i], levels[l]);
            }
        }
        CHECK(repaired_total <= raw_total + 1e-12);
    }
}

TEST_CASE("canonical levels are the five of the experiment") {
    const auto& levels = canonical_levels();
    REQUIRE(levels.size() == 5);
    CHECK(levels[0].value() == 0.025);
    CHECK(levels[1].value() == 0.10);
    CHECK(levels[2].value() == 0.50);
    CHECK(levels[3].value() == 0.90);
    CHECK(levels[4].value() == 0.975);
}

TEST_CASE("mid-ranks share tied positions") {
    const std::vector<double> v = {3.0, 1.0, 3.0, 2.0};
    CHECK(mid_ranks(v) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}
