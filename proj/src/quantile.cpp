#include "flowcast/quantile.hpp"

#include <algorithm>
#include <cmath>

namespace flowcast {

const std::vector<QuantileLevel>& canonical_levels() {
    static const std::vector<QuantileLevel> levels = {
        QuantileLevel(0.025), QuantileLevel(0.10), QuantileLevel(0.50),
        QuantileLevel(0.90), QuantileLevel(0.975)};
    return levels;
}

double pinball_loss(double predicted, double observed, QuantileLevel a) {
    if (!std::isfinite(predicted) || !std::isfinite(observed)) {
        throw std::invalid_argument("pinball_loss: non-finite input");
    }
    const double indicator = observed <= predicted ? 1.0 : 0.0;
    return (predicted - observed) * (indicator - a.value());
}

void DatedSeries::validate() const {
    if (dates.size() != values.size()) {
        throw std::invalid_argument("dated series: dates/values length mismatch");
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw std::invalid_argument("dated series: dates not strictly increasing");
        }
    }
}

std::size_t ProbabilisticForecast::level_index(QuantileLevel a) const {
    for (std::size_t j = 0; j < levels.size(); ++j) {
        if (levels[j] == a) return j;
    }
    throw std::invalid_argument("forecast does not contain the requested level");
}

void ProbabilisticForecast::validate() const {
    if (values.size() != dates.size() * levels.size()) {
        throw std::invalid_argument("forecast: value matrix shape mismatch");
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw std::invalid_argument("forecast: dates not strictly increasing");
        }
    }
    for (std::size_t j = 1; j < levels.size(); ++j) {
        if (!(levels[j - 1] < levels[j])) {
            throw std::invalid_argument("forecast: levels not strictly increasing");
        }
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("forecast: non-finite cell");
    }
}

ScoreCard average_quantile_score(const ProbabilisticForecast& forecast,
                                 const DatedSeries& observed, QuantileLevel a) {
    const std::size_t col = forecast.level_index(a);
    double total = 0.0;
    std::size_t n = 0;
    std::size_t skipped = 0;
    std::size_t oi = 0;
    for (std::size_t fi = 0; fi < forecast.n_dates(); ++fi) {
        const Date d = forecast.dates[fi];
        while (oi < observed.size() && observed.dates[oi] < d) ++oi;
        if (oi < observed.size() && observed.dates[oi] == d) {
            total += pinball_loss(forecast.at(fi, col), observed.values[oi], a);
            ++n;
        } else {
            ++skipped;
        }
    }
    if (n == 0) {
        throw std::runtime_error("average_quantile_score: no overlapping dates");
    }
    return ScoreCard{a.value(), n, skipped, total / static_cast<double>(n)};
}

CrossingRepair repair_crossing(std::vector<Date> dates,
                               std::vector<QuantileLevel> levels,
                               std::vector<double> raw) {
    const std::size_t n_levels = levels.size();
    if (raw.size() != dates.size() * n_levels) {
        throw std::invalid_argument("repair_crossing: matrix shape mismatch");
    }
    for (double v : raw) {
        if (!std::isfinite(v)) throw std::invalid_argument("repair_crossing: non-finite cell");
    }
    std::size_t repaired = 0;
    for (std::size_t i = 0; i < dates.size(); ++i) {
        auto row = raw.begin() + static_cast<std::ptrdiff_t>(i * n_levels);
        if (!std::is_sorted(row, row + static_cast<std::ptrdiff_t>(n_levels))) {
            std::sort(row, row + static_cast<std::ptrdiff_t>(n_levels));
            ++repaired;
        }
    }
    ProbabilisticForecast out{std::move(dates), std::move(levels), std::move(raw)};
    out.validate();
    return CrossingRepair{std::move(out), repaired};
}

}  // namespace flowcast
