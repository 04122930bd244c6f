#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "flowcast/dates.hpp"

namespace flowcast {

/// Probability level of a predicted quantile, restricted to (0, 1).
class QuantileLevel {
public:
    explicit QuantileLevel(double a) : a_(a) {
        if (!(a > 0.0 && a < 1.0)) {
            throw std::invalid_argument("quantile level must be in (0, 1)");
        }
    }

    double value() const { return a_; }

    friend bool operator==(QuantileLevel l, QuantileLevel r) { return l.a_ == r.a_; }
    friend bool operator<(QuantileLevel l, QuantileLevel r) { return l.a_ < r.a_; }

private:
    double a_;
};

/// The five levels of the experiment, sorted ascending.
const std::vector<QuantileLevel>& canonical_levels();

/// Pinball (quantile) loss of predicting quantile r when x materializes:
/// (r - x) * (1{x <= r} - a). Non-negative; zero iff r == x.
double pinball_loss(double predicted, double observed, QuantileLevel a);

/// Dated scalar observations, sorted strictly ascending by date.
struct DatedSeries {
    std::vector<Date> dates;
    std::vector<double> values;

    std::size_t size() const { return dates.size(); }
    void validate() const;
};

/// Predicted quantiles at a fixed set of levels, one row per date.
/// Rows are non-decreasing across levels once produced by repair_crossing.
struct ProbabilisticForecast {
    std::vector<Date> dates;             // strictly ascending
    std::vector<QuantileLevel> levels;   // strictly ascending
    std::vector<double> values;          // row-major [date][level]

    std::size_t n_dates() const { return dates.size(); }
    std::size_t n_levels() const { return levels.size(); }

    double at(std::size_t date_idx, std::size_t level_idx) const {
        return values[date_idx * levels.size() + level_idx];
    }

    /// Index of an exact level; throws if absent.
    std::size_t level_index(QuantileLevel a) const;

    void validate() const;
};

/// Average pinball loss of one forecast level against observations.
struct ScoreCard {
    double level;          // probability of the scored quantile
    std::size_t n;         // dates entering the mean
    std::size_t skipped;   // forecast dates without an observation
    double average_score;  // mean pinball loss, same units as the data
};

/// Mean pinball loss over the dates shared by forecast and observations.
/// Forecast dates absent from the observations are skipped and counted;
/// an empty overlap is an error.
ScoreCard average_quantile_score(const ProbabilisticForecast& forecast,
                                 const DatedSeries& observed, QuantileLevel a);

struct CrossingRepair {
    ProbabilisticForecast forecast;
    std::size_t repaired_rows;  // rows that were not already monotone
};

/// Monotone rearrangement: sorts each date's predicted quantiles ascending
/// so the forecast is non-crossing. Preserves each row's multiset of values
/// and leaves already-monotone rows untouched. Idempotent, and never
/// increases the pinball score summed over levels.
CrossingRepair repair_crossing(std::vector<Date> dates,
                               std::vector<QuantileLevel> levels,
                               std::vector<double> raw);

}  // namespace flowcast
