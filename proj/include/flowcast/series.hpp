#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/dates.hpp"
#include "flowcast/quantile.hpp"

namespace flowcast {

/// Raw gauge measurements at 1-minute resolution. NaN marks a missing value
/// whose timestamp is present in the file; absent timestamps are equally
/// missing for the daily aggregation.
struct RawFlowSeries {
    std::string gauge_id;
    std::vector<MinuteStamp> stamps;  // strictly increasing
    std::vector<double> values;       // >= 0 where present, NaN when missing

    void validate() const;
};

/// Daily mean flow, gap-free over the covered span: one slot per calendar
/// day from start onward, with a presence mask for gaps.
struct DailySeries {
    std::string gauge_id;
    Date start{0};
    std::vector<double> values;        // NaN where missing
    std::vector<std::uint8_t> present;

    std::size_t size() const { return values.size(); }
    Date date_at(std::size_t i) const { return start.plus(static_cast<std::int32_t>(i)); }
    bool covers(Date d) const {
        return d >= start && d < start.plus(static_cast<std::int32_t>(size()));
    }
    std::size_t index_of(Date d) const { return static_cast<std::size_t>(d.serial - start.serial); }

    std::size_t present_count() const;
    void validate() const;

    /// Present values, in date order.
    std::vector<double> present_values() const;
    DatedSeries to_dated() const;
};

inline constexpr std::size_t kMeteoVarCount = 15;

/// Variable names in canonical column order.
const std::array<std::string, kMeteoVarCount>& meteo_var_names();

/// Daily meteorological covariates, gap-free and fully observed.
struct MeteoTable {
    Date start{0};
    std::size_t n_days = 0;
    std::array<std::vector<double>, kMeteoVarCount> columns;

    bool covers(Date d) const {
        return d >= start && d < start.plus(static_cast<std::int32_t>(n_days));
    }
    double at(Date d, std::size_t var) const {
        return columns[var][static_cast<std::size_t>(d.serial - start.serial)];
    }
    void validate() const;
};

/// The 52 predictor names in their fixed order: the 7 flow lags
/// F_avg_lag1..7 followed by each meteorological variable at lags 1..3.
const std::vector<std::string>& predictor_names();
inline constexpr std::size_t kPredictorCount = 52;

/// One-day-ahead supervised samples for a single gauge, ordered by date.
struct SupervisedSet {
    std::string gauge_id;
    std::vector<Date> dates;  // target dates, strictly ascending
    Dataset data;

    std::size_t size() const { return dates.size(); }
    DatedSeries targets() const { return DatedSeries{dates, data.y}; }
};

/// Collapses 1-minute measurements to daily means. A day is kept when its
/// missing fraction (against the nominal 1440 slots) is at most
/// max_missing_fraction, boundary inclusive; otherwise it is marked missing.
DailySeries aggregate_daily(const RawFlowSeries& raw, double max_missing_fraction = 0.20);

struct SmoothResult {
    std::vector<double> values;
    bool passthrough = false;  // input shorter than 10 points, returned as-is
};

/// Friedman-style variable-span smoother over an index-ordered series:
/// running local-linear fits at each of the three spans, per-point span
/// selection by leave-one-out cross-validated absolute residual, the
/// selected spans smoothed with the midrange span, and the final value
/// interpolated between the fixed-span smooths.
SmoothResult super_smooth(std::span<const double> y,
                          std::array<double, 3> spans = {0.05, 0.20, 0.50});

struct OutlierReport {
    std::vector<Date> dates;
    std::vector<double> values;
    double lower_bound = 0.0;  // on residuals
    double upper_bound = 0.0;
};

/// Flags values whose smooth residual falls strictly outside
/// [Q1 - 3 IQR, Q3 + 3 IQR] and marks them missing. Single pass; series
/// with fewer than 10 present values are returned unchanged.
std::pair<DailySeries, OutlierReport> remove_outliers(const DailySeries& series);

/// Assembles the 52-predictor supervised set. A sample targets date t only
/// when the flow value is present at t and at all of t-1..t-7 and the meteo
/// table covers t-1..t-3.
SupervisedSet build_supervised(const DailySeries& flow, const MeteoTable& meteo);

/// First floor(n * train_fraction) samples against the remainder, in date
/// order, no shuffling. Throws if either side would be empty.
std::pair<SupervisedSet, SupervisedSet> chronological_split(const SupervisedSet& set,
                                                            double train_fraction = 0.5);

}  // namespace flowcast
