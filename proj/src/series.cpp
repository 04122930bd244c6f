#include "flowcast/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowcast/stats.hpp"

namespace flowcast {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMinutesPerDay = 1440;
}  // namespace

void RawFlowSeries::validate() const {
    if (stamps.size() != values.size()) {
        throw std::invalid_argument("raw flow series: stamps/values length mismatch");
    }
    for (std::size_t i = 1; i < stamps.size(); ++i) {
        if (stamps[i - 1] >= stamps[i]) {
            throw std::invalid_argument("raw flow series: timestamps not strictly increasing");
        }
    }
    for (double v : values) {
        if (!std::isnan(v) && (!std::isfinite(v) || v < 0.0)) {
            throw std::invalid_argument("raw flow series: present values must be finite and >= 0");
        }
    }
}

std::size_t DailySeries::present_count() const {
    std::size_t n = 0;
    for (auto p : present) n += p ? 1 : 0;
    return n;
}

void DailySeries::validate() const {
    if (values.size() != present.size()) {
        throw std::invalid_argument("daily series: values/mask length mismatch");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (present[i] && (!std::isfinite(values[i]) || values[i] < 0.0)) {
            throw std::invalid_argument("daily series: present values must be finite and >= 0");
        }
    }
}

std::vector<double> DailySeries::present_values() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (present[i]) out.push_back(values[i]);
    }
    return out;
}

DatedSeries DailySeries::to_dated() const {
    DatedSeries out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (present[i]) {
            out.dates.push_back(date_at(i));
            out.values.push_back(values[i]);
        }
    }
    return out;
}

const std::array<std::string, kMeteoVarCount>& meteo_var_names() {
    static const std::array<std::string, kMeteoVarCount> names = {
        "T_high", "T_avg", "T_low", "D_high", "D_avg", "D_low",
        "H_high", "H_avg", "H_low", "S_high", "S_avg", "S_low",
        "P_high", "P_low", "R_total"};
    return names;
}

void MeteoTable::validate() const {
    if (n_days == 0) throw std::invalid_argument("meteo table: empty");
    for (const auto& col : columns) {
        if (col.size() != n_days) {
            throw std::invalid_argument("meteo table: ragged columns");
        }
        for (double v : col) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("meteo table: missing or non-finite value");
            }
        }
    }
}

const std::vector<std::string>& predictor_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        out.reserve(kPredictorCount);
        for (int k = 1; k <= 7; ++k) out.push_back("F_avg_lag" + std::to_string(k));
        for (const auto& var : meteo_var_names()) {
            for (int k = 1; k <= 3; ++k) out.push_back(var + "_lag" + std::to_string(k));
        }
        return out;
    }();
    return names;
}

DailySeries aggregate_daily(const RawFlowSeries& raw, double max_missing_fraction) {
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
        throw std::invalid_argument("aggregate_daily: max_missing_fraction outside [0, 1]");
    }
    raw.validate();
    DailySeries out;
    out.gauge_id = raw.gauge_id;
    if (raw.stamps.empty()) return out;

    const Date first = day_of(raw.stamps.front());
    const Date last = day_of(raw.stamps.back());
    const std::size_t n_days = static_cast<std::size_t>(last.serial - first.serial) + 1;
    out.start = first;
    out.values.assign(n_days, kNaN);
    out.present.assign(n_days, 0);

    std::size_t i = 0;
    while (i < raw.stamps.size()) {
        const Date day = day_of(raw.stamps[i]);
        double sum = 0.0;
        std::size_t count = 0;
        while (i < raw.stamps.size() && day_of(raw.stamps[i]) == day) {
            if (!std::isnan(raw.values[i])) {
                sum += raw.values[i];
                ++count;
            }
            ++i;
        }
        const double missing_fraction =
            static_cast<double>(kMinutesPerDay - static_cast<int>(count)) / kMinutesPerDay;
        if (count > 0 && missing_fraction <= max_missing_fraction) {
            const std::size_t idx = out.index_of(day);
            out.values[idx] = sum / static_cast<double>(count);
            out.present[idx] = 1;
        }
    }
    return out;
}

namespace {

// Running local-linear least-squares smooth with a symmetric window of
// half-width max(1, floor(span*n/2)), truncated at the boundaries. Also
// reports the leave-one-out absolute residual of each fit when requested.
void local_linear_smooth(std::span<const double> y, double span,
                         std::vector<double>& smooth, std::vector<double>* cv_abs) {
    const std::size_t n = y.size();
    smooth.assign(n, 0.0);
    if (cv_abs) cv_abs->assign(n, 0.0);
    const std::size_t half = std::max<std::size_t>(
        1, static_cast<std::size_t>(span * static_cast<double>(n) / 2.0));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        const std::size_t m = hi - lo + 1;
        // Center the abscissa on the window midpoint for stability.
        const double c = 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
        double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            const double t = static_cast<double>(j) - c;
            st += t;
            sy += y[j];
            stt += t * t;
            sty += t * y[j];
        }
        const double dm = static_cast<double>(m);
        const double tbar = st / dm;
        const double denom = stt - st * st / dm;
        double slope = 0.0;
        if (denom > 0.0) slope = (sty - st * sy / dm) / denom;
        const double intercept = sy / dm - slope * tbar;
        const double ti = static_cast<double>(i) - c;
        smooth[i] = intercept + slope * ti;
        if (cv_abs) {
            double leverage = 1.0 / dm;
            if (denom > 0.0) leverage += (ti - tbar) * (ti - tbar) / denom;
            const double keep = std::max(1.0 - leverage, 1e-12);
            (*cv_abs)[i] = std::abs(y[i] - smooth[i]) / keep;
        }
    }
}

}  // namespace

SmoothResult super_smooth(std::span<const double> y, std::array<double, 3> spans) {
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("super_smooth: non-finite input");
    }
    std::sort(spans.begin(), spans.end());
    SmoothResult result;
    if (y.size() < 10) {
        result.values.assign(y.begin(), y.end());
        result.passthrough = true;
        return result;
    }
    const std::size_t n = y.size();

    std::array<std::vector<double>, 3> fits;
    std::array<std::vector<double>, 3> cv;
    for (std::size_t k = 0; k < 3; ++k) {
        local_linear_smooth(y, spans[k], fits[k], &cv[k]);
    }

    // Per-point span choice by cross-validated absolute residual, then the
    // chosen spans are themselves smoothed with the midrange span.
    std::vector<double> chosen(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k) {
            if (cv[k][i] < cv[best][i]) best = k;
        }
        chosen[i] = spans[best];
    }
    std::vector<double> span_smooth;
    local_linear_smooth(chosen, spans[1], span_smooth, nullptr);

    result.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::clamp(span_smooth[i], spans[0], spans[2]);
        std::size_t k = s <= spans[1] ? 0 : 1;
        const double width = spans[k + 1] - spans[k];
        const double t = width > 0.0 ? (s - spans[k]) / width : 0.0;
        result.values[i] = fits[k][i] + t * (fits[k + 1][i] - fits[k][i]);
    }
    return result;
}

std::pair<DailySeries, OutlierReport> remove_outliers(const DailySeries& series) {
    series.validate();
    OutlierReport report;
    std::vector<std::size_t> idx;
    std::vector<double> y;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.present[i]) {
            idx.push_back(i);
            y.push_back(series.values[i]);
        }
    }
    if (y.size() < 10) return {series, report};

    const SmoothResult smooth = super_smooth(y);
    std::vector<double> residuals(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) residuals[i] = y[i] - smooth.values[i];

    const double q1 = quantile_type7(residuals, 0.25);
    const double q3 = quantile_type7(residuals, 0.75);
    const double iqr = q3 - q1;
    report.lower_bound = q1 - 3.0 * iqr;
    report.upper_bound = q3 + 3.0 * iqr;

    DailySeries cleaned = series;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (residuals[i] < report.lower_bound || residuals[i] > report.upper_bound) {
            const std::size_t pos = idx[i];
            report.dates.push_back(series.date_at(pos));
            report.values.push_back(series.values[pos]);
            cleaned.values[pos] = kNaN;
            cleaned.present[pos] = 0;
        }
    }
    return {std::move(cleaned), std::move(report)};
}

SupervisedSet build_supervised(const DailySeries& flow, const MeteoTable& meteo) {
    flow.validate();
    meteo.validate();
    const Date flow_end = flow.start.plus(static_cast<std::int32_t>(flow.size()));
    const Date meteo_end = meteo.start.plus(static_cast<std::int32_t>(meteo.n_days));
    const std::int32_t overlap = std::min(flow_end.serial, meteo_end.serial) -
                                 std::max(flow.start.serial, meteo.start.serial);
    if (overlap < 9) {
        throw std::invalid_argument("build_supervised: flow and meteo spans overlap by fewer than 9 days");
    }

    SupervisedSet out;
    out.gauge_id = flow.gauge_id;
    out.data.feature_names = predictor_names();

    std::size_t candidates = 0, rejected_flow_lag = 0, rejected_meteo = 0;
    std::vector<double> row(kPredictorCount);
    for (std::size_t ti = 0; ti < flow.size(); ++ti) {
        if (!flow.present[ti]) continue;
        ++candidates;
        const Date t = flow.date_at(ti);

        bool flow_ok = ti >= 7;
        for (std::size_t k = 1; flow_ok && k <= 7; ++k) {
            if (!flow.present[ti - k]) flow_ok = false;
        }
        if (!flow_ok) {
            ++rejected_flow_lag;
            continue;
        }
        if (!meteo.covers(t.plus(-3)) || !meteo.covers(t.plus(-1))) {
            ++rejected_meteo;
            continue;
        }

        std::size_t col = 0;
        for (std::size_t k = 1; k <= 7; ++k) row[col++] = flow.values[ti - k];
        for (std::size_t var = 0; var < kMeteoVarCount; ++var) {
            for (std::int32_t k = 1; k <= 3; ++k) {
                row[col++] = meteo.at(t.plus(-k), var);
            }
        }
        out.dates.push_back(t);
        out.data.x.insert(out.data.x.end(), row.begin(), row.end());
        out.data.y.push_back(flow.values[ti]);
    }

    if (out.dates.empty()) {
        std::string constraint;
        if (candidates == 0) {
            constraint = "no dates with a present target";
        } else if (rejected_flow_lag >= rejected_meteo) {
            constraint = "the 7-day flow-lag window";
        } else {
            constraint = "the 3-day meteo coverage window";
        }
        throw std::runtime_error("build_supervised: no eligible samples (binding constraint: " +
                                 constraint + ")");
    }
    out.data.validate();
    return out;
}

std::pair<SupervisedSet, SupervisedSet> chronological_split(const SupervisedSet& set,
                                                            double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("chronological_split: train_fraction outside (0, 1)");
    }
    const std::size_t n = set.size();
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train >= n) {
        throw std::runtime_error("chronological_split: a side of the split would be empty");
    }
    SupervisedSet train{set.gauge_id,
                        {set.dates.begin(), set.dates.begin() + static_cast<std::ptrdiff_t>(n_train)},
                        set.data.slice(0, n_train)};
    SupervisedSet test{set.gauge_id,
                       {set.dates.begin() + static_cast<std::ptrdiff_t>(n_train), set.dates.end()},
                       set.data.slice(n_train, n)};
    return {std::move(train), std::move(test)};
}

}  // namespace flowcast
