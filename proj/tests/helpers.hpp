#pragma once

// Shared fixture builders for the test suites.

#include <cmath>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/dates.hpp"
#include "flowcast/quantile.hpp"
#include "flowcast/series.hpp"

namespace testutil {

inline flowcast::MeteoTable make_meteo(flowcast::Date start, std::size_t n_days) {
    flowcast::MeteoTable meteo;
    meteo.start = start;
    meteo.n_days = n_days;
    for (std::size_t var = 0; var < flowcast::kMeteoVarCount; ++var) {
        meteo.columns[var].resize(n_days);
        for (std::size_t d = 0; d < n_days; ++d) {
            meteo.columns[var][d] =
                10.0 + static_cast<double>(var) + 0.01 * static_cast<double>(d);
        }
    }
    return meteo;
}

inline flowcast::DailySeries make_daily(flowcast::Date start, std::vector<double> values) {
    flowcast::DailySeries s;
    s.gauge_id = "test";
    s.start = start;
    s.present.assign(values.size(), 1);
    s.values = std::move(values);
    return s;
}

inline flowcast::Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                                      const std::vector<double>& targets) {
    flowcast::Dataset d;
    const std::size_t p = rows.empty() ? 0 : rows.front().size();
    for (std::size_t j = 0; j < p; ++j) d.feature_names.push_back("x" + std::to_string(j));
    for (const auto& row : rows) d.x.insert(d.x.end(), row.begin(), row.end());
    d.y = targets;
    d.validate();
    return d;
}

inline double mean_pinball(const flowcast::Dataset& data, flowcast::QuantileLevel a,
                           const std::vector<double>& predictions) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        total += flowcast::pinball_loss(predictions[i], data.y[i], a);
    }
    return total / static_cast<double>(data.n_rows());
}

}  // namespace testutil
