#pragma once

#include <string>
#include <vector>

#include "flowcast/series.hpp"

namespace flowcast {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reads a gauge file with header "timestamp,value": ISO-8601 minute
/// timestamps, empty value field = missing.
RawFlowSeries read_flow_csv(const std::string& path, const std::string& gauge_id);

/// Reads the meteo file with header
/// "date,t_high,t_avg,t_low,d_high,d_avg,d_low,h_high,h_avg,h_low,
///  s_high,s_avg,s_low,p_high,p_low,r_total". Dates must be consecutive
/// and every cell present.
MeteoTable read_meteo_csv(const std::string& path);

void write_flow_csv(const std::string& path, const RawFlowSeries& raw);
void write_meteo_csv(const std::string& path, const MeteoTable& meteo);

/// Expands a daily series to the minute-resolution flow format: 1440 slots
/// per present day, each holding the daily value; missing days are omitted.
void write_daily_as_minute_csv(const std::string& path, const DailySeries& daily);

/// Splits one CSV line on commas (no quoting; our formats never need it).
std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a whole CSV file into rows of fields; checks the exact header.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    const std::string& expected_header);

}  // namespace flowcast
