#include "flowcast/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

namespace flowcast {

namespace {

constexpr const char* kMeteoHeader =
    "date,t_high,t_avg,t_low,d_high,d_avg,d_low,h_high,h_avg,h_low,"
    "s_high,s_avg,s_low,p_high,p_low,r_total";

double parse_double(const std::string& field, const std::string& path, std::size_t line_no) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0' || errno == ERANGE) {
        throw CsvError(path + ":" + std::to_string(line_no) + ": bad numeric field '" + field + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw CsvError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header) {
        throw CsvError(path + ": unexpected header '" + line + "'");
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

RawFlowSeries read_flow_csv(const std::string& path, const std::string& gauge_id) {
    const auto rows = read_csv_rows(path, "timestamp,value");
    RawFlowSeries out;
    out.gauge_id = gauge_id;
    out.stamps.reserve(rows.size());
    out.values.reserve(rows.size());
    std::size_t line_no = 1;
    for (const auto& row : rows) {
        ++line_no;
        if (row.size() != 2) {
            throw CsvError(path + ":" + std::to_string(line_no) + ": expected 2 fields");
        }
        MinuteStamp stamp;
        try {
            stamp = parse_minute(row[0]);
        } catch (const std::invalid_argument& e) {
            throw CsvError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        const double value = row[1].empty()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : parse_double(row[1], path, line_no);
        out.stamps.push_back(stamp);
        out.values.push_back(value);
    }
    try {
        out.validate();
    } catch (const std::invalid_argument& e) {
        throw CsvError(path + ": " + e.what());
    }
    return out;
}

MeteoTable read_meteo_csv(const std::string& path) {
    const auto rows = read_csv_rows(path, kMeteoHeader);
    MeteoTable out;
    if (rows.empty()) throw CsvError(path + ": no data rows");
    out.n_days = rows.size();
    for (auto& col : out.columns) col.reserve(rows.size());
    std::size_t line_no = 1;
    Date expected{0};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ++line_no;
        const auto& row = rows[i];
        if (row.size() != 1 + kMeteoVarCount) {
            throw CsvError(path + ":" + std::to_string(line_no) + ": expected 16 fields");
        }
        Date d;
        try {
            d = parse_date(row[0]);
        } catch (const std::invalid_argument& e) {
            throw CsvError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (i == 0) {
            out.start = d;
            expected = d;
        } else if (d != expected) {
            throw CsvError(path + ":" + std::to_string(line_no) +
                           ": dates must be consecutive (expected " + to_string(expected) + ")");
        }
        expected = expected.next();
        for (std::size_t var = 0; var < kMeteoVarCount; ++var) {
            if (row[1 + var].empty()) {
                throw CsvError(path + ":" + std::to_string(line_no) + ": missing meteo value");
            }
            out.columns[var].push_back(parse_double(row[1 + var], path, line_no));
        }
    }
    out.validate();
    return out;
}

void write_flow_csv(const std::string& path, const RawFlowSeries& raw) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw CsvError("cannot write " + path);
    outf << "timestamp,value\n";
    for (std::size_t i = 0; i < raw.stamps.size(); ++i) {
        outf << minute_to_string(raw.stamps[i]) << ',';
        if (!std::isnan(raw.values[i])) outf << format_double(raw.values[i]);
        outf << '\n';
    }
}

void write_daily_as_minute_csv(const std::string& path, const DailySeries& daily) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw CsvError("cannot write " + path);
    outf << "timestamp,value\n";
    for (std::size_t d = 0; d < daily.size(); ++d) {
        if (!daily.present[d]) continue;
        const std::string date = to_string(daily.date_at(d));
        const std::string value = format_double(daily.values[d]);
        char stamp[8];
        for (int minute = 0; minute < 1440; ++minute) {
            std::snprintf(stamp, sizeof stamp, "T%02d:%02d", minute / 60, minute % 60);
            outf << date << stamp << ',' << value << '\n';
        }
    }
}

void write_meteo_csv(const std::string& path, const MeteoTable& meteo) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw CsvError("cannot write " + path);
    outf << kMeteoHeader << '\n';
    for (std::size_t i = 0; i < meteo.n_days; ++i) {
        outf << to_string(meteo.start.plus(static_cast<std::int32_t>(i)));
        for (std::size_t var = 0; var < kMeteoVarCount; ++var) {
            outf << ',' << format_double(meteo.columns[var][i]);
        }
        outf << '\n';
    }
}

}  // namespace flowcast
