#include "flowcast/dates.hpp"

#include <cstdio>
#include <stdexcept>

namespace flowcast {

namespace {

// Civil <-> serial conversions after Howard Hinnant's public-domain
// chrono-compatible algorithms.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

bool parse_fixed_uint(const std::string& s, std::size_t pos, std::size_t len, int& out) {
    int v = 0;
    for (std::size_t i = 0; i < len; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace

Date date_from_ymd(int year, int month, int day) {
    return Date{static_cast<std::int32_t>(
        days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)))};
}

void ymd_from_date(Date d, int& year, int& month, int& day) {
    std::int64_t y;
    unsigned m, dd;
    civil_from_days(d.serial, y, m, dd);
    year = static_cast<int>(y);
    month = static_cast<int>(m);
    day = static_cast<int>(dd);
}

Date parse_date(const std::string& text) {
    int y, m, d;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-' ||
        !parse_fixed_uint(text, 0, 4, y) || !parse_fixed_uint(text, 5, 2, m) ||
        !parse_fixed_uint(text, 8, 2, d) || m < 1 || m > 12 || d < 1 || d > 31) {
        throw std::invalid_argument("malformed date: '" + text + "' (expected YYYY-MM-DD)");
    }
    return date_from_ymd(y, m, d);
}

std::string to_string(Date d) {
    int y, m, dd;
    ymd_from_date(d, y, m, dd);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, dd);
    return buf;
}

MinuteStamp parse_minute(const std::string& text) {
    if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ')) {
        throw std::invalid_argument("malformed timestamp: '" + text + "'");
    }
    const Date day = parse_date(text.substr(0, 10));
    int hh, mm;
    if (!parse_fixed_uint(text, 11, 2, hh) || text[13] != ':' ||
        !parse_fixed_uint(text, 14, 2, mm) || hh > 23 || mm > 59) {
        throw std::invalid_argument("malformed timestamp: '" + text + "'");
    }
    return static_cast<std::int64_t>(day.serial) * 1440 + hh * 60 + mm;
}

std::string minute_to_string(MinuteStamp m) {
    const Date d = day_of(m);
    const int mod = minute_of_day(m);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d", to_string(d).c_str(), mod / 60, mod % 60);
    return buf;
}

}  // namespace flowcast
