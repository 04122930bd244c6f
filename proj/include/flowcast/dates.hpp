#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace flowcast {

/// Calendar day stored as days since 1970-01-01 (proleptic Gregorian).
/// Naive calendar arithmetic only; no time zones.
struct Date {
    std::int32_t serial = 0;

    constexpr auto operator<=>(const Date&) const = default;

    Date next() const { return Date{serial + 1}; }
    Date prev() const { return Date{serial - 1}; }
    Date plus(std::int32_t days) const { return Date{serial + days}; }
};

Date date_from_ymd(int year, int month, int day);
void ymd_from_date(Date d, int& year, int& month, int& day);

/// Parses "YYYY-MM-DD". Throws std::invalid_argument on malformed input.
Date parse_date(const std::string& text);
std::string to_string(Date d);

/// Minute-resolution instant as minutes since 1970-01-01T00:00.
using MinuteStamp = std::int64_t;

/// Parses ISO-8601 minute timestamps: "YYYY-MM-DDTHH:MM", with ' ' accepted
/// in place of 'T' and optional trailing ":SS" / "Z" ignored.
MinuteStamp parse_minute(const std::string& text);
std::string minute_to_string(MinuteStamp m);

inline Date day_of(MinuteStamp m) {
    // Non-negative stamps in practice; floor-divide to stay correct anyway.
    std::int64_t d = m >= 0 ? m / 1440 : -((-m + 1439) / 1440);
    return Date{static_cast<std::int32_t>(d)};
}

inline int minute_of_day(MinuteStamp m) {
    const std::int64_t r = m - static_cast<std::int64_t>(day_of(m).serial) * 1440;
    return static_cast<int>(r);
}

}  // namespace flowcast
