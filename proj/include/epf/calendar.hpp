#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace epf {

// Hours since 1970-01-01T00:00 in local market time. Market clocks are plain
// calendar clocks here; DST artifacts in raw feeds show up as missing or
// duplicated rows and are repaired to a strict hourly grid on ingest.
using HourIndex = std::int64_t;

inline constexpr int kHoursPerDay = 24;

struct CalTime {
  int year = 1970;
  unsigned month = 1;  // 1..12
  unsigned day = 1;    // 1..31
  int hour = 0;        // 0..23
};

HourIndex make_hour(int year, unsigned month, unsigned day, int hour);
CalTime civil_of(HourIndex t);

// Midnight of the day containing t.
HourIndex day_begin(HourIndex t);
// 0 = Monday .. 6 = Sunday for the day containing t.
int weekday_mon0(HourIndex t);
int year_of(HourIndex t);

// "YYYY-MM-DDTHH:MM[:SS]"; a space is accepted in place of 'T'.
// Throws std::runtime_error on malformed or non-calendar input.
HourIndex parse_timestamp(std::string_view s);
std::string format_timestamp(HourIndex t);

// "YYYY-MM-DD" -> midnight of that day.
HourIndex parse_date(std::string_view s);
std::string format_date(HourIndex t);

}  // namespace epf
