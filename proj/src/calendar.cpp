#include "epf/calendar.hpp"

#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace epf {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

[[noreturn]] void bad_time(std::string_view s) {
  throw std::runtime_error("invalid timestamp '" + std::string(s) + "'");
}

}  // namespace

HourIndex make_hour(int year, unsigned month, unsigned day, int hour) {
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                     std::chrono::day{day}};
  if (!ymd.ok() || hour < 0 || hour > 23)
    throw std::runtime_error("invalid calendar time");
  sys_days sd{ymd};
  return static_cast<HourIndex>(sd.time_since_epoch().count()) * kHoursPerDay +
         hour;
}

CalTime civil_of(HourIndex t) {
  using namespace std::chrono;
  std::int64_t days = floor_div(t, kHoursPerDay);
  sys_days sd{std::chrono::days{days}};
  year_month_day ymd{sd};
  CalTime c;
  c.year = static_cast<int>(ymd.year());
  c.month = static_cast<unsigned>(ymd.month());
  c.day = static_cast<unsigned>(ymd.day());
  c.hour = static_cast<int>(t - days * kHoursPerDay);
  return c;
}

HourIndex day_begin(HourIndex t) { return floor_div(t, kHoursPerDay) * kHoursPerDay; }

int weekday_mon0(HourIndex t) {
  using namespace std::chrono;
  sys_days sd{std::chrono::days{floor_div(t, kHoursPerDay)}};
  return static_cast<int>(std::chrono::weekday{sd}.iso_encoding()) - 1;
}

int year_of(HourIndex t) { return civil_of(t).year; }

HourIndex parse_timestamp(std::string_view s) {
  // YYYY-MM-DD[T ]HH:MM[:SS]
  int y, mo, d, h, mi, se = 0;
  char sep;
  int n = 0;
  std::string buf(s);
  int got = std::sscanf(buf.c_str(), "%d-%d-%d%c%d:%d:%d%n", &y, &mo, &d, &sep,
                        &h, &mi, &se, &n);
  if (got < 6) bad_time(s);
  if (got == 6) {
    // re-scan without seconds to get the consumed length
    std::sscanf(buf.c_str(), "%d-%d-%d%c%d:%d%n", &y, &mo, &d, &sep, &h, &mi, &n);
    se = 0;
  }
  if (static_cast<size_t>(n) != buf.size()) bad_time(s);
  if (sep != 'T' && sep != ' ') bad_time(s);
  if (mi != 0 || se != 0) bad_time(s);  // hourly resolution only
  try {
    return make_hour(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h);
  } catch (const std::exception&) {
    bad_time(s);
  }
}

std::string format_timestamp(HourIndex t) {
  CalTime c = civil_of(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00:00", c.year, c.month,
                c.day, c.hour);
  return buf;
}

HourIndex parse_date(std::string_view s) {
  int y, mo, d;
  int n = 0;
  std::string buf(s);
  if (std::sscanf(buf.c_str(), "%d-%d-%d%n", &y, &mo, &d, &n) != 3 ||
      static_cast<size_t>(n) != buf.size())
    bad_time(s);
  try {
    return make_hour(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), 0);
  } catch (const std::exception&) {
    bad_time(s);
  }
}

std::string format_date(HourIndex t) {
  CalTime c = civil_of(t);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
  return buf;
}

}  // namespace epf
