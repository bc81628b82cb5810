#include <doctest.h>

#include "epf/calendar.hpp"

using namespace epf;

TEST_CASE("hour index round-trips through civil time") {
  HourIndex t = make_hour(2016, 2, 29, 13);  // leap day
  CalTime c = civil_of(t);
  CHECK(c.year == 2016);
  CHECK(c.month == 2);
  CHECK(c.day == 29);
  CHECK(c.hour == 13);
  CHECK(make_hour(c.year, c.month, c.day, c.hour) == t);
}

TEST_CASE("2013-2016 inclusive spans 1461 days") {
  HourIndex a = make_hour(2013, 1, 1, 0);
  HourIndex b = make_hour(2017, 1, 1, 0);
  CHECK((b - a) / kHoursPerDay == 1461);
  CHECK(b - a == 35064);
}

TEST_CASE("weekdays match the civil calendar") {
  CHECK(weekday_mon0(make_hour(2013, 1, 1, 0)) == 1);   // Tuesday
  CHECK(weekday_mon0(make_hour(2016, 1, 1, 0)) == 4);   // Friday
  CHECK(weekday_mon0(make_hour(1970, 1, 1, 12)) == 3);  // Thursday
  CHECK(weekday_mon0(make_hour(2016, 12, 31, 23)) == 5);  // Saturday
}

TEST_CASE("timestamp parsing and formatting") {
  CHECK(parse_timestamp("2013-01-01T00:00:00") == make_hour(2013, 1, 1, 0));
  CHECK(parse_timestamp("2013-01-01 05:00") == make_hour(2013, 1, 1, 5));
  CHECK(format_timestamp(make_hour(2013, 1, 1, 5)) == "2013-01-01T05:00:00");
  CHECK(format_date(make_hour(2013, 1, 1, 5)) == "2013-01-01");
  CHECK(parse_date("2016-02-29") == make_hour(2016, 2, 29, 0));
  CHECK_THROWS(parse_timestamp("2013-02-30T00:00:00"));
  CHECK_THROWS(parse_timestamp("2013-01-01T00:30:00"));  // sub-hourly
  CHECK_THROWS(parse_timestamp("not a time"));
  CHECK_THROWS(parse_date("2017-13-01"));
}

TEST_CASE("day_begin floors to midnight") {
  HourIndex t = make_hour(2015, 6, 7, 19);
  CHECK(day_begin(t) == make_hour(2015, 6, 7, 0));
  CHECK(day_begin(day_begin(t)) == day_begin(t));
}
