#include "cropattn/date.hpp"

#include <array>
#include <cstdio>

#include "cropattn/errors.hpp"

namespace cropattn {

namespace {

constexpr std::array<int, 12> kMonthLengths = {31, 28, 31, 30, 31, 30,
                                               31, 31, 30, 31, 30, 31};

int month_length(int year, int month) {
  if (month == 2 && is_leap_year(year)) return 29;
  return kMonthLengths[month - 1];
}

} // namespace

bool is_leap_year(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

Date parse_iso_date(const std::string& text) {
  int y = 0, m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) != 3 ||
      text.size() != 10) {
    throw ParseError("expected YYYY-MM-DD, got '" + text + "'");
  }
  if (m < 1 || m > 12 || d < 1 || d > month_length(y, m)) {
    throw ParseError("impossible calendar date '" + text + "'");
  }
  int doy = d;
  for (int i = 1; i < m; ++i) doy += month_length(y, i);
  return Date{y, doy};
}

MonthDay month_day(const Date& d) {
  if (d.day_of_year < 1 || d.day_of_year > days_in_year(d.year)) {
    throw ParseError("day-of-year " + std::to_string(d.day_of_year) +
                     " out of range for year " + std::to_string(d.year));
  }
  int remaining = d.day_of_year;
  for (int m = 1; m <= 12; ++m) {
    int len = month_length(d.year, m);
    if (remaining <= len) return MonthDay{m, remaining};
    remaining -= len;
  }
  throw ParseError("unreachable day-of-year"); // guarded above
}

std::string to_iso_string(const Date& d) {
  MonthDay md = month_day(d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, md.month, md.day);
  return buf;
}

long long days_from_civil(int y, int m, int d) {
  // Howard Hinnant's civil calendar algorithm.
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

int iso_weekday(const Date& d) {
  MonthDay md = month_day(d);
  long long days = days_from_civil(d.year, md.month, md.day);
  // 1970-01-01 was a Thursday (ISO weekday 4).
  long long wd = (days + 3) % 7;
  if (wd < 0) wd += 7;
  return static_cast<int>(wd) + 1;
}

namespace {

// 53-week ISO years start on a Thursday, or on a Wednesday when leap.
int weeks_in_iso_year(int year) {
  int jan1 = iso_weekday(Date{year, 1});
  if (jan1 == 4) return 53;
  if (jan1 == 3 && is_leap_year(year)) return 53;
  return 52;
}

} // namespace

IsoWeek iso_week(const Date& d) {
  int week = (d.day_of_year - iso_weekday(d) + 10) / 7;
  if (week < 1) return IsoWeek{d.year - 1, weeks_in_iso_year(d.year - 1)};
  if (week > weeks_in_iso_year(d.year)) return IsoWeek{d.year + 1, 1};
  return IsoWeek{d.year, week};
}

} // namespace cropattn
