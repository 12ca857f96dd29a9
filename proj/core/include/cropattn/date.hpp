#ifndef CROPATTN_DATE_HPP
#define CROPATTN_DATE_HPP

#include <compare>
#include <string>

namespace cropattn {

/// Calendar date stored as year plus day-of-year (1..366).
struct Date {
  int year = 0;
  int day_of_year = 0;

  auto operator<=>(const Date&) const = default;
};

bool is_leap_year(int year);
int days_in_year(int year);

/// Parse "YYYY-MM-DD". Throws ParseError on malformed or impossible dates.
Date parse_iso_date(const std::string& text);

/// Format as "YYYY-MM-DD".
std::string to_iso_string(const Date& d);

/// Month (1..12) and day-of-month (1..31) for a date.
struct MonthDay {
  int month;
  int day;
};
MonthDay month_day(const Date& d);

/// Days since 1970-01-01 (may be negative).
long long days_from_civil(int year, int month, int day);

/// ISO-8601 weekday, Monday = 1 .. Sunday = 7.
int iso_weekday(const Date& d);

/// ISO-8601 week: the week-based year can differ from the calendar year
/// around January 1st.
struct IsoWeek {
  int iso_year;
  int week; // 1..53

  auto operator<=>(const IsoWeek&) const = default;
};
IsoWeek iso_week(const Date& d);

} // namespace cropattn

#endif // CROPATTN_DATE_HPP
