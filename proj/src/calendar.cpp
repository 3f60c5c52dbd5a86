#include "secs/calendar.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace secs {
namespace {

constexpr std::array<int, 12> kMonthDays = {31, 28, 31, 30, 31, 30,
                                            31, 31, 30, 31, 30, 31};

bool is_gregorian_leap(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

bool parse_int(std::string_view text, int& out) {
  if (text.empty())
    return false;
  for (char c : text)
    if (c < '0' || c > '9')
      return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

} // namespace

std::optional<IsoDate> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    return std::nullopt;
  IsoDate d;
  if (!parse_int(text.substr(0, 4), d.year) ||
      !parse_int(text.substr(5, 2), d.month) ||
      !parse_int(text.substr(8, 2), d.day))
    return std::nullopt;
  if (d.month < 1 || d.month > 12 || d.day < 1)
    return std::nullopt;
  int limit = kMonthDays[d.month - 1];
  if (d.month == 2 && is_gregorian_leap(d.year))
    limit = 29;
  if (d.day > limit)
    return std::nullopt;
  return d;
}

std::optional<DayOfYear> to_day_of_year(const IsoDate& date) {
  if (date.month == 2 && date.day == 29)
    return std::nullopt;
  int doy = date.day;
  for (int m = 1; m < date.month; ++m)
    doy += kMonthDays[m - 1];
  return DayOfYear{date.year, doy};
}

IsoDate to_iso_date(const DayOfYear& day) {
  int remaining = day.doy;
  int month = 1;
  while (remaining > kMonthDays[month - 1]) {
    remaining -= kMonthDays[month - 1];
    ++month;
  }
  return IsoDate{day.year, month, remaining};
}

std::string format_iso_date(const DayOfYear& day) {
  const IsoDate d = to_iso_date(day);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

DayOfYear next_day(const DayOfYear& day) {
  if (day.doy == kDaysPerYear)
    return DayOfYear{day.year + 1, 1};
  return DayOfYear{day.year, day.doy + 1};
}

int month_of(int doy) { return to_iso_date(DayOfYear{2001, doy}).month; }

} // namespace secs
