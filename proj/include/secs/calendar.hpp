#ifndef SECS_CALENDAR_HPP
#define SECS_CALENDAR_HPP

#include <optional>
#include <string>
#include <string_view>

namespace secs {

// 365-day (no-leap) calendar. Feb 29 has no day-of-year.
inline constexpr int kDaysPerYear = 365;

struct DayOfYear {
  int year = 0;
  int doy = 1; ///< 1..365

  friend bool operator==(const DayOfYear&, const DayOfYear&) = default;
};

struct IsoDate {
  int year = 0;
  int month = 1;
  int day = 1;
};

/// Parses `YYYY-MM-DD`; std::nullopt when malformed or out of range.
/// Feb 29 parses successfully (it is a real date) but has no no-leap DOY.
std::optional<IsoDate> parse_iso_date(std::string_view text);

/// Day of year in the no-leap calendar, or std::nullopt for Feb 29.
std::optional<DayOfYear> to_day_of_year(const IsoDate& date);

IsoDate to_iso_date(const DayOfYear& day);
std::string format_iso_date(const DayOfYear& day);

/// Next day in the no-leap calendar.
DayOfYear next_day(const DayOfYear& day);

/// Calendar month 1..12 of a no-leap day of year.
int month_of(int doy);

} // namespace secs

#endif // SECS_CALENDAR_HPP
