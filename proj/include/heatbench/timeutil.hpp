#pragma once

// UTC-only calendar arithmetic on hour stamps (hours since 1970-01-01T00:00Z).
// Civil-date conversions follow the well-known days-from-civil construction,
// valid far beyond the data range handled here. No locale, no timezone.

#include <cstdint>
#include <cstdio>
#include <string>

#include "heatbench/errors.hpp"

namespace heatbench {

using HourStamp = std::int64_t;  // hours since the Unix epoch, UTC

struct CivilDate {
  int year;
  unsigned month;  // 1..12
  unsigned day;    // 1..31
};

namespace timeutil {

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), m, d};
}

inline std::int64_t day_of(HourStamp h) {
  // floor division for pre-epoch hours
  return h >= 0 ? h / 24 : -((-h + 23) / 24);
}

inline unsigned hour_of_day(HourStamp h) {
  return static_cast<unsigned>(h - day_of(h) * 24);
}

inline CivilDate civil_of(HourStamp h) { return civil_from_days(day_of(h)); }

// Monday = 0 ... Sunday = 6. Day 0 (1970-01-01) was a Thursday.
inline unsigned weekday_of(HourStamp h) {
  const std::int64_t d = day_of(h);
  return static_cast<unsigned>(((d % 7) + 7 + 3) % 7);
}

inline unsigned day_of_month(HourStamp h) { return civil_of(h).day; }

// "YYYY-MM-DD" -> day number since epoch.
inline std::int64_t parse_date(const std::string& s) {
  int y;
  unsigned m, d;
  if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31)
    throw DataError("invalid date: '" + s + "'");
  return days_from_civil(y, m, d);
}

// ISO-8601 UTC timestamps: "YYYY-MM-DDTHH:MM[:SS][Z]" (space accepted in
// place of 'T'). Sub-hour parts must be zero; the data is hourly.
inline HourStamp parse_hour(const std::string& s) {
  int y;
  unsigned mo, d, h, mi = 0, se = 0;
  char sep;
  int n = std::sscanf(s.c_str(), "%d-%u-%u%c%u:%u:%u", &y, &mo, &d, &sep, &h, &mi, &se);
  if (n < 5 || (sep != 'T' && sep != ' ') || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 ||
      mi > 59 || se > 60)
    throw DataError("invalid timestamp: '" + s + "'");
  if (mi != 0 || se != 0) throw DataError("timestamp not on the hour: '" + s + "'");
  return days_from_civil(y, mo, d) * 24 + static_cast<HourStamp>(h);
}

inline std::string format_hour(HourStamp h) {
  const CivilDate c = civil_of(h);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:00:00Z", c.year, c.month, c.day,
                hour_of_day(h));
  return buf;
}

inline std::string format_date(std::int64_t day) {
  const CivilDate c = civil_from_days(day);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
  return buf;
}

}  // namespace timeutil
}  // namespace heatbench
