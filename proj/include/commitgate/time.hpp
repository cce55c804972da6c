#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace commitgate {

using Timestamp = std::chrono::sys_seconds;

// Parses strict ISO-8601 ("2022-10-01T12:34:56+02:00", "...Z", optional
// fractional seconds which are truncated). Returns nullopt on any deviation.
std::optional<Timestamp> parse_iso8601(std::string_view text);

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(Timestamp t);

// "YYYY-MM-DD"
std::string format_date(Timestamp t);

// Calendar months in UTC, numbered as year * 12 + (month - 1).
int month_number(Timestamp t);
Timestamp month_start(int month_number);

// Days since the epoch of the UTC calendar date containing t.
long day_number(Timestamp t);

Timestamp add_months(Timestamp t, int months);

// Mean Gregorian month, 30.436875 days.
inline constexpr double kSecondsPerMonth = 30.436875 * 86400.0;
inline constexpr double kSecondsPerYear = 365.2425 * 86400.0;

inline double months_between(Timestamp from, Timestamp to) {
  return static_cast<double>((to - from).count()) / kSecondsPerMonth;
}

}  // namespace commitgate
