#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace epi {

using Date = std::chrono::sys_days;

// Strict ISO-8601 calendar date (YYYY-MM-DD). Throws epi::Error on malformed input.
Date parse_date(std::string_view text);
std::string format_date(Date d);

inline bool is_weekend(Date d) {
  const std::chrono::weekday wd{d};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

inline int days_between(Date from, Date to) { return static_cast<int>((to - from).count()); }

// Fixed 7-day bins anchored at `anchor`. Week indices are 1-based.
struct WeekCalendar {
  Date anchor;
  int weeks = 0;

  // 0 when d falls before week 1, weeks+1 or more when after the last week.
  int week_of(Date d) const {
    const int offset = days_between(anchor, d);
    if (offset < 0) return 0;
    return offset / 7 + 1;
  }
  bool contains(Date d) const {
    const int w = week_of(d);
    return w >= 1 && w <= weeks;
  }
  Date week_start(int week) const { return anchor + std::chrono::days{7 * (week - 1)}; }
};

}  // namespace epi
