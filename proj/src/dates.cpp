#include "epi/dates.hpp"

#include <charconv>
#include <cstdio>

#include "epi/error.hpp"

namespace epi {

namespace {

int parse_digits(std::string_view s) {
  int value = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9') return -1;
    value = value * 10 + (ch - '0');
  }
  return value;
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw Error("malformed date '" + std::string(text) + "'");
  const int y = parse_digits(text.substr(0, 4));
  const int m = parse_digits(text.substr(5, 2));
  const int d = parse_digits(text.substr(8, 2));
  if (y < 0 || m < 0 || d < 0) throw Error("malformed date '" + std::string(text) + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error("invalid calendar date '" + std::string(text) + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace epi
