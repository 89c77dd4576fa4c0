#include "chainfolio/calendar.hpp"

#include "chainfolio/error.hpp"

#include <charconv>

#include <fmt/format.h>

namespace chainfolio {

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int value = 0;
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw InputError(fmt::format("invalid date '{}'", whole));
  }
  return value;
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw InputError(fmt::format("invalid date '{}' (expected YYYY-MM-DD)", text));
  }
  const int y = parse_fixed(text, 0, 4, text);
  const int m = parse_fixed(text, 5, 2, text);
  const int d = parse_fixed(text, 8, 2, text);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) {
    throw InputError(fmt::format("invalid calendar date '{}'", text));
  }
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

std::string month_key(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()));
}

Date parse_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') {
    throw InputError(fmt::format("invalid month '{}' (expected YYYY-MM)", text));
  }
  const int y = parse_fixed(text, 0, 4, text);
  const int m = parse_fixed(text, 5, 2, text);
  if (m < 1 || m > 12) {
    throw InputError(fmt::format("invalid month '{}'", text));
  }
  return Date{std::chrono::year{y} / std::chrono::month{static_cast<unsigned>(m)} / std::chrono::day{1}};
}

Date first_of_month(Date d) {
  const std::chrono::year_month_day ymd{d};
  return Date{ymd.year() / ymd.month() / std::chrono::day{1}};
}

Date add_months(Date d, int months) {
  const std::chrono::year_month_day ymd{first_of_month(d)};
  const auto shifted = std::chrono::year_month{ymd.year(), ymd.month()} + std::chrono::months{months};
  return Date{shifted / std::chrono::day{1}};
}

std::int64_t to_unix(Date d) {
  return std::chrono::duration_cast<std::chrono::seconds>(d.time_since_epoch()).count();
}

Date from_unix(std::int64_t seconds) {
  return std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds{std::chrono::seconds{seconds}});
}

}  // namespace chainfolio
