#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace chainfolio {

/// Calendar day (UTC). All price series and snapshots are day-granular.
using Date = std::chrono::sys_days;

/// Parses "YYYY-MM-DD". Throws InputError.
Date parse_date(std::string_view text);

std::string format_date(Date d);

/// "YYYY-MM", used as the partition key of monthly outputs.
std::string month_key(Date d);

/// Parses "YYYY-MM" into the first day of that month.
Date parse_month(std::string_view text);

Date first_of_month(Date d);
Date add_months(Date d, int months);

/// Seconds since the Unix epoch at 00:00 UTC of `d`.
std::int64_t to_unix(Date d);

/// Day containing the given Unix timestamp.
Date from_unix(std::int64_t seconds);

}  // namespace chainfolio
