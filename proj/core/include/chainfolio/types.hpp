#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace chainfolio {

using TokenId = std::string;
using AccountId = std::string;
using BlockHeight = std::int64_t;

/// Token amounts in base units. Supplies of 18-decimal tokens routinely exceed
/// 64 bits, so balances are kept exact.
using Amount = boost::multiprecision::cpp_int;

/// Reserved account used for mint (sender) and burn (recipient) semantics.
inline constexpr std::string_view kZeroAccount = "0x0000000000000000000000000000000000000000";

inline bool is_zero_account(std::string_view account) { return account == kZeroAccount; }

/// Parses a non-negative or negative decimal integer string. Throws InputError
/// on anything else (no exponents, no fractional part).
Amount parse_amount(std::string_view text);

/// Renders `value / 10^decimals` exactly as a decimal string ("370", "1.5").
std::string format_scaled(const Amount& value, int decimals);

/// `value / 10^decimals` rounded to the nearest double.
double to_units(const Amount& value, int decimals);

}  // namespace chainfolio
