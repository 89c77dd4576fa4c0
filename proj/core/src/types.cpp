#include "chainfolio/types.hpp"

#include "chainfolio/error.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <fmt/format.h>

namespace chainfolio {

Amount parse_amount(std::string_view text) {
  std::string_view digits = text;
  bool negative = false;
  if (!digits.empty() && (digits.front() == '-' || digits.front() == '+')) {
    negative = digits.front() == '-';
    digits.remove_prefix(1);
  }
  if (digits.empty()) {
    throw InputError(fmt::format("invalid amount '{}'", text));
  }
  for (char c : digits) {
    if (c < '0' || c > '9') {
      throw InputError(fmt::format("invalid amount '{}'", text));
    }
  }
  Amount value{std::string(digits)};
  return negative ? Amount{-value} : value;
}

std::string format_scaled(const Amount& value, int decimals) {
  const bool negative = value < 0;
  std::string digits = (negative ? Amount{-value} : value).str();
  if (decimals > 0) {
    const auto dec = static_cast<std::size_t>(decimals);
    if (digits.size() <= dec) {
      digits.insert(0, dec - digits.size() + 1, '0');
    }
    digits.insert(digits.size() - dec, 1, '.');
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
  }
  return negative ? "-" + digits : digits;
}

double to_units(const Amount& value, int decimals) {
  using Float = boost::multiprecision::cpp_bin_float_50;
  Float scaled{value};
  if (decimals > 0) {
    scaled /= boost::multiprecision::pow(Float{10}, decimals);
  }
  return scaled.convert_to<double>();
}

}  // namespace chainfolio
