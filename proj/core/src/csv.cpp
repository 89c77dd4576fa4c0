#include "chainfolio/csv.hpp"

#include "chainfolio/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

namespace chainfolio::csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

namespace {

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

Reader::Reader(std::istream& in, std::string source, const std::vector<std::string_view>& required)
    : in_(in), source_(std::move(source)) {
  std::string header_line;
  if (!std::getline(in_, header_line)) {
    throw InputError(fmt::format("{}: missing header line", source_));
  }
  line_ = 1;
  for (auto f : split(trim_cr(header_line))) header_.emplace_back(f);
  for (auto col : required) {
    if (!has_column(col)) {
      throw InputError(fmt::format("{}: missing required column '{}'", source_, col));
    }
  }
}

bool Reader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    const std::string_view row = trim_cr(buffer_);
    if (row.empty()) continue;
    fields_ = split(row);
    if (fields_.size() != header_.size()) {
      throw InputError(fmt::format("{}:{}: expected {} fields, found {}", source_, line_, header_.size(),
                                   fields_.size()));
    }
    return true;
  }
  return false;
}

bool Reader::has_column(std::string_view column) const {
  for (const auto& h : header_) {
    if (h == column) return true;
  }
  return false;
}

std::size_t Reader::index_of(std::string_view column) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == column) return i;
  }
  throw InputError(fmt::format("{}: unknown column '{}'", source_, column));
}

std::string_view Reader::field(std::string_view column) const { return fields_.at(index_of(column)); }

std::optional<std::string_view> Reader::optional_field(std::string_view column) const {
  if (!has_column(column)) return std::nullopt;
  auto v = field(column);
  if (v.empty()) return std::nullopt;
  return v;
}

double Reader::number(std::string_view column) const {
  const auto text = field(column);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("{}:{}: column '{}' is not a number: '{}'", source_, line_, column, text));
  }
  return value;
}

long long Reader::integer(std::string_view column) const {
  const auto text = field(column);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(fmt::format("{}:{}: column '{}' is not an integer: '{}'", source_, line_, column, text));
  }
  return value;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (value == 0.0) return "0";  // folds -0
  return fmt::format("{}", value);
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + fmt::format(".tmp.{}", ::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot open '{}' for writing", tmp));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(fmt::format("write to '{}' failed", tmp));
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace chainfolio::csv
