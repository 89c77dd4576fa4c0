#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chainfolio::csv {

/// Minimal comma-separated reader for the project's own file formats. Fields
/// never contain commas, quotes or newlines, so no quoting rules apply.
class Reader {
 public:
  /// Reads the header line immediately. Throws InputError when it is missing
  /// or lacks any of `required` columns.
  Reader(std::istream& in, std::string source, const std::vector<std::string_view>& required = {});

  /// Advances to the next non-empty row. Returns false at end of input.
  bool next();

  std::string_view field(std::string_view column) const;
  std::optional<std::string_view> optional_field(std::string_view column) const;
  bool has_column(std::string_view column) const;

  double number(std::string_view column) const;
  long long integer(std::string_view column) const;

  /// 1-based line number of the current row (header is line 1).
  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }

 private:
  std::size_t index_of(std::string_view column) const;

  std::istream& in_;
  std::string source_;
  std::vector<std::string> header_;
  std::string buffer_;
  std::vector<std::string_view> fields_;
  std::size_t line_ = 0;
};

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Shortest round-trip decimal representation; identical bits give identical
/// text, which the byte-identical report guarantee relies on.
std::string format_number(double value);

/// Writes `content` to `path` through a temporary file and an atomic rename,
/// so readers never observe a partially written file.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace chainfolio::csv
