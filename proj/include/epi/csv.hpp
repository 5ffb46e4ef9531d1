#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace epi {

// Minimal comma-separated reader: no quoting, UTF-8 passthrough, optional trailing CR.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in);

  // Index of a header column; throws if absent.
  std::size_t column(std::string_view name) const;
  const std::vector<std::string>& header() const { return header_; }

  // Reads the next non-empty row; returns false at end of input.
  bool next(std::vector<std::string>& fields);
  // 1-based line number of the row last returned by next().
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

std::vector<std::string> split_csv_line(std::string_view line);
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

}  // namespace epi
