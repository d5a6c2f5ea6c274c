#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dbe/numerics.hpp"

namespace dbe {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 17 significant digits, enough for exact double round-trip
std::string format_g17(double x);

// comma-delimited, header row, \n line endings
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  const std::string& str() const { return buf_; }

 private:
  std::size_t width_ = 0;
  std::string buf_;
};

// write to a sibling temp file, then rename into place
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

}  // namespace dbe
