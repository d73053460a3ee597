#pragma once

#include "snseg/core_types.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace snseg::cli {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rows are time points, columns are series coordinates. Errors name the 1-based line.
TimeSeries parse_csv(const std::string& text, bool header);
TimeSeries read_csv(const std::filesystem::path& path, bool header);

// 17 significant digits, so values round-trip bit-exactly.
std::string format_csv(const TimeSeries& series);
std::string format_g17(double v);

}  // namespace snseg::cli
