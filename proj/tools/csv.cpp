#include "csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace snseg::cli {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

TimeSeries parse_csv(const std::string& text, bool header) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    const std::string_view row = strip(line);
    if (row.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = row.find(',', start);
      const std::string_view cell = strip(row.substr(start, comma == std::string_view::npos ? row.npos : comma - start));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw CsvError("line " + std::to_string(line_no) + ", column " + std::to_string(count + 1) +
                       ": cannot parse '" + std::string(cell) + "' as a number");
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns, found " +
                     std::to_string(count));
    }
    ++rows;
  }
  if (rows < 2) throw CsvError("input has " + std::to_string(rows) + " data rows; at least 2 are required");
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) data(r, c) = values[r * cols + c];
  }
  try {
    return TimeSeries(std::move(data));
  } catch (const std::invalid_argument& ex) {
    throw CsvError(ex.what());
  }
}

TimeSeries read_csv(const std::filesystem::path& path, bool header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str(), header);
  } catch (const CsvError& ex) {
    throw CsvError(path.string() + ": " + ex.what());
  }
}

std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_csv(const TimeSeries& series) {
  std::string out;
  for (int t = 1; t <= series.n(); ++t) {
    for (int c = 1; c <= series.p(); ++c) {
      if (c > 1) out += ',';
      out += format_g17(series(t, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace snseg::cli
