#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssm {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; returns false on anything else or an invalid day.
bool parse_date(std::string_view text, Date& out);
std::string format_date(Date d);

struct Bar {
  Date timestamp;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

/// CSV with header "date,open,high,low,close" (extra trailing columns are
/// ignored). Rows are returned sorted by date. Malformed rows raise
/// ParseError, OHLC violations and repeated dates raise DataError, each with
/// the 1-based line number.
std::vector<Bar> load_bars(std::istream& in);

/// Throws Error naming the path if the file cannot be opened.
std::vector<Bar> load_bars(const std::filesystem::path& path);

struct TrainTest {
  std::vector<Bar> train;
  std::vector<Bar> test;
};

/// Chronological split with floor(fraction * n) bars in the training side.
/// Throws SplitError when either side would be empty.
TrainTest split_train_test(std::span<const Bar> bars, double fraction);

std::vector<double> closes(std::span<const Bar> bars);

}  // namespace ssm
