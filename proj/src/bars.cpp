#include "ssm/bars.hpp"

#include "ssm/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

namespace ssm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_int(std::string_view s, int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string buf(s);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && std::isfinite(out);
}

}  // namespace

bool parse_date(std::string_view text, Date& out) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d)) {
    return false;
  }
  const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                                        std::chrono::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) return false;
  out = Date(ymd);
  return true;
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd(d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<Bar> load_bars(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++lineno;
  const auto header = split_csv(line);
  static constexpr std::string_view expected[] = {"date", "open", "high", "low", "close"};
  bool header_ok = header.size() >= 5;
  for (std::size_t i = 0; header_ok && i < 5; ++i) {
    std::string cell(header[i]);
    std::transform(cell.begin(), cell.end(), cell.begin(), [](unsigned char c) { return std::tolower(c); });
    header_ok = cell == expected[i];
  }
  if (!header_ok) throw ParseError("expected header date,open,high,low,close", lineno);

  std::vector<std::pair<Bar, std::size_t>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 5) throw ParseError("expected 5 columns", lineno);
    Bar bar;
    if (!parse_date(cells[0], bar.timestamp)) {
      throw ParseError("bad date '" + std::string(cells[0]) + "'", lineno);
    }
    double* fields[] = {&bar.open, &bar.high, &bar.low, &bar.close};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!parse_double(cells[i + 1], *fields[i])) {
        throw ParseError("bad number '" + std::string(cells[i + 1]) + "'", lineno);
      }
    }
    if (bar.high < bar.low) throw DataError("high below low", lineno);
    if (bar.low > std::min(bar.open, bar.close)) throw DataError("low above open/close", lineno);
    if (bar.high < std::max(bar.open, bar.close)) throw DataError("high below open/close", lineno);
    rows.emplace_back(bar, lineno);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first.timestamp < b.first.timestamp; });
  std::vector<Bar> bars;
  bars.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first.timestamp == rows[i - 1].first.timestamp) {
      throw DataError("duplicate date " + format_date(rows[i].first.timestamp),
                      std::max(rows[i].second, rows[i - 1].second));
    }
    bars.push_back(rows[i].first);
  }
  return bars;
}

std::vector<Bar> load_bars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file " + path.string());
  return load_bars(in);
}

TrainTest split_train_test(std::span<const Bar> bars, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw SplitError("split fraction must lie strictly between 0 and 1");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(bars.size())));
  if (n_train == 0 || n_train == bars.size()) {
    throw SplitError("split of " + std::to_string(bars.size()) + " bars at " + std::to_string(fraction) +
                     " leaves an empty side");
  }
  TrainTest out;
  out.train.assign(bars.begin(), bars.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(bars.begin() + static_cast<std::ptrdiff_t>(n_train), bars.end());
  return out;
}

std::vector<double> closes(std::span<const Bar> bars) {
  std::vector<double> out;
  out.reserve(bars.size());
  for (const Bar& b : bars) out.push_back(b.close);
  return out;
}

}  // namespace ssm
