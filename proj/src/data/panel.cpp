// SPDX-License-Identifier: Apache-2.0
#include "glowcast/data/panel.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "glowcast/error.hpp"

namespace glowcast {
namespace {

using namespace std::chrono;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

[[noreturn]] void fail_row(std::size_t line, const std::string& what) {
  throw IngestError("row " + std::to_string(line) + ": " + what);
}

}  // namespace

std::size_t StationPanel::missing_count() const {
  std::size_t count = 0;
  for (double v : values) count += is_missing(v) ? 1 : 0;
  return count;
}

StationPanel StationPanel::slice(std::size_t first, std::size_t count) const {
  if (first + count > days()) throw ContractError("panel slice past the end");
  StationPanel out;
  out.station_ids = station_ids;
  out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                   dates.begin() + static_cast<std::ptrdiff_t>(first + count));
  const std::size_t n = stations();
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first * n),
                    values.begin() + static_cast<std::ptrdiff_t>((first + count) * n));
  return out;
}

Date parse_iso_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_int(text.substr(0, 4), y) ||
      !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d))
    throw IngestError("bad date '" + std::string(text) + "'");
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw IngestError("invalid calendar day '" + std::string(text) + "'");
  return sys_days{ymd};
}

std::string format_iso_date(Date date) {
  const year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ContractError("number formatting failed");
  return {buf, ptr};
}

StationPanel read_panel_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw IngestError("empty file");
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "date")
    fail_row(line_no, "header must be 'date,<station ids>'");

  StationPanel panel;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].empty()) fail_row(line_no, "empty station id in column " + std::to_string(i + 1));
    panel.station_ids.emplace_back(header[i]);
  }
  const std::size_t n = panel.stations();

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != n + 1)
      fail_row(line_no, "expected " + std::to_string(n + 1) + " cells, found " +
                            std::to_string(cells.size()));
    Date date;
    try {
      date = parse_iso_date(cells[0]);
    } catch (const IngestError& e) {
      fail_row(line_no, e.what());
    }
    if (!panel.dates.empty()) {
      const Date last = panel.dates.back();
      if (date == last) fail_row(line_no, "duplicate date " + format_iso_date(date));
      if (date < last) fail_row(line_no, "date " + format_iso_date(date) + " goes backwards");
      for (Date gap = last + days{1}; gap < date; gap += days{1}) {
        panel.dates.push_back(gap);
        panel.values.insert(panel.values.end(), n, kMissing);
      }
    }
    panel.dates.push_back(date);
    for (std::size_t s = 0; s < n; ++s) {
      double v = kMissing;
      if (!cells[s + 1].empty() && (!parse_double(cells[s + 1], v) || !std::isfinite(v)))
        fail_row(line_no, "cannot parse '" + std::string(cells[s + 1]) + "' for station " +
                              panel.station_ids[s]);
      panel.values.push_back(v);
    }
  }
  if (panel.dates.empty()) throw IngestError("no data rows");
  return panel;
}

StationPanel ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  return read_panel_csv(in);
}

void write_panel_csv(const StationPanel& panel, std::ostream& out) {
  out << "date";
  for (const auto& id : panel.station_ids) out << ',' << id;
  out << '\n';
  for (std::size_t d = 0; d < panel.days(); ++d) {
    out << format_iso_date(panel.dates[d]);
    for (std::size_t s = 0; s < panel.stations(); ++s) {
      out << ',';
      if (!is_missing(panel.at(d, s))) out << format_double(panel.at(d, s));
    }
    out << '\n';
  }
}

void export_csv(const StationPanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path.string());
  write_panel_csv(panel, out);
  if (!out) throw IngestError("write failed for " + path.string());
}

void write_matrix_csv(std::span<const double> values, std::size_t order, std::ostream& out) {
  if (values.size() != order * order) throw DimensionError("matrix is not square");
  for (std::size_t i = 0; i < order; ++i) {
    for (std::size_t j = 0; j < order; ++j) {
      if (j) out << ',';
      out << format_double(values[i * order + j]);
    }
    out << '\n';
  }
}

std::vector<double> read_matrix_csv(std::istream& in, std::size_t& order) {
  std::vector<double> values;
  std::string line;
  std::size_t rows = 0, line_no = 0;
  order = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (order == 0) order = cells.size();
    if (cells.size() != order) fail_row(line_no, "ragged matrix row");
    for (auto c : cells) {
      double v = 0.0;
      if (!parse_double(c, v)) fail_row(line_no, "cannot parse '" + std::string(c) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows != order || order == 0) throw IngestError("matrix is not square");
  return values;
}

}  // namespace glowcast
