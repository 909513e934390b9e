// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glowcast {

using Date = std::chrono::sys_days;

/// Missing observations are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Daily discharge per station on a gap-free calendar axis.
struct StationPanel {
  std::vector<std::string> station_ids;
  std::vector<Date> dates;
  std::vector<double> values;  // [days x stations], row-major

  std::size_t days() const { return dates.size(); }
  std::size_t stations() const { return station_ids.size(); }
  double at(std::size_t day, std::size_t station) const {
    return values[day * stations() + station];
  }
  double& at(std::size_t day, std::size_t station) { return values[day * stations() + station]; }
  std::size_t missing_count() const;

  /// Rows [first, first + count) as a new panel.
  StationPanel slice(std::size_t first, std::size_t count) const;
};

/// YYYY-MM-DD. Throws IngestError on anything else or an invalid calendar day.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date date);

/// Header `date,<id1>,<id2>,...`, one row per day, empty cell = missing.
/// Days absent from the file are inserted as all-missing rows.
StationPanel read_panel_csv(std::istream& in);
StationPanel ingest_csv(const std::filesystem::path& path);

/// Shortest round-trip number formatting; missing cells are left empty.
void write_panel_csv(const StationPanel& panel, std::ostream& out);
void export_csv(const StationPanel& panel, const std::filesystem::path& path);

/// Row-major square matrix as CSV, one row per line (no header).
void write_matrix_csv(std::span<const double> values, std::size_t order, std::ostream& out);
std::vector<double> read_matrix_csv(std::istream& in, std::size_t& order);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace glowcast
