#pragma once

#include "btltrack/harness.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace btltrack {

inline constexpr int kResultSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// One row of a long-format result table.
struct ResultRow {
  std::string variant;
  std::optional<double> kappa;  // UT only
  double iw = 0.0;
  std::optional<int> step;      // nullopt for the time average ("avg")
  double rmse_m = 0.0;
  int diverged_runs = 0;
  long repairs = 0;
};

/// Tab-separated table with a '#'-prefixed provenance header.
struct ResultTable {
  std::map<std::string, std::string> meta;  // schema, version, config_hash, seed, ...
  std::vector<ResultRow> rows;
};

/// Per-step rows (step = 1..K) for every variant.
std::vector<ResultRow> curve_rows(const McReport& report, double iw);
/// One "avg" row per variant.
std::vector<ResultRow> summary_rows(const McReport& report, double iw);

std::string format_table(const ResultTable& table);
ResultTable parse_table(const std::string& text);

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

ResultTable read_table(const std::filesystem::path& path);

/// Decimal text that parses back to the identical double.
std::string format_real(double v);

std::string hex64(std::uint64_t v);

}  // namespace btltrack
