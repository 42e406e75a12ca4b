#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace coordfit {

struct ReportRow {
  std::string experiment;
  std::string signal;
  std::string variant;
  int depth = 0;
  double fraction = 0.0;
  std::string scheme;
  std::uint64_t seed = 0;
  double train_psnr = 0.0;
  double test_psnr = 0.0;
  std::optional<double> ssim;
  std::optional<double> wall_time_s;
  std::string note;  // "ok", or the error that aborted this cell
};

struct Report {
  std::vector<ReportRow> rows;

  void add(ReportRow row) { rows.push_back(std::move(row)); }
  /// Rows matching a variant (and optionally a depth / fraction).
  std::vector<const ReportRow*> select(const std::string& variant, std::optional<int> depth = {},
                                       std::optional<double> fraction = {}) const;
};

/// RFC-4180 quoting: fields containing comma, quote or newline are quoted and
/// embedded quotes doubled.
std::string csv_field(const std::string& text);

void write_report_csv(const std::filesystem::path& path, const Report& report);
std::string report_csv(const Report& report);

}  // namespace coordfit
