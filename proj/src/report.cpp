#include "coordfit/report.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "coordfit/kvconfig.hpp"

namespace coordfit {

std::vector<const ReportRow*> Report::select(const std::string& variant, std::optional<int> depth,
                                             std::optional<double> fraction) const {
  std::vector<const ReportRow*> out;
  for (const auto& r : rows) {
    if (r.variant != variant || r.note != "ok") continue;
    if (depth && r.depth != *depth) continue;
    if (fraction && r.fraction != *fraction) continue;
    out.push_back(&r);
  }
  return out;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string report_csv(const Report& report) {
  std::ostringstream out;
  out << "experiment,signal,variant,depth,fraction,scheme,seed,train_psnr_db,test_psnr_db,ssim,wall_time_s,status\r\n";
  for (const auto& r : report.rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.signal) << ',' << csv_field(r.variant) << ','
        << r.depth << ',' << format_double(r.fraction) << ',' << csv_field(r.scheme) << ',' << r.seed << ','
        << format_double(r.train_psnr) << ',' << format_double(r.test_psnr) << ','
        << (r.ssim ? format_double(*r.ssim) : "") << ','
        << (r.wall_time_s ? format_double(*r.wall_time_s) : "") << ',' << csv_field(r.note) << "\r\n";
  }
  return out.str();
}

void write_report_csv(const std::filesystem::path& path, const Report& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report_csv(report);
}

}  // namespace coordfit
