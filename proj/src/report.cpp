#include "pcvox/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace pcvox {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // fixed \n line endings
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

}  // namespace

void write_report(const std::string& dir, const ReportBundle& bundle) {
  std::filesystem::create_directories(dir);

  std::vector<RDEntry> rd = bundle.rd_points;
  std::sort(rd.begin(), rd.end(), [](const RDEntry& a, const RDEntry& b) {
    if (a.cloud != b.cloud) return a.cloud < b.cloud;
    if (a.chain != b.chain) return a.chain < b.chain;
    return a.point.bpp < b.point.bpp;
  });
  {
    std::ofstream out = open_out(dir + "/rd_points.csv");
    out << "cloud,chain,scale,bpp,d1_psnr,d2_psnr,coded_points\n";
    for (const RDEntry& e : rd)
      out << csv_escape(e.cloud) << "," << csv_escape(e.chain) << ","
          << format_double(e.point.scale) << "," << format_double(e.point.bpp) << ","
          << format_double(e.point.psnr) << "," << format_double(e.point.d2) << ","
          << e.point.coded_points << "\n";
  }

  std::vector<BdRateEntry> bd = bundle.bd_rates;
  std::sort(bd.begin(), bd.end(), [](const BdRateEntry& a, const BdRateEntry& b) {
    if (a.cloud != b.cloud) return a.cloud < b.cloud;
    return a.test_chain < b.test_chain;
  });
  {
    std::ofstream out = open_out(dir + "/bdrate.csv");
    out << "cloud,ref_chain,test_chain,bd_rate_percent\n";
    for (const BdRateEntry& e : bd)
      out << csv_escape(e.cloud) << "," << csv_escape(e.ref_chain) << ","
          << csv_escape(e.test_chain) << "," << format_double(e.bd_percent) << "\n";
  }

  {
    std::ofstream out = open_out(dir + "/flops.csv");
    out << "label,flops\n";
    for (const FlopsEntry& e : bundle.flops)
      out << csv_escape(e.label) << "," << e.flops << "\n";
  }

  {
    std::ofstream out = open_out(dir + "/summary.txt");
    out << "pcvox evaluation summary\n";
    out << "rd points: " << rd.size() << "\n";
    out << "bd-rate entries: " << bd.size() << "\n";
    if (!bd.empty()) {
      double mean = 0;
      for (const BdRateEntry& e : bd) mean += e.bd_percent;
      mean /= double(bd.size());
      out << "mean bd-rate: " << format_double(mean) << "%\n";
    }
    for (const FlopsEntry& e : bundle.flops)
      out << "flops[" << e.label << "] = " << e.flops << "\n";
    for (const std::string& note : bundle.notes) out << note << "\n";
  }
}

}  // namespace pcvox
