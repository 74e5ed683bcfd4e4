#pragma once

#include <string>

#include "pcvox/rdeval.hpp"

namespace pcvox {

struct RDEntry {
  std::string cloud;
  std::string chain;  // e.g. "quantize+octree", "voxnet+octree"
  RDPoint point;
};

struct BdRateEntry {
  std::string cloud;
  std::string ref_chain;
  std::string test_chain;
  double bd_percent = 0;
};

struct FlopsEntry {
  std::string label;
  long flops = 0;
};

struct ReportBundle {
  std::vector<RDEntry> rd_points;
  std::vector<BdRateEntry> bd_rates;
  std::vector<FlopsEntry> flops;
  std::vector<std::string> notes;
};

// Emits rd_points.csv, bdrate.csv, flops.csv and summary.txt under dir,
// RFC-4180 quoting, rows ordered by (cloud, chain, bpp) so identical
// results are byte-identical files.
void write_report(const std::string& dir, const ReportBundle& bundle);

std::string csv_escape(const std::string& field);
std::string format_double(double v);  // fixed 6-decimal, deterministic

}  // namespace pcvox
