#pragma once

#include <optional>

#include "pcvox/metrics.hpp"
#include "pcvox/voxnet.hpp"

namespace pcvox {

struct RDPoint {
  double bpp = 0;   // payload bits / original input point count
  double psnr = 0;  // D1, dB, against the original cloud
  double d2 = -1;   // D2, dB, when reference normals were available
  double scale = 0;
  size_t coded_points = 0;
};

// Rate-distortion samples, strictly increasing in bpp.
struct RDCurve {
  std::vector<RDPoint> samples;
  void validate() const;
};

struct SweepConfig {
  std::vector<double> scales = {1.0, 0.5, 0.25, 0.125};
  int depth = 8;
  double peak = 255.0;  // signal range of the original clouds
  bool compute_d2 = true;
  int normal_k = 9;
};

// One operating point: preprocess, losslessly code with the octree codec,
// verify the round trip, dequantize, measure against the original.
RDPoint rd_point_plain(const PointCloud& original, double pc_scale, const SweepConfig& cfg);
RDPoint rd_point_voxnet(const PointCloud& original, const nn::VoxNetModel& model, double pc_scale,
                        const SweepConfig& cfg);

RDCurve rd_sweep_plain(const PointCloud& original, const SweepConfig& cfg);
RDCurve rd_sweep_voxnet(const PointCloud& original, const nn::VoxNetModel& model,
                        const SweepConfig& cfg);

// Lower envelope in (bpp, psnr): drops points dominated by a cheaper,
// better one, yielding a valid monotone curve from a point grid.
RDCurve pareto_front(std::vector<RDPoint> points);

// Bjontegaard delta rate: cubic fit of log-rate over PSNR per curve,
// averaged rate ratio over the shared PSNR interval, in percent. Negative
// means `test` needs less rate than `ref`. Non-overlapping PSNR ranges are
// an error, never an extrapolation.
double bd_rate(const RDCurve& ref, const RDCurve& test);

}  // namespace pcvox
