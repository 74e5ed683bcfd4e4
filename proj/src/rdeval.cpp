#include "pcvox/rdeval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "pcvox/octree_codec.hpp"

namespace pcvox {

void RDCurve::validate() const {
  if (samples.size() < 4) throw ContractViolation("RDCurve needs at least 4 samples");
  for (size_t i = 0; i < samples.size(); ++i) {
    const RDPoint& p = samples[i];
    if (!(p.bpp > 0) || !std::isfinite(p.bpp) || !std::isfinite(p.psnr))
      throw ContractViolation("RDCurve sample is not finite and positive");
    if (i > 0 && !(p.bpp > samples[i - 1].bpp))
      throw ContractViolation("RDCurve bpp must be strictly increasing");
  }
}

namespace {

RDPoint measure_point(const PointCloud& original, const VoxelCloud& coded, double pc_scale,
                      const SweepConfig& cfg) {
  Bitstream bs = octree_encode(coded, float(pc_scale));
  VoxelCloud decoded = octree_decode(bs);
  if (!(decoded.coords == coded.coords))
    throw IntegrityError("lossless stage round-trip mismatch");

  PointCloud recon = dequantize(decoded, pc_scale);
  DistortionReport rep = point_distortion(recon, original, cfg.peak);
  RDPoint pt;
  pt.bpp = double(bs.payload_bits()) / double(original.points.size());
  pt.psnr = rep.d1_psnr;
  pt.scale = pc_scale;
  pt.coded_points = coded.coords.size();
  if (cfg.compute_d2 && original.points.size() >= size_t(cfg.normal_k)) {
    NormalEstimate est = estimate_point_normals(original.points, cfg.normal_k);
    pt.d2 = d2_psnr_points(recon, original, est.normals, cfg.peak);
  }
  return pt;
}

}  // namespace

RDPoint rd_point_plain(const PointCloud& original, double pc_scale, const SweepConfig& cfg) {
  VoxelCloud coded = quantize(original, pc_scale, cfg.depth);
  return measure_point(original, coded, pc_scale, cfg);
}

RDPoint rd_point_voxnet(const PointCloud& original, const nn::VoxNetModel& model, double pc_scale,
                        const SweepConfig& cfg) {
  nn::VoxelizeResult res = model.voxelize(original, pc_scale, cfg.depth);
  return measure_point(original, res.cloud, pc_scale, cfg);
}

namespace {

RDCurve sweep(const PointCloud& original, const SweepConfig& cfg,
              const std::function<RDPoint(double)>& point_fn) {
  std::vector<RDPoint> pts;
  for (double s : cfg.scales) pts.push_back(point_fn(s));
  return pareto_front(std::move(pts));
}

}  // namespace

RDCurve rd_sweep_plain(const PointCloud& original, const SweepConfig& cfg) {
  return sweep(original, cfg, [&](double s) { return rd_point_plain(original, s, cfg); });
}

RDCurve rd_sweep_voxnet(const PointCloud& original, const nn::VoxNetModel& model,
                        const SweepConfig& cfg) {
  return sweep(original, cfg, [&](double s) { return rd_point_voxnet(original, model, s, cfg); });
}

RDCurve pareto_front(std::vector<RDPoint> points) {
  std::sort(points.begin(), points.end(), [](const RDPoint& a, const RDPoint& b) {
    if (a.bpp != b.bpp) return a.bpp < b.bpp;
    return a.psnr > b.psnr;
  });
  RDCurve curve;
  for (const RDPoint& p : points) {
    while (!curve.samples.empty() && curve.samples.back().psnr <= p.psnr &&
           curve.samples.back().bpp >= p.bpp * (1.0 - 1e-12))
      curve.samples.pop_back();
    if (curve.samples.empty() || p.psnr > curve.samples.back().psnr) curve.samples.push_back(p);
  }
  return curve;
}

namespace {

// Least-squares cubic of y over centered x.
struct Cubic {
  double x0 = 0;
  Eigen::Vector4d coef = Eigen::Vector4d::Zero();

  static Cubic fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    Cubic c;
    double mean = 0;
    for (double x : xs) mean += x;
    c.x0 = mean / double(xs.size());
    Eigen::MatrixXd a(xs.size(), 4);
    Eigen::VectorXd b(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      double t = xs[i] - c.x0;
      a(Eigen::Index(i), 0) = 1;
      a(Eigen::Index(i), 1) = t;
      a(Eigen::Index(i), 2) = t * t;
      a(Eigen::Index(i), 3) = t * t * t;
      b(Eigen::Index(i)) = ys[i];
    }
    c.coef = a.colPivHouseholderQr().solve(b);
    return c;
  }

  double operator()(double x) const {
    double t = x - x0;
    return coef[0] + coef[1] * t + coef[2] * t * t + coef[3] * t * t * t;
  }
};

}  // namespace

double bd_rate(const RDCurve& ref, const RDCurve& test) {
  ref.validate();
  test.validate();
  auto extract = [](const RDCurve& c, std::vector<double>& psnr, std::vector<double>& lograte) {
    for (const RDPoint& p : c.samples) {
      psnr.push_back(p.psnr);
      lograte.push_back(std::log(p.bpp));
    }
  };
  std::vector<double> pr, lr, pt, lt;
  extract(ref, pr, lr);
  extract(test, pt, lt);

  double lo = std::max(*std::min_element(pr.begin(), pr.end()),
                       *std::min_element(pt.begin(), pt.end()));
  double hi = std::min(*std::max_element(pr.begin(), pr.end()),
                       *std::max_element(pt.begin(), pt.end()));
  if (!(hi > lo)) throw ContractViolation("bd_rate: PSNR ranges do not overlap");

  Cubic fr = Cubic::fit(pr, lr);
  Cubic ft = Cubic::fit(pt, lt);

  const int kSamples = 100;
  double integral = 0;
  double prev = ft(lo) - fr(lo);
  for (int i = 1; i <= kSamples; ++i) {
    double x = lo + (hi - lo) * double(i) / kSamples;
    double cur = ft(x) - fr(x);
    integral += 0.5 * (prev + cur) * (hi - lo) / kSamples;
    prev = cur;
  }
  double avg_log_ratio = integral / (hi - lo);
  return (std::exp(avg_log_ratio) - 1.0) * 100.0;
}

}  // namespace pcvox
