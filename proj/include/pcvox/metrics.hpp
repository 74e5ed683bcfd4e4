#pragma once

#include <vector>

#include "pcvox/geometry.hpp"

namespace pcvox {

// d1_psnr uses max(mse_ab, mse_ba) against peak 3*(2^d-1)^2 per the MPEG
// common-test-conditions convention; identical clouds are reported as the
// 100 dB cap. chamfer = mse_ab + mse_ba.
struct DistortionReport {
  double d1_psnr = 0;
  double d2_psnr = -1;  // < 0 when not computed
  double chamfer = 0;
  double mse_ab = 0;
  double mse_ba = 0;
};

inline constexpr double kPsnrCap = 100.0;

class KdTree {
public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3d> pts);

  // Index of the nearest stored point (ties broken by lowest index).
  size_t nearest(const Vec3d& q) const;
  // Indices of the k nearest stored points, closest first.
  std::vector<size_t> knearest(const Vec3d& q, int k) const;
  size_t size() const { return pts_.size(); }
  const std::vector<Vec3d>& points() const { return pts_; }

private:
  struct Node {
    int axis = -1;      // -1 marks a leaf
    double split = 0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // point range for leaves
  };
  int build(int begin, int end);
  void nearest_impl(int node, const Vec3d& q, size_t& best, double& best_d2) const;
  void knearest_impl(int node, const Vec3d& q, int k,
                     std::vector<std::pair<double, size_t>>& heap) const;

  std::vector<Vec3d> pts_;
  std::vector<size_t> index_;  // original indices, permuted by build
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Point-to-point distortion between real-valued clouds; peak is the signal
// range (e.g. 2^d - 1 for voxel grids).
DistortionReport point_distortion(const PointCloud& a, const PointCloud& b, double peak);

// Point-to-plane PSNR; normals live on the reference cloud b (one per point
// of b) and each offset is projected onto the normal at the involved b point.
double d2_psnr_points(const PointCloud& a, const PointCloud& b,
                      const std::vector<Vec3d>& b_normals, double peak);

DistortionReport d1_psnr(const VoxelCloud& a, const VoxelCloud& b);
double d2_psnr(const VoxelCloud& a, const VoxelCloud& b, const std::vector<Vec3d>& b_normals);

struct NormalEstimate {
  std::vector<Vec3d> normals;
  std::vector<uint8_t> degenerate;  // per point: covariance plane fit failed
  bool any_degenerate = false;
};

// Plane fit over the k nearest neighbors (the query point included); the
// normal is the eigenvector of the smallest covariance eigenvalue, signed
// toward the +z half-space (+y, then +x break ties). Degenerate
// neighborhoods fall back to (0,0,1) and are flagged.
NormalEstimate estimate_normals(const VoxelCloud& vc, int k);
NormalEstimate estimate_point_normals(const std::vector<Vec3d>& pts, int k);

}  // namespace pcvox
