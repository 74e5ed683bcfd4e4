#include "pcvox/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace pcvox {

namespace {
constexpr int kLeafSize = 12;

double sq(double v) { return v * v; }

double dist2(const Vec3d& a, const Vec3d& b) {
  return sq(a.x - b.x) + sq(a.y - b.y) + sq(a.z - b.z);
}

double axis_value(const Vec3d& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

PointCloud to_points(const VoxelCloud& vc) {
  PointCloud pc;
  pc.points.reserve(vc.coords.size());
  for (const Vec3i& c : vc.coords) pc.points.push_back({double(c.x), double(c.y), double(c.z)});
  return pc;
}
}  // namespace

KdTree::KdTree(std::vector<Vec3d> pts) : pts_(std::move(pts)) {
  index_.resize(pts_.size());
  for (size_t i = 0; i < index_.size(); ++i) index_[i] = i;
  if (!pts_.empty()) root_ = build(0, int(pts_.size()));
}

int KdTree::build(int begin, int end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return int(nodes_.size()) - 1;
  }
  Vec3d lo = pts_[index_[begin]], hi = lo;
  for (int i = begin; i < end; ++i) {
    const Vec3d& p = pts_[index_[i]];
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  Vec3d ext = hi - lo;
  int axis = 0;
  if (ext.y > axis_value(ext, axis)) axis = 1;
  if (ext.z > axis_value(ext, axis)) axis = 2;
  int mid = (begin + end) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](size_t a, size_t b) {
                     return axis_value(pts_[a], axis) < axis_value(pts_[b], axis);
                   });
  node.axis = axis;
  node.split = axis_value(pts_[index_[mid]], axis);
  int self = int(nodes_.size());
  nodes_.push_back(node);
  int left = build(begin, mid);
  int right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree::nearest_impl(int ni, const Vec3d& q, size_t& best, double& best_d2) const {
  const Node& node = nodes_[ni];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      size_t idx = index_[i];
      double d2 = dist2(pts_[idx], q);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  double delta = axis_value(q, node.axis) - node.split;
  int first = delta < 0 ? node.left : node.right;
  int second = delta < 0 ? node.right : node.left;
  nearest_impl(first, q, best, best_d2);
  if (sq(delta) <= best_d2) nearest_impl(second, q, best, best_d2);
}

size_t KdTree::nearest(const Vec3d& q) const {
  if (pts_.empty()) throw ContractViolation("KdTree::nearest on empty tree");
  size_t best = size_t(-1);
  double best_d2 = std::numeric_limits<double>::infinity();
  nearest_impl(root_, q, best, best_d2);
  return best;
}

void KdTree::knearest_impl(int ni, const Vec3d& q, int k,
                           std::vector<std::pair<double, size_t>>& heap) const {
  const Node& node = nodes_[ni];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      size_t idx = index_[i];
      double d2 = dist2(pts_[idx], q);
      if (int(heap.size()) < k) {
        heap.push_back({d2, idx});
        std::push_heap(heap.begin(), heap.end());
      } else if (std::make_pair(d2, idx) < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = {d2, idx};
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  double delta = axis_value(q, node.axis) - node.split;
  int first = delta < 0 ? node.left : node.right;
  int second = delta < 0 ? node.right : node.left;
  knearest_impl(first, q, k, heap);
  if (int(heap.size()) < k || sq(delta) <= heap.front().first) knearest_impl(second, q, k, heap);
}

std::vector<size_t> KdTree::knearest(const Vec3d& q, int k) const {
  if (k < 1 || size_t(k) > pts_.size())
    throw ContractViolation("KdTree::knearest: k out of range");
  std::vector<std::pair<double, size_t>> heap;
  heap.reserve(k);
  knearest_impl(root_, q, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  std::vector<size_t> out(heap.size());
  for (size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].second;
  return out;
}

namespace {

double psnr_from_mse(double mse, double peak) {
  if (mse <= 0) return kPsnrCap;
  double v = 10.0 * std::log10(3.0 * peak * peak / mse);
  return std::min(v, kPsnrCap);
}

double directed_mse(const std::vector<Vec3d>& from, const KdTree& to) {
  double sum = 0;
  for (const Vec3d& p : from) sum += dist2(p, to.points()[to.nearest(p)]);
  return sum / double(from.size());
}

double directed_plane_mse(const std::vector<Vec3d>& from, const KdTree& to,
                          const std::vector<Vec3d>& to_normals) {
  double sum = 0;
  for (const Vec3d& p : from) {
    size_t j = to.nearest(p);
    Vec3d off = p - to.points()[j];
    sum += sq(off.dot(to_normals[j]));
  }
  return sum / double(from.size());
}

}  // namespace

DistortionReport point_distortion(const PointCloud& a, const PointCloud& b, double peak) {
  if (a.points.empty() || b.points.empty())
    throw ContractViolation("point_distortion: clouds must be nonempty");
  KdTree ta(a.points), tb(b.points);
  DistortionReport rep;
  rep.mse_ab = directed_mse(a.points, tb);
  rep.mse_ba = directed_mse(b.points, ta);
  rep.chamfer = rep.mse_ab + rep.mse_ba;
  rep.d1_psnr = psnr_from_mse(std::max(rep.mse_ab, rep.mse_ba), peak);
  return rep;
}

double d2_psnr_points(const PointCloud& a, const PointCloud& b,
                      const std::vector<Vec3d>& b_normals, double peak) {
  if (b_normals.size() != b.points.size())
    throw ConfigError("d2_psnr: reference normals missing or mismatched");
  KdTree ta(a.points), tb(b.points);
  double mse_ab = directed_plane_mse(a.points, tb, b_normals);
  // b -> a: offsets projected onto the normal of the b-side point itself.
  double sum = 0;
  for (size_t i = 0; i < b.points.size(); ++i) {
    Vec3d off = b.points[i] - a.points[ta.nearest(b.points[i])];
    sum += sq(off.dot(b_normals[i]));
  }
  double mse_ba = sum / double(b.points.size());
  return psnr_from_mse(std::max(mse_ab, mse_ba), peak);
}

DistortionReport d1_psnr(const VoxelCloud& a, const VoxelCloud& b) {
  if (a.depth != b.depth) throw ContractViolation("d1_psnr: depth mismatch");
  double peak = double((1 << a.depth) - 1);
  return point_distortion(to_points(a), to_points(b), peak);
}

double d2_psnr(const VoxelCloud& a, const VoxelCloud& b, const std::vector<Vec3d>& b_normals) {
  if (a.depth != b.depth) throw ContractViolation("d2_psnr: depth mismatch");
  double peak = double((1 << a.depth) - 1);
  return d2_psnr_points(to_points(a), to_points(b), b_normals, peak);
}

NormalEstimate estimate_point_normals(const std::vector<Vec3d>& pts, int k) {
  if (k < 3) throw ContractViolation("estimate_normals: k must be >= 3");
  if (size_t(k) > pts.size()) throw ContractViolation("estimate_normals: k exceeds point count");
  KdTree tree(pts);
  NormalEstimate est;
  est.normals.resize(pts.size());
  est.degenerate.assign(pts.size(), 0);

  for (size_t i = 0; i < pts.size(); ++i) {
    std::vector<size_t> nb = tree.knearest(pts[i], k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (size_t j : nb) mean += Eigen::Vector3d(pts[j].x, pts[j].y, pts[j].z);
    mean /= double(nb.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (size_t j : nb) {
      Eigen::Vector3d d = Eigen::Vector3d(pts[j].x, pts[j].y, pts[j].z) - mean;
      cov += d * d.transpose();
    }
    cov /= double(nb.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const auto& evals = eig.eigenvalues();  // ascending
    // Rank < 2 neighborhoods (a point or a line) have no defined plane.
    if (evals[2] <= 0 || evals[1] <= 1e-9 * evals[2]) {
      est.normals[i] = {0, 0, 1};
      est.degenerate[i] = 1;
      est.any_degenerate = true;
      continue;
    }
    Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
    if (n.z() < 0 || (n.z() == 0 && (n.y() < 0 || (n.y() == 0 && n.x() < 0)))) n = -n;
    est.normals[i] = {n.x(), n.y(), n.z()};
  }
  return est;
}

NormalEstimate estimate_normals(const VoxelCloud& vc, int k) {
  return estimate_point_normals(to_points(vc).points, k);
}

}  // namespace pcvox
