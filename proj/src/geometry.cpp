#include "pcvox/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pcvox {

double Vec3d::norm() const { return std::sqrt(norm2()); }

void PointCloud::validate() const {
  if (points.empty()) throw ContractViolation("PointCloud must contain at least one point");
  if (!normals.empty()) {
    if (normals.size() != points.size())
      throw ContractViolation("normal count does not match point count");
    for (const Vec3d& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-6)
        throw ContractViolation("normals must be unit length");
  }
}

void VoxelCloud::validate() const {
  if (depth < 1 || depth > 16) throw ContractViolation("voxel depth must be in 1..16");
  if (coords.empty()) throw ContractViolation("VoxelCloud must contain at least one voxel");
  const int32_t lim = (1 << depth) - 1;
  uint64_t prev = 0;
  for (size_t i = 0; i < coords.size(); ++i) {
    const Vec3i& c = coords[i];
    if (c.x < 0 || c.y < 0 || c.z < 0 || c.x > lim || c.y > lim || c.z > lim)
      throw ContractViolation("voxel component out of range for depth");
    uint64_t code = morton_code(c, depth);
    if (i > 0 && code <= prev)
      throw ContractViolation("voxels must be Morton-sorted and deduplicated");
    prev = code;
  }
}

uint64_t morton_code(const Vec3i& c, int depth) {
  if (depth < 1 || depth > 16) throw ContractViolation("morton_code: depth must be in 1..16");
  const int32_t lim = 1 << depth;
  if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= lim || c.y >= lim || c.z >= lim)
    throw ContractViolation("morton_code: component out of range");
  uint64_t code = 0;
  for (int b = depth - 1; b >= 0; --b) {
    int idx = (((c.x >> b) & 1) << 2) | (((c.y >> b) & 1) << 1) | ((c.z >> b) & 1);
    code = (code << 3) | uint64_t(idx);
  }
  return code;
}

Vec3i morton_decode(uint64_t code, int depth) {
  Vec3i c;
  for (int b = 0; b < depth; ++b) {
    c.x |= int32_t((code >> (3 * b + 2)) & 1) << b;
    c.y |= int32_t((code >> (3 * b + 1)) & 1) << b;
    c.z |= int32_t((code >> (3 * b)) & 1) << b;
  }
  return c;
}

void morton_sort_unique(std::vector<Vec3i>& coords, int depth) {
  std::vector<uint64_t> codes(coords.size());
  for (size_t i = 0; i < coords.size(); ++i) codes[i] = morton_code(coords[i], depth);
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  coords.resize(codes.size());
  for (size_t i = 0; i < codes.size(); ++i) coords[i] = morton_decode(codes[i], depth);
}

namespace {
// Half away from zero, matching std::round.
int32_t round_clamp(double v, int32_t lim) {
  double r = std::round(v);
  if (r < 0) return 0;
  if (r > lim) return lim;
  return int32_t(r);
}
}  // namespace

VoxelCloud quantize(const PointCloud& pc, double scale, int depth) {
  if (scale <= 0) throw ContractViolation("quantize: scale must be positive");
  if (depth < 1 || depth > 16) throw ContractViolation("quantize: depth must be in 1..16");
  pc.validate();
  const int32_t lim = (1 << depth) - 1;
  VoxelCloud vc;
  vc.depth = depth;
  vc.coords.reserve(pc.points.size());
  for (const Vec3d& p : pc.points)
    vc.coords.push_back(
        {round_clamp(p.x * scale, lim), round_clamp(p.y * scale, lim), round_clamp(p.z * scale, lim)});
  morton_sort_unique(vc.coords, depth);
  return vc;
}

PointCloud dequantize(const VoxelCloud& vc, double scale) {
  if (scale <= 0) throw ContractViolation("dequantize: scale must be positive");
  PointCloud pc;
  pc.points.reserve(vc.coords.size());
  for (const Vec3i& c : vc.coords)
    pc.points.push_back({double(c.x) / scale, double(c.y) / scale, double(c.z) / scale});
  return pc;
}

void group_parents(const std::vector<Vec3i>& children, std::vector<Vec3i>& parents,
                   std::vector<uint8_t>& occupancy) {
  parents.clear();
  occupancy.clear();
  for (const Vec3i& c : children) {
    Vec3i p = c >> 1;
    if (parents.empty() || !(parents.back() == p)) {
      parents.push_back(p);
      occupancy.push_back(0);
    }
    occupancy.back() |= uint8_t(1u << child_index(c));
  }
}

OctreeLevels build_octree(const VoxelCloud& vc) {
  vc.validate();
  OctreeLevels tree;
  tree.depth = vc.depth;
  tree.levels.resize(vc.depth);
  std::vector<Vec3i> nodes = vc.coords;
  for (int l = vc.depth - 1; l >= 0; --l) {
    OctreeLevel& level = tree.levels[l];
    group_parents(nodes, level.coords, level.occupancy);
    nodes = level.coords;
  }
  return tree;
}

VoxelCloud flatten_octree(const OctreeLevels& tree) {
  if (tree.depth < 1 || int(tree.levels.size()) != tree.depth)
    throw IntegrityError("flatten_octree: level count does not match depth");
  std::vector<Vec3i> nodes = {{0, 0, 0}};
  for (int l = 0; l < tree.depth; ++l) {
    const OctreeLevel& level = tree.levels[l];
    if (level.coords.size() != level.occupancy.size() || level.coords.size() != nodes.size())
      throw IntegrityError("flatten_octree: level size mismatch");
    std::vector<Vec3i> children;
    for (size_t i = 0; i < level.coords.size(); ++i) {
      if (!(level.coords[i] == nodes[i]))
        throw IntegrityError("flatten_octree: child set of a level does not match the next level");
      uint8_t occ = level.occupancy[i];
      if (occ == 0) throw IntegrityError("flatten_octree: empty occupancy byte");
      for (int idx = 0; idx < 8; ++idx)
        if (occ & (1u << idx)) children.push_back(child_coord(level.coords[i], idx));
    }
    nodes = std::move(children);
  }
  VoxelCloud vc;
  vc.depth = tree.depth;
  vc.coords = std::move(nodes);
  return vc;
}

}  // namespace pcvox
