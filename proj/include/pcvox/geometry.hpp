#pragma once

#include <cstdint>
#include <vector>

#include "pcvox/errors.hpp"

namespace pcvox {

struct Vec3i {
  int32_t x = 0, y = 0, z = 0;

  friend bool operator==(const Vec3i&, const Vec3i&) = default;
  Vec3i operator+(const Vec3i& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3i operator-(const Vec3i& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3i operator>>(int s) const { return {x >> s, y >> s, z >> s}; }
  Vec3i operator<<(int s) const { return {x << s, y << s, z << s}; }
};

struct Vec3d {
  double x = 0, y = 0, z = 0;

  friend bool operator==(const Vec3d&, const Vec3d&) = default;
  Vec3d operator+(const Vec3d& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3d operator-(const Vec3d& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3d operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3d operator/(double s) const { return {x / s, y / s, z / s}; }
  double dot(const Vec3d& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm2() const { return dot(*this); }
  double norm() const;
};

// Real-valued geometry, arbitrary units. Normals, when present, are unit
// length and parallel to `points`.
struct PointCloud {
  std::vector<Vec3d> points;
  std::vector<Vec3d> normals;

  bool has_normals() const { return !normals.empty(); }
  size_t size() const { return points.size(); }
  void validate() const;
};

// Deduplicated integer voxels at bit depth `depth`, Morton-sorted.
// The unit of compression.
struct VoxelCloud {
  int depth = 0;
  std::vector<Vec3i> coords;

  size_t size() const { return coords.size(); }
  void validate() const;
};

// Occupancy of 2^depth-ary cube subdivision. levels[l].coords are the
// occupied nodes at resolution l bits (levels[0] is the root at (0,0,0));
// levels[l].occupancy[i] is the 8-bit child mask of coords[i], bit
// (x<<2)|(y<<1)|z per child. Expanding levels[depth-1] yields the leaf
// voxels.
struct OctreeLevel {
  std::vector<Vec3i> coords;
  std::vector<uint8_t> occupancy;
};

struct OctreeLevels {
  int depth = 0;
  std::vector<OctreeLevel> levels;
};

// Bits of x, y, z interleaved, x most significant:
// per-level child index = (x_bit<<2) | (y_bit<<1) | z_bit.
uint64_t morton_code(const Vec3i& c, int depth);
Vec3i morton_decode(uint64_t code, int depth);

// Child slot of a node within its parent octant.
inline int child_index(const Vec3i& c) {
  return ((c.x & 1) << 2) | ((c.y & 1) << 1) | (c.z & 1);
}
inline Vec3i child_coord(const Vec3i& parent, int idx) {
  return {(parent.x << 1) | ((idx >> 2) & 1), (parent.y << 1) | ((idx >> 1) & 1),
          (parent.z << 1) | (idx & 1)};
}

// Sorts by Morton code and removes duplicates, in place.
void morton_sort_unique(std::vector<Vec3i>& coords, int depth);

// round(p * scale) per component (half away from zero), clamped to
// [0, 2^depth - 1], duplicates merged. The traditional voxelization
// baseline and the global-scaling stage of the learned preprocessor.
VoxelCloud quantize(const PointCloud& pc, double scale, int depth);

// Inverse of quantize up to rounding: voxel centers mapped back to input
// units.
PointCloud dequantize(const VoxelCloud& vc, double scale);

OctreeLevels build_octree(const VoxelCloud& vc);
VoxelCloud flatten_octree(const OctreeLevels& levels);

// Occupied parents (coords >> 1) of a voxel set, Morton-sorted, with the
// 8-bit child mask of each parent.
void group_parents(const std::vector<Vec3i>& children, std::vector<Vec3i>& parents,
                   std::vector<uint8_t>& occupancy);

}  // namespace pcvox
