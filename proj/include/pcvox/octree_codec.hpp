#pragma once

#include <array>
#include <memory>
#include <vector>

#include "pcvox/bitstream.hpp"
#include "pcvox/geometry.hpp"
#include "pcvox/rangecoder.hpp"

namespace pcvox {

// Causal context for one occupancy bit: the 6 face-adjacent neighbours of
// the parent node (among occupied nodes of the same level) and the already
// coded sibling bits below child_idx.
struct NeighbourPattern {
  uint8_t parent6 = 0;
  uint8_t sibling_mask = 0;
  uint8_t child_idx = 0;

  friend bool operator==(const NeighbourPattern&, const NeighbourPattern&) = default;
};

inline constexpr int kContextTableBits = 14;
inline constexpr size_t kContextTableSize = size_t(1) << kContextTableBits;

// Fixed-size pool of adaptive models; many neighbour configurations map
// onto it through context_index. Size is constant regardless of input.
struct ContextTable {
  std::vector<AdaptiveBinModel> models;
  ContextTable() : models(kContextTableSize) {}
};

// Deterministic hash of the pattern folded into the table, stable across
// runs and platforms.
uint32_t context_index(const NeighbourPattern& pat);

// Occupancy mask of the 6 face-adjacent neighbours of pos among the
// Morton-sorted occupied coords of a level at resolution level_bits.
// Bit order: -x,+x,-y,+y,-z,+z.
uint8_t face_neighbour_mask(const std::vector<Vec3i>& level_coords, int level_bits,
                            const Vec3i& pos);

NeighbourPattern compute_neighbour_pattern(const std::vector<Vec3i>& level_coords, int level_bits,
                                           const Vec3i& parent_pos, int child_idx,
                                           uint8_t coded_siblings);

struct OctreeCodingStats {
  double ideal_bits = 0;  // sum of estimate_bits at the pre-update model probabilities
  uint64_t symbol_count = 0;
  std::vector<NeighbourPattern> pattern_trace;  // filled only when trace_patterns
  bool trace_patterns = false;
};

// Lossless octree geometry codec: occupancy bits coded root to leaf,
// parents in Morton order, children b_0..b_7, each bit under the adaptive
// model selected by its neighbour pattern. The root byte uses a dedicated
// uniform-initialized model.
Bitstream octree_encode(const VoxelCloud& vc, float scale = 1.0f,
                        OctreeCodingStats* stats = nullptr);
VoxelCloud octree_decode(const Bitstream& bs, OctreeCodingStats* stats = nullptr);

// Comparison baseline: one shared adaptive model for every occupancy bit,
// no contextual information.
std::vector<uint8_t> contextfree_encode_payload(const VoxelCloud& vc);
VoxelCloud contextfree_decode_payload(const std::vector<uint8_t>& payload, int depth,
                                      uint64_t point_count);

inline double bits_per_point(const Bitstream& bs, size_t input_points) {
  return double(bs.payload_bits()) / double(input_points);
}

}  // namespace pcvox
