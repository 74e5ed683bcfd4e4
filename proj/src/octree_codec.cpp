#include "pcvox/octree_codec.hpp"

#include <algorithm>

namespace pcvox {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

bool level_contains(const std::vector<Vec3i>& coords, int level_bits, const Vec3i& pos) {
  const int32_t lim = 1 << level_bits;
  if (pos.x < 0 || pos.y < 0 || pos.z < 0 || pos.x >= lim || pos.y >= lim || pos.z >= lim)
    return false;
  uint64_t code = morton_code(pos, level_bits);
  auto it = std::lower_bound(coords.begin(), coords.end(), code, [&](const Vec3i& c, uint64_t v) {
    return morton_code(c, level_bits) < v;
  });
  return it != coords.end() && morton_code(*it, level_bits) == code;
}

}  // namespace

uint32_t context_index(const NeighbourPattern& pat) {
  uint64_t key = uint64_t(pat.parent6) | (uint64_t(pat.sibling_mask) << 6) |
                 (uint64_t(pat.child_idx) << 14);
  return uint32_t(splitmix64(key) >> (64 - kContextTableBits));
}

uint8_t face_neighbour_mask(const std::vector<Vec3i>& level_coords, int level_bits,
                            const Vec3i& pos) {
  if (level_bits < 1) return 0;
  static constexpr Vec3i kOffsets[6] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                        {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  uint8_t mask = 0;
  for (int i = 0; i < 6; ++i)
    if (level_contains(level_coords, level_bits, pos + kOffsets[i])) mask |= uint8_t(1u << i);
  return mask;
}

NeighbourPattern compute_neighbour_pattern(const std::vector<Vec3i>& level_coords, int level_bits,
                                           const Vec3i& parent_pos, int child_idx,
                                           uint8_t coded_siblings) {
  NeighbourPattern pat;
  pat.parent6 = face_neighbour_mask(level_coords, level_bits, parent_pos);
  pat.sibling_mask = uint8_t(coded_siblings & ((1u << child_idx) - 1));
  pat.child_idx = uint8_t(child_idx);
  return pat;
}

namespace {

// Shared coding walk so encoder and decoder stay in lockstep by
// construction. On the decode side `tree` is rebuilt level by level.
template <bool Encoding>
void code_octree(int depth, const OctreeLevels* enc_tree, OctreeLevels* dec_tree, RangeEncoder* enc,
                 RangeDecoder* dec, OctreeCodingStats* stats) {
  ContextTable ctx;
  AdaptiveBinModel root_model;

  std::vector<Vec3i> parents = {{0, 0, 0}};
  for (int l = 0; l < depth; ++l) {
    std::vector<uint8_t> bytes(parents.size(), 0);
    for (size_t j = 0; j < parents.size(); ++j) {
      uint8_t occ = Encoding ? enc_tree->levels[l].occupancy[j] : 0;
      uint8_t decoded = 0;
      for (int i = 0; i < 8; ++i) {
        NeighbourPattern pat{0, 0, uint8_t(i)};
        AdaptiveBinModel* model = &root_model;
        if (l > 0) {
          pat = compute_neighbour_pattern(parents, l, parents[j], i, decoded);
          model = &ctx.models[context_index(pat)];
        }
        double p_before = double(model->p1()) / 65536.0;
        int bit;
        if constexpr (Encoding) {
          bit = (occ >> i) & 1;
          enc->encode_bit(*model, bit);
        } else {
          bit = dec->decode_bit(*model);
        }
        if (stats) {
          if (stats->trace_patterns) stats->pattern_trace.push_back(pat);
          stats->ideal_bits += estimate_bits(p_before, bit);
          ++stats->symbol_count;
        }
        if (bit) decoded |= uint8_t(1u << i);
      }
      if (!Encoding && decoded == 0)
        throw IntegrityError("octree decode produced an empty occupancy byte");
      bytes[j] = decoded;
    }
    if (!Encoding) {
      dec_tree->levels[l].coords = parents;
      dec_tree->levels[l].occupancy = bytes;
    }
    std::vector<Vec3i> children;
    children.reserve(parents.size() * 2);
    for (size_t j = 0; j < parents.size(); ++j)
      for (int i = 0; i < 8; ++i)
        if (bytes[j] & (1u << i)) children.push_back(child_coord(parents[j], i));
    parents = std::move(children);
  }
}

}  // namespace

Bitstream octree_encode(const VoxelCloud& vc, float scale, OctreeCodingStats* stats) {
  OctreeLevels tree = build_octree(vc);
  RangeEncoder enc;
  code_octree<true>(vc.depth, &tree, nullptr, &enc, nullptr, stats);
  Bitstream bs;
  bs.header.codec_id = kCodecOctree;
  bs.header.depth = uint8_t(vc.depth);
  bs.header.scale = scale;
  bs.header.point_count = vc.coords.size();
  bs.payload = enc.finish();
  return bs;
}

VoxelCloud octree_decode(const Bitstream& bs, OctreeCodingStats* stats) {
  if (bs.header.codec_id != kCodecOctree)
    throw IntegrityError("octree_decode: wrong codec id");
  if (bs.header.depth < 1 || bs.header.depth > 16)
    throw IntegrityError("octree_decode: invalid depth");
  RangeDecoder dec(bs.payload);
  OctreeLevels tree;
  tree.depth = bs.header.depth;
  tree.levels.resize(tree.depth);
  code_octree<false>(tree.depth, nullptr, &tree, nullptr, &dec, stats);
  VoxelCloud vc = flatten_octree(tree);
  if (vc.coords.size() != bs.header.point_count)
    throw IntegrityError("octree_decode: decoded point count does not match header");
  return vc;
}

std::vector<uint8_t> contextfree_encode_payload(const VoxelCloud& vc) {
  OctreeLevels tree = build_octree(vc);
  RangeEncoder enc;
  AdaptiveBinModel model;
  for (const OctreeLevel& level : tree.levels)
    for (uint8_t occ : level.occupancy)
      for (int i = 0; i < 8; ++i) enc.encode_bit(model, (occ >> i) & 1);
  return enc.finish();
}

VoxelCloud contextfree_decode_payload(const std::vector<uint8_t>& payload, int depth,
                                      uint64_t point_count) {
  RangeDecoder dec(payload);
  AdaptiveBinModel model;
  std::vector<Vec3i> parents = {{0, 0, 0}};
  for (int l = 0; l < depth; ++l) {
    std::vector<Vec3i> children;
    for (const Vec3i& p : parents) {
      uint8_t occ = 0;
      for (int i = 0; i < 8; ++i)
        if (dec.decode_bit(model)) occ |= uint8_t(1u << i);
      if (occ == 0) throw IntegrityError("context-free decode produced an empty occupancy byte");
      for (int i = 0; i < 8; ++i)
        if (occ & (1u << i)) children.push_back(child_coord(p, i));
    }
    parents = std::move(children);
  }
  VoxelCloud vc;
  vc.depth = depth;
  vc.coords = std::move(parents);
  if (vc.coords.size() != point_count)
    throw IntegrityError("context-free decode point count mismatch");
  return vc;
}

}  // namespace pcvox
