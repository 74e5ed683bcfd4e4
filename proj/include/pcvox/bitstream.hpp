#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcvox/errors.hpp"

namespace pcvox {

inline constexpr uint8_t kCodecOctree = 0;
inline constexpr uint8_t kCodecSurrogate = 1;

// On-disk layout, all integers little-endian:
//   magic "PVX1" (4) | codec id (1) | depth (1) | scale (f32) |
//   leaf point count (u64) | payload length (u32) |
//   [codec 1 only: checkpoint hash (u64), coarse-level count (1)] |
//   payload bytes
struct BitstreamHeader {
  uint8_t codec_id = kCodecOctree;
  uint8_t depth = 0;
  float scale = 1.0f;
  uint64_t point_count = 0;
  uint64_t checkpoint_hash = 0;  // codec id 1 extension
  uint8_t coarse_levels = 0;     // codec id 1 extension
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<uint8_t> payload;

  std::vector<uint8_t> serialize() const;
  static Bitstream deserialize(const std::vector<uint8_t>& bytes);

  void save(const std::string& path) const;
  static Bitstream load(const std::string& path);

  size_t payload_bits() const { return payload.size() * 8; }
};

}  // namespace pcvox
