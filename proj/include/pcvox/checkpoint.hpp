#pragma once

#include <string>
#include <vector>

#include "pcvox/autodiff.hpp"
#include "pcvox/layers.hpp"

namespace pcvox::nn {

// "PVNN" container: named 2-D tensors stored as float32 little-endian.
// Layout: magic (4) | version u32 | tensor count u32 | per tensor:
// name length u16, name bytes, rows u32, cols u32, rows*cols float32.
struct Checkpoint {
  std::vector<std::pair<std::string, Matrix>> tensors;

  void set(const std::string& name, const Matrix& m);
  const Matrix* find(const std::string& name) const;
  // Missing names or mismatched shapes raise IntegrityError.
  const Matrix& require(const std::string& name, Eigen::Index rows, Eigen::Index cols) const;

  std::vector<uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<uint8_t>& bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // FNV-1a over the serialized bytes; embedded in surrogate bitstreams to
  // fail fast on encoder/decoder model mismatch.
  uint64_t hash() const;

  // Registry round trip. Values pass through float32 on save, so a
  // saved-then-loaded model is bit-stable under repeated round trips.
  static Checkpoint from_registry(const ParamRegistry& reg);
  void into_registry(ParamRegistry& reg) const;
};

uint64_t fnv1a64(const uint8_t* data, size_t size);

}  // namespace pcvox::nn
