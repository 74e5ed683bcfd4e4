#include "pcvox/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pcvox::nn {

namespace {
constexpr uint32_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;
  void need(size_t n) const {
    if (pos + n > b.size()) throw IntegrityError("checkpoint truncated");
  }
  uint8_t u8() {
    need(1);
    return b[pos++];
  }
  uint16_t u16() {
    uint16_t v = u8();
    return uint16_t(v | (uint16_t(u8()) << 8));
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

void Checkpoint::set(const std::string& name, const Matrix& m) {
  for (auto& [n, t] : tensors)
    if (n == name) {
      t = m;
      return;
    }
  tensors.push_back({name, m});
}

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const Matrix& Checkpoint::require(const std::string& name, Eigen::Index rows,
                                  Eigen::Index cols) const {
  const Matrix* m = find(name);
  if (!m) throw IntegrityError("checkpoint missing tensor: " + name);
  if (m->rows() != rows || m->cols() != cols)
    throw IntegrityError("checkpoint tensor shape mismatch: " + name);
  return *m;
}

std::vector<uint8_t> Checkpoint::serialize() const {
  std::vector<uint8_t> out;
  for (char c : {'P', 'V', 'N', 'N'}) out.push_back(uint8_t(c));
  put_u32(out, kVersion);
  put_u32(out, uint32_t(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u16(out, uint16_t(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, uint32_t(m.rows()));
    put_u32(out, uint32_t(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, float(m(r, c)));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (r.u8() != 'P' || r.u8() != 'V' || r.u8() != 'N' || r.u8() != 'N')
    throw IntegrityError("bad checkpoint magic");
  uint32_t version = r.u32();
  if (version != kVersion) throw IntegrityError("unsupported checkpoint version");
  uint32_t count = r.u32();
  Checkpoint cp;
  cp.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = r.u16();
    r.need(len);
    std::string name(bytes.begin() + r.pos, bytes.begin() + r.pos + len);
    r.pos += len;
    uint32_t rows = r.u32(), cols = r.u32();
    Matrix m(rows, cols);
    for (uint32_t rr = 0; rr < rows; ++rr)
      for (uint32_t cc = 0; cc < cols; ++cc) m(rr, cc) = double(r.f32());
    cp.tensors.push_back({std::move(name), std::move(m)});
  }
  return cp;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  std::vector<uint8_t> bytes = serialize();
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

uint64_t fnv1a64(const uint8_t* data, size_t size) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

uint64_t Checkpoint::hash() const {
  std::vector<uint8_t> bytes = serialize();
  return fnv1a64(bytes.data(), bytes.size());
}

Checkpoint Checkpoint::from_registry(const ParamRegistry& reg) {
  Checkpoint cp;
  for (const auto& [name, node] : reg.params) cp.tensors.push_back({name, node->value});
  for (const auto& [name, node] : reg.buffers) cp.tensors.push_back({name, node->value});
  return cp;
}

void Checkpoint::into_registry(ParamRegistry& reg) const {
  for (auto& [name, node] : reg.params)
    node->value = require(name, node->value.rows(), node->value.cols());
  for (auto& [name, node] : reg.buffers)
    node->value = require(name, node->value.rows(), node->value.cols());
}

}  // namespace pcvox::nn
