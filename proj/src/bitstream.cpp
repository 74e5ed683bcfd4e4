#include "pcvox/bitstream.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "pcvox/rangecoder.hpp"

namespace pcvox {

double estimate_bits(double p, int bit) {
  if (p <= 0.0 || p >= 1.0) throw ContractViolation("estimate_bits: p must be in (0,1)");
  return bit ? -std::log2(p) : -std::log2(1.0 - p);
}

uint16_t quantize_probability(double p) {
  long q = std::lround(p * 65536.0);
  if (q < 1) q = 1;
  if (q > 65535) q = 65535;
  return uint16_t(q);
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;
  uint8_t u8() {
    if (pos + 1 > b.size()) throw TruncationError("bitstream header truncated");
    return b[pos++];
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(u8()) << (8 * i);
    return v;
  }
};

}  // namespace

std::vector<uint8_t> Bitstream::serialize() const {
  std::vector<uint8_t> out;
  out.reserve(23 + payload.size());
  for (char c : {'P', 'V', 'X', '1'}) out.push_back(uint8_t(c));
  out.push_back(header.codec_id);
  out.push_back(header.depth);
  uint32_t scale_bits;
  static_assert(sizeof(scale_bits) == sizeof(header.scale));
  std::memcpy(&scale_bits, &header.scale, 4);
  put_u32(out, scale_bits);
  put_u64(out, header.point_count);
  put_u32(out, uint32_t(payload.size()));
  if (header.codec_id == kCodecSurrogate) {
    put_u64(out, header.checkpoint_hash);
    out.push_back(header.coarse_levels);
  }
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bitstream Bitstream::deserialize(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (r.u8() != 'P' || r.u8() != 'V' || r.u8() != 'X' || r.u8() != '1')
    throw IntegrityError("bad bitstream magic");
  Bitstream bs;
  bs.header.codec_id = r.u8();
  bs.header.depth = r.u8();
  uint32_t scale_bits = r.u32();
  std::memcpy(&bs.header.scale, &scale_bits, 4);
  bs.header.point_count = r.u64();
  uint32_t payload_len = r.u32();
  if (bs.header.codec_id == kCodecSurrogate) {
    bs.header.checkpoint_hash = r.u64();
    bs.header.coarse_levels = r.u8();
  }
  if (r.pos + payload_len > bytes.size()) throw TruncationError("bitstream payload truncated");
  bs.payload.assign(bytes.begin() + r.pos, bytes.begin() + r.pos + payload_len);
  return bs;
}

void Bitstream::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  std::vector<uint8_t> bytes = serialize();
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Bitstream Bitstream::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace pcvox
