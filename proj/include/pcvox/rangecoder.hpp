#pragma once

#include <cstdint>
#include <vector>

#include "pcvox/errors.hpp"

namespace pcvox {

// Binary probability state in 16-bit fixed point. p1 is the probability of
// bit 1 scaled by 65536 and stays within [1, 65535] under any update
// sequence (update after coding, identical on encoder and decoder).
class AdaptiveBinModel {
public:
  explicit AdaptiveBinModel(uint16_t p1 = 32768, int update_shift = 5)
      : p1_(p1), shift_(update_shift) {
    if (p1_ == 0) throw ContractViolation("AdaptiveBinModel: p1 must be in [1, 65535]");
  }

  uint16_t p1() const { return p1_; }

  void update(int bit) {
    if (bit)
      p1_ = uint16_t(p1_ + ((65536u - p1_) >> shift_));
    else
      p1_ = uint16_t(p1_ - (p1_ >> shift_));
  }

private:
  uint16_t p1_;
  int shift_;
};

// 32-bit binary range coder with 16-bit probability resolution. Carry
// propagation is resolved through a cache/pending-0xFF chain; the leading
// byte (always redundant to the decoder) is dropped, leaving exactly four
// bytes of flush overhead.
class RangeEncoder {
public:
  void encode_bit(uint16_t p1, int bit) {
    if (finished_) throw ContractViolation("RangeEncoder: already finished");
    if (p1 == 0) throw ContractViolation("RangeEncoder: p1 must be in [1, 65535]");
    uint32_t split = uint32_t((uint64_t(range_) * p1) >> 16);
    if (bit) {
      range_ = split;
    } else {
      low_ += split;
      range_ -= split;
    }
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  // Adaptive coding: model consulted before, updated after.
  void encode_bit(AdaptiveBinModel& model, int bit) {
    encode_bit(model.p1(), bit);
    model.update(bit);
  }

  std::vector<uint8_t> finish() {
    if (!finished_) {
      for (int i = 0; i < 5; ++i) shift_low();
      finished_ = true;
    }
    return std::move(out_);
  }

private:
  static constexpr uint32_t kTop = 1u << 24;

  void shift_low() {
    if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      uint8_t carry = uint8_t(low_ >> 32);
      if (lead_pending_)
        lead_pending_ = false;  // drop the redundant leading byte
      else
        out_.push_back(uint8_t(cache_ + carry));
      while (ff_count_ > 0) {
        out_.push_back(uint8_t(0xFF + carry));
        --ff_count_;
      }
      cache_ = uint8_t(low_ >> 24);
    } else {
      ++ff_count_;
    }
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  std::vector<uint8_t> out_;
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t ff_count_ = 0;
  bool lead_pending_ = true;
  bool finished_ = false;
};

class RangeDecoder {
public:
  RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }
  explicit RangeDecoder(const std::vector<uint8_t>& payload)
      : RangeDecoder(payload.data(), payload.size()) {}

  int decode_bit(uint16_t p1) {
    if (p1 == 0) throw ContractViolation("RangeDecoder: p1 must be in [1, 65535]");
    uint32_t split = uint32_t((uint64_t(range_) * p1) >> 16);
    int bit;
    if (code_ < split) {
      bit = 1;
      range_ = split;
    } else {
      bit = 0;
      code_ -= split;
      range_ -= split;
    }
    while (range_ < kTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return bit;
  }

  int decode_bit(AdaptiveBinModel& model) {
    int bit = decode_bit(model.p1());
    model.update(bit);
    return bit;
  }

  size_t consumed() const { return pos_; }

private:
  static constexpr uint32_t kTop = 1u << 24;

  uint32_t next_byte() {
    if (pos_ >= size_) throw TruncationError("range decoder read past end of payload");
    return data_[pos_++];
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Ideal code length of a bit under probability p of bit 1, in bits.
double estimate_bits(double p, int bit);

// Fixed-point probability crossing the encode/decode boundary; clamped to
// [1, 65535] so the coder contract always holds.
uint16_t quantize_probability(double p);

}  // namespace pcvox
