// Copyright 2026 The LFL Simulator Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "lfl/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "lfl/kernels.hpp"

namespace lfl::quant {

namespace {

constexpr double kScalarTolerance = 1e-12;

std::size_t bytes_for_bits(std::uint64_t bits) noexcept {
  return static_cast<std::size_t>((bits + 7) / 8);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{in[at + b]} << (8 * b);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= std::uint64_t{in[at + b]} << (8 * b);
  return v;
}

// LSB-first bit appender.
class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint64_t value, std::uint32_t width) {
    for (std::uint32_t b = 0; b < width; ++b) {
      if (used_ == 0) out_.push_back(0);
      if ((value >> b) & 1U) out_.back() |= static_cast<std::uint8_t>(1U << used_);
      used_ = (used_ + 1) % 8;
    }
  }

  void align() { used_ = 0; }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint32_t used_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> in, std::size_t start)
      : in_(in), byte_(start) {}

  std::uint64_t get(std::uint32_t width) {
    std::uint64_t value = 0;
    for (std::uint32_t b = 0; b < width; ++b) {
      if ((in_[byte_] >> bit_) & 1U) value |= std::uint64_t{1} << b;
      if (++bit_ == 8) {
        bit_ = 0;
        ++byte_;
      }
    }
    return value;
  }

  // Skips to the next byte boundary; padding must be zero.
  void align(const char* section) {
    if (bit_ == 0) return;
    if ((in_[byte_] >> bit_) != 0) {
      throw DecodeError(std::string("nonzero padding after ") + section, byte_);
    }
    bit_ = 0;
    ++byte_;
  }

  std::size_t byte() const noexcept { return byte_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t byte_;
  std::uint32_t bit_ = 0;
};

}  // namespace

double quantize_scalar(double x, QuantLevel q, RngStream& rng) {
  if (!(x >= -kScalarTolerance && x <= 1.0 + kScalarTolerance)) {
    throw DomainError("quantize_scalar: x = " + std::to_string(x) +
                      " outside [0, 1]");
  }
  x = std::clamp(x, 0.0, 1.0);
  const std::uint32_t level = level_for(x, q.value(), rng.uniform());
  return static_cast<double>(level) / static_cast<double>(q.value());
}

void quantize_into(std::span<const double> x, QuantLevel q, RngStream& rng,
                   QuantizedMessage& out, ExecutionPolicy policy) {
  if (x.empty()) throw StructuralError("quantize: empty vector");
  if (!all_finite(x)) throw DomainError("quantize: non-finite entry");
  const std::uint64_t base = rng.skip(x.size());
  if (policy == ExecutionPolicy::kParallel) {
    kernels::omp::quantize(x, q.value(), rng, base, out);
  } else {
    kernels::serial::quantize(x, q.value(), rng, base, out);
  }
}

QuantizedMessage quantize_vector(std::span<const double> x, QuantLevel q,
                                 RngStream& rng, ExecutionPolicy policy) {
  QuantizedMessage msg;
  quantize_into(x, q, rng, msg, policy);
  return msg;
}

void validate(const QuantizedMessage& msg) {
  if (msg.levels.empty()) throw StructuralError("message has d = 0");
  if (msg.signs.size() != msg.levels.size()) {
    throw StructuralError("sign and level arrays differ in length");
  }
  if (!(std::isfinite(msg.x_max) && std::isfinite(msg.x_min)) ||
      !(msg.x_max >= msg.x_min && msg.x_min >= 0.0)) {
    throw StructuralError("header violates x_max >= x_min >= 0");
  }
  const std::uint32_t q = msg.q.value();
  for (std::size_t i = 0; i < msg.levels.size(); ++i) {
    if (msg.levels[i] > q) {
      throw StructuralError("level " + std::to_string(msg.levels[i]) +
                            " exceeds q = " + std::to_string(q) + " at entry " +
                            std::to_string(i));
    }
    if (msg.signs[i] != 1 && msg.signs[i] != -1) {
      throw StructuralError("sign must be +1 or -1 at entry " + std::to_string(i));
    }
  }
}

double reconstruct_entry(const QuantizedMessage& msg, std::size_t i) noexcept {
  const std::uint32_t q = msg.q.value();
  const std::uint32_t level = msg.levels[i];
  double magnitude;
  if (level == q) {
    magnitude = msg.x_max;
  } else {
    const double fraction = static_cast<double>(level) / static_cast<double>(q);
    magnitude = std::min(msg.x_max, msg.x_min + (msg.x_max - msg.x_min) * fraction);
  }
  return msg.signs[i] < 0 ? -magnitude : magnitude;
}

void reconstruct_into(const QuantizedMessage& msg, std::span<double> out) {
  validate(msg);
  if (out.size() != msg.dim()) {
    throw StructuralError("reconstruct: output length mismatch");
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = reconstruct_entry(msg, i);
}

ModelVector reconstruct(const QuantizedMessage& msg) {
  ModelVector out(msg.dim());
  reconstruct_into(msg, out);
  return out;
}

std::uint32_t bits_per_level(QuantLevel q) noexcept {
  return static_cast<std::uint32_t>(std::bit_width(q.value()));
}

BitCost bit_cost(std::size_t d, QuantLevel q) {
  if (d == 0) throw StructuralError("bit_cost: d must be >= 1");
  const double dd = static_cast<double>(d);
  BitCost cost;
  cost.formula_bits =
      64.0 + dd * (1.0 + std::log2(static_cast<double>(q.value()) + 1.0));
  cost.packed_bits = payload_bits(d, q);
  return cost;
}

double savings_ratio(QuantLevel q1, std::size_t d) {
  return kLosslessBitsPerEntry * static_cast<double>(d) / bit_cost(d, q1).formula_bits;
}

double savings_ratio_asymptotic(QuantLevel q1) {
  return kLosslessBitsPerEntry /
         (1.0 + std::log2(static_cast<double>(q1.value()) + 1.0));
}

std::uint64_t payload_bits(std::size_t d, QuantLevel q) noexcept {
  const std::uint64_t dd = d;
  return 64 + dd + dd * bits_per_level(q);
}

std::size_t encoded_size(std::size_t d, QuantLevel q) noexcept {
  const std::uint64_t dd = d;
  return kCodecFramingBytes + bytes_for_bits(dd) +
         bytes_for_bits(dd * bits_per_level(q));
}

std::vector<std::uint8_t> encode(const QuantizedMessage& msg) {
  validate(msg);
  const auto x_max = static_cast<float>(msg.x_max);
  const auto x_min = static_cast<float>(msg.x_min);
  if (!std::isfinite(x_max)) {
    throw DomainError("encode: x_max overflows the binary32 header");
  }
  const std::size_t d = msg.dim();
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(d, msg.q));
  out.push_back(kCodecMagic);
  out.push_back(kCodecVersion);
  put_u64(out, d);
  put_u32(out, msg.q.value());
  put_u32(out, std::bit_cast<std::uint32_t>(x_max));
  put_u32(out, std::bit_cast<std::uint32_t>(x_min));

  BitWriter writer(out);
  for (std::int8_t s : msg.signs) writer.put(s < 0 ? 1 : 0, 1);
  writer.align();
  const std::uint32_t width = bits_per_level(msg.q);
  for (std::uint32_t level : msg.levels) writer.put(level, width);
  return out;
}

QuantizedMessage decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCodecFramingBytes) {
    throw DecodeError("truncated header", bytes.size());
  }
  if (bytes[0] != kCodecMagic) throw DecodeError("bad magic byte", 0);
  if (bytes[1] != kCodecVersion) throw DecodeError("unsupported version", 1);
  const std::uint64_t d = get_u64(bytes, 2);
  if (d == 0) throw DecodeError("dimension d = 0", 2);
  const std::uint32_t q = get_u32(bytes, 10);
  if (q == 0) throw DecodeError("quantization level q = 0", 10);
  const float x_max = std::bit_cast<float>(get_u32(bytes, 14));
  const float x_min = std::bit_cast<float>(get_u32(bytes, 18));
  if (!(std::isfinite(x_max) && std::isfinite(x_min)) ||
      !(x_max >= x_min && x_min >= 0.0F)) {
    throw DecodeError("header violates x_max >= x_min >= 0", 14);
  }

  const QuantLevel level(q);
  const std::uint32_t width = bits_per_level(level);
  const std::size_t body = bytes.size() - kCodecFramingBytes;
  // Guard the size arithmetic before trusting d.
  if (d > std::uint64_t{body} * 8) {
    throw DecodeError("truncated sign bitmap", bytes.size());
  }
  const std::size_t expected = encoded_size(static_cast<std::size_t>(d), level);
  if (bytes.size() < expected) throw DecodeError("truncated payload", bytes.size());
  if (bytes.size() > expected) throw DecodeError("trailing bytes", expected);

  QuantizedMessage msg;
  msg.x_max = x_max;
  msg.x_min = x_min;
  msg.q = level;
  msg.signs.resize(d);
  msg.levels.resize(d);
  BitReader reader(bytes, kCodecFramingBytes);
  for (auto& s : msg.signs) s = reader.get(1) ? std::int8_t{-1} : std::int8_t{1};
  reader.align("sign bitmap");
  for (auto& l : msg.levels) {
    const std::size_t at = reader.byte();
    const std::uint64_t value = reader.get(width);
    if (value > q) {
      throw DecodeError("level " + std::to_string(value) + " exceeds q", at);
    }
    l = static_cast<std::uint32_t>(value);
  }
  reader.align("level array");
  return msg;
}

}  // namespace lfl::quant
