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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lfl/rng.hpp"
#include "lfl/types.hpp"

namespace lfl::quant {

// Output of the stochastic quantizer Q(x, q).
//
// Entry i reconstructs to signs[i] * (x_min + (x_max - x_min) * levels[i] / q),
// where level q maps to x_max exactly so every magnitude stays inside
// [x_min, x_max].
struct QuantizedMessage {
  double x_max = 0.0;
  double x_min = 0.0;
  QuantLevel q{1};
  std::vector<std::int8_t> signs;
  std::vector<std::uint32_t> levels;

  std::size_t dim() const noexcept { return levels.size(); }

  friend bool operator==(const QuantizedMessage&,
                         const QuantizedMessage&) = default;
};

struct BitCost {
  double formula_bits = 0.0;        // 64 + d (1 + log2(q + 1))
  std::uint64_t packed_bits = 0;    // 64 + d + d * ceil(log2(q + 1))
};

// Bits per lossless model entry used by uncompressed links.
inline constexpr double kLosslessBitsPerEntry = 33.0;

// Level index for one normalized value x in [0, 1] given a uniform draw u.
// x == 1 resolves to level q with probability one.
inline std::uint32_t level_for(double x, std::uint32_t q, double u) noexcept {
  const double scaled = x * static_cast<double>(q);
  double lower = std::floor(scaled);
  if (lower >= static_cast<double>(q)) lower = static_cast<double>(q) - 1.0;
  const double upper_prob = scaled - lower;
  const auto l = static_cast<std::uint32_t>(lower);
  return u < upper_prob ? l + 1 : l;
}

// φ(x, q): stochastic rounding of x in [0, 1] onto the grid {l / q}.
// Inputs within 1e-12 of the interval are clamped; anything further is a
// DomainError.
double quantize_scalar(double x, QuantLevel q, RngStream& rng);

// Q(x, q). Consumes exactly x.size() draws from rng regardless of policy.
QuantizedMessage quantize_vector(std::span<const double> x, QuantLevel q,
                                 RngStream& rng,
                                 ExecutionPolicy policy = ExecutionPolicy::kSerial);

// Same as quantize_vector, reusing the storage of `out`.
void quantize_into(std::span<const double> x, QuantLevel q, RngStream& rng,
                   QuantizedMessage& out,
                   ExecutionPolicy policy = ExecutionPolicy::kSerial);

// Throws StructuralError when header or levels violate the message invariants.
void validate(const QuantizedMessage& msg);

double reconstruct_entry(const QuantizedMessage& msg, std::size_t i) noexcept;
ModelVector reconstruct(const QuantizedMessage& msg);
void reconstruct_into(const QuantizedMessage& msg, std::span<double> out);

// ceil(log2(q + 1)).
std::uint32_t bits_per_level(QuantLevel q) noexcept;

BitCost bit_cost(std::size_t d, QuantLevel q);

// Downlink bits of lossless broadcast over LFL: 33 d / R_Q.
double savings_ratio(QuantLevel q1, std::size_t d);
// d -> infinity form: 33 / (1 + log2(q1 + 1)).
double savings_ratio_asymptotic(QuantLevel q1);

// Packed wire codec.
//
//   byte 0        magic 0xA7
//   byte 1        version 1
//   bytes 2..9    d, uint64 little-endian
//   bytes 10..13  q, uint32 little-endian
//   bytes 14..17  x_max, IEEE-754 binary32 little-endian
//   bytes 18..21  x_min, IEEE-754 binary32 little-endian
//   sign bitmap   d bits, bit set = negative, LSB-first, zero-padded to a byte
//   level array   ceil(log2(q+1)) bits per entry, LSB-first, zero-padded
//
// The header fields x_max/x_min are narrowed to binary32, so decode(encode(m))
// reproduces m bit-exactly whenever both header values are representable in
// binary32 (in particular for any message that came out of decode).
inline constexpr std::uint8_t kCodecMagic = 0xA7;
inline constexpr std::uint8_t kCodecVersion = 1;
inline constexpr std::size_t kCodecFramingBytes = 22;

std::vector<std::uint8_t> encode(const QuantizedMessage& msg);
QuantizedMessage decode(std::span<const std::uint8_t> bytes);

// Bits of sign bitmap and level array plus the two 32-bit header values,
// i.e. what BitCost::packed_bits counts, for a message produced by encode.
std::uint64_t payload_bits(std::size_t d, QuantLevel q) noexcept;
std::size_t encoded_size(std::size_t d, QuantLevel q) noexcept;

}  // namespace lfl::quant
