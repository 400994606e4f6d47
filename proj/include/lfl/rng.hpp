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

#include <cstdint>

namespace lfl {

// Counter-based random stream built on the SplitMix64 finalizer.
//
// Draw k of a stream is a pure function of (key, k), so a block of draws can
// be reserved with skip() and consumed out of order by parallel loops while
// producing exactly the values a serial loop would.
class RngStream {
 public:
  RngStream() = default;

  // Independent stream `stream_id` derived from a run seed.
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix(mix(seed) ^ mix(stream_id + 0x632be59bd9b4e019ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits_at(std::uint64_t counter) const noexcept {
    return mix(key_ + (counter + 1) * kGolden);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform_at(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits_at(counter) >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_bits() noexcept { return bits_at(counter_++); }
  double uniform() noexcept { return uniform_at(counter_++); }

  // Uniform integer in [0, n) via Lemire's multiply-shift; n > 0.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next_bits()) * n) >> 64);
  }

  // Reserve `count` consecutive draws and return the first counter.
  std::uint64_t skip(std::uint64_t count) noexcept {
    const std::uint64_t base = counter_;
    counter_ += count;
    return base;
  }

  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace lfl
