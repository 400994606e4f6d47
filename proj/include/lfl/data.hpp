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
#include <filesystem>
#include <span>
#include <vector>

namespace lfl::data {

// Row-major sample matrix with integer class labels.
struct Dataset {
  std::size_t num_features = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {features.data() + i * num_features, num_features};
  }
  void push_back(std::span<const double> x, int label);
  // Rows listed in `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Unsigned-byte IDX tensor (magic 0x00000801 labels, 0x00000803 images).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> values;
};

inline constexpr std::uint8_t kIdxUnsignedByte = 0x08;

// Throws DecodeError carrying the byte offset of the failure.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
IdxArray load_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_idx(const IdxArray& array);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

// Images become rows of pixels scaled to [0, 1]; first `limit` samples when
// limit > 0. Dimensions beyond the first are flattened.
Dataset dataset_from_idx(const IdxArray& images, const IdxArray& labels,
                         std::size_t limit = 0);
Dataset load_mnist(const std::filesystem::path& images,
                   const std::filesystem::path& labels, std::size_t limit = 0);

// Appends a constant 1 feature to every row.
Dataset with_bias_column(const Dataset& in);

enum class PartitionMode { kIid, kNonIidLabelSorted };

// Disjoint covering split of sample indices into M shards.
//
// kIid shuffles and cuts into M near-equal pieces. kNonIidLabelSorted splits
// each label's samples into M / K disjoint subsets (K distinct labels) and
// hands every subset to a different, randomly chosen device, so each device
// holds a single-label shard. That mode needs M divisible by K.
std::vector<std::vector<std::size_t>> partition(std::span<const int> labels,
                                                std::size_t num_devices,
                                                PartitionMode mode,
                                                std::uint64_t seed);

}  // namespace lfl::data
