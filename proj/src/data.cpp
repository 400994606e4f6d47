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

#include "lfl/data.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <string>

#include "lfl/error.hpp"
#include "lfl/rng.hpp"

namespace lfl::data {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> in, std::size_t at) {
  return (std::uint32_t{in[at]} << 24) | (std::uint32_t{in[at + 1]} << 16) |
         (std::uint32_t{in[at + 2]} << 8) | std::uint32_t{in[at + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

template <typename T>
void shuffle_in_place(std::vector<T>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.uniform_index(i)]);
  }
}

// Cuts `items` into `parts` contiguous pieces whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> split_even(
    const std::vector<std::size_t>& items, std::size_t parts) {
  std::vector<std::vector<std::size_t>> out(parts);
  const std::size_t base = items.size() / parts;
  const std::size_t extra = items.size() % parts;
  std::size_t at = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out[p].assign(items.begin() + static_cast<std::ptrdiff_t>(at),
                  items.begin() + static_cast<std::ptrdiff_t>(at + len));
    at += len;
  }
  return out;
}

}  // namespace

void Dataset::push_back(std::span<const double> x, int label) {
  if (x.size() != num_features) {
    throw StructuralError("Dataset::push_back: feature count mismatch");
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_features = num_features;
  out.features.reserve(indices.size() * num_features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw StructuralError("Dataset::subset: index out of range");
    out.push_back(row(i), labels[i]);
  }
  return out;
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw DecodeError("truncated IDX magic", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw DecodeError("bad IDX magic", 0);
  if (bytes[2] != kIdxUnsignedByte) {
    throw DecodeError("unsupported IDX element type", 2);
  }
  const std::size_t rank = bytes[3];
  if (rank == 0) throw DecodeError("IDX rank must be >= 1", 3);
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw DecodeError("truncated IDX dimensions", bytes.size());

  IdxArray out;
  std::uint64_t count = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::uint32_t dim = read_be32(bytes, 4 + 4 * k);
    out.dims.push_back(dim);
    count *= dim;
    if (count > bytes.size()) throw DecodeError("truncated IDX payload", bytes.size());
  }
  const std::size_t expected = header + static_cast<std::size_t>(count);
  if (bytes.size() < expected) throw DecodeError("truncated IDX payload", bytes.size());
  if (bytes.size() > expected) throw DecodeError("trailing bytes after IDX payload", expected);
  out.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

IdxArray load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open IDX file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_idx(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& array) {
  if (array.dims.empty() || array.dims.size() > 255) {
    throw StructuralError("IDX rank must be in [1, 255]");
  }
  std::uint64_t count = 1;
  for (std::uint32_t dim : array.dims) count *= dim;
  if (count != array.values.size()) {
    throw StructuralError("IDX dims do not match value count");
  }
  std::vector<std::uint8_t> out{0, 0, kIdxUnsignedByte,
                                static_cast<std::uint8_t>(array.dims.size())};
  for (std::uint32_t dim : array.dims) write_be32(out, dim);
  out.insert(out.end(), array.values.begin(), array.values.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  const auto bytes = serialize_idx(array);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write IDX file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Dataset dataset_from_idx(const IdxArray& images, const IdxArray& labels,
                         std::size_t limit) {
  if (labels.dims.size() != 1) throw StructuralError("label file must be rank 1");
  if (images.dims.empty() || images.dims[0] != labels.dims[0]) {
    throw StructuralError("image and label counts differ");
  }
  std::size_t n = images.dims[0];
  if (limit > 0) n = std::min(n, limit);
  std::size_t features = 1;
  for (std::size_t k = 1; k < images.dims.size(); ++k) features *= images.dims[k];

  Dataset out;
  out.num_features = features;
  out.features.resize(n * features);
  for (std::size_t i = 0; i < n * features; ++i) {
    out.features[i] = static_cast<double>(images.values[i]) / 255.0;
  }
  out.labels.assign(labels.values.begin(),
                    labels.values.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Dataset load_mnist(const std::filesystem::path& images,
                   const std::filesystem::path& labels, std::size_t limit) {
  return dataset_from_idx(load_idx(images), load_idx(labels), limit);
}

Dataset with_bias_column(const Dataset& in) {
  Dataset out;
  out.num_features = in.num_features + 1;
  out.features.reserve(in.size() * out.num_features);
  out.labels = in.labels;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto r = in.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.features.push_back(1.0);
  }
  return out;
}

std::vector<std::vector<std::size_t>> partition(std::span<const int> labels,
                                                std::size_t num_devices,
                                                PartitionMode mode,
                                                std::uint64_t seed) {
  if (num_devices == 0) throw StructuralError("partition: M must be >= 1");
  RngStream rng(seed, 0x7061727469ULL);

  if (mode == PartitionMode::kIid) {
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_in_place(order, rng);
    return split_even(order, num_devices);
  }

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  const std::size_t num_labels = by_label.size();
  if (num_labels == 0 || num_devices % num_labels != 0) {
    throw StructuralError("non-iid partition needs M divisible by the number of "
                          "labels (" + std::to_string(num_labels) + "), got M = " +
                          std::to_string(num_devices));
  }
  const std::size_t per_label = num_devices / num_labels;

  std::vector<std::vector<std::size_t>> subsets;
  subsets.reserve(num_devices);
  for (auto& [label, members] : by_label) {
    shuffle_in_place(members, rng);
    for (auto& piece : split_even(members, per_label)) subsets.push_back(std::move(piece));
  }
  std::vector<std::size_t> device_of(subsets.size());
  std::iota(device_of.begin(), device_of.end(), std::size_t{0});
  shuffle_in_place(device_of, rng);

  std::vector<std::vector<std::size_t>> shards(num_devices);
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    shards[device_of[s]] = std::move(subsets[s]);
  }
  return shards;
}

}  // namespace lfl::data
