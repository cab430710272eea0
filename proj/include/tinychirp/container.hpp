// Copyright 2026 The tinychirp Authors
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
#pragma once

// "TCHW" weight container, little-endian:
//   magic "TCHW" | u32 version | u32 header_len | UTF-8 JSON header
//   | zero padding to 8 bytes | payload (each blob 8-byte aligned) | u32 CRC32(payload)
// The JSON header lists the graph's layers and, per tensor, its layer index,
// name, shape, dtype ("f32" or "i8"), payload offset and byte length, plus
// scale/zero_point for i8 tensors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tinychirp/nn.hpp"

namespace tinychirp::nn {

enum class DType { F32, I8 };

inline constexpr std::uint32_t kContainerVersion = 1;

struct QuantTag {
    float scale = 1.0f;
    int zero_point = 0;
};

struct StoredTensor {
    std::size_t layer = 0;
    std::string name;
    Shape shape;
    DType dtype = DType::F32;
    std::vector<std::uint8_t> bytes;
    std::optional<QuantTag> quant;
};

struct Container {
    std::string model;
    std::vector<StoredTensor> tensors;
    // Extra JSON object stored under "metadata" (e.g. activation parameters).
    std::string metadata_json = "{}";
    // Layer descriptors as read from a file; write_container derives them
    // from the graph instead.
    std::string layers_json;
};

/// Throws Error{IoFailure}.
void write_container(const std::filesystem::path& path, const ModelGraph& model, const Container& container);

/// Throws Error{MagicMismatch}, Error{VersionUnsupported}, Error{MalformedHeader},
/// Error{TruncatedData} or Error{ChecksumFailure}.
Container read_container(const std::filesystem::path& path);

/// Model name stored in a container header, without validating the payload.
std::string peek_model_name(const std::filesystem::path& path);

/// Verifies that the container's layer list and tensor shapes match the
/// graph. Throws Error{ShapeMismatch} or Error{MissingWeights}.
void check_container(const ModelGraph& model, const Container& container);

void save_weights(const ModelGraph& model, const WeightSet& weights, const std::filesystem::path& path);
WeightSet load_weights(const ModelGraph& model, const std::filesystem::path& path);

/// Serialised payload size of a container, excluding header and checksum.
std::size_t payload_bytes(const Container& container);

}  // namespace tinychirp::nn
