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

// Point-by-point execution of a Conv1D stack that ends in global average
// pooling. Each layer keeps only the kernel-width window of its input, so
// memory is proportional to C x K rather than C x N.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tinychirp/nn.hpp"

namespace tinychirp::stream {

struct StreamStats {
    // Activation values held by all ring buffers, pooling reducers, per-layer
    // output points and the pooled accumulators. Constant for a given prefix.
    std::size_t peak_buffered_values = 0;
    std::size_t total_pushed = 0;
};

struct StreamResult {
    std::vector<double> y;  // per-channel mean of the last layer's output
    StreamStats stats;
};

class StreamState {
public:
    /// Streams layers [0, prefix_end) of model. The prefix may contain only
    /// Conv1D (stride 1, odd kernel, same padding), ReLU, MaxPool1D and
    /// Dropout. Throws Error{UnsupportedLayerInPrefix}.
    static StreamState init(const nn::ModelGraph& model, const nn::WeightSet& weights, std::size_t prefix_end);
    /// Streams every layer before the model's GlobalAvgPool.
    static StreamState init(const nn::ModelGraph& model, const nn::WeightSet& weights);

    StreamState(StreamState&&) noexcept;
    StreamState& operator=(StreamState&&) noexcept;
    ~StreamState();

    /// One input point (input_channels() values). Throws Error{StreamOverflow}
    /// once input_length() points have been pushed.
    void push(std::span<const float> point);
    void push(float x) { push(std::span<const float>(&x, 1)); }
    void push_all(std::span<const float> samples);

    /// Throws Error{IncompleteStream} before input_length() pushes.
    StreamResult finalize() const;

    std::size_t input_length() const noexcept;
    std::size_t input_channels() const noexcept;
    std::size_t pooled_length() const noexcept;  // N_L
    std::size_t output_channels() const noexcept;
    std::size_t buffered_values() const noexcept;

    /// Ring width (in points) held for each Conv1D layer, in prefix order.
    std::vector<std::size_t> ring_widths() const;

private:
    struct Impl;
    explicit StreamState(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

struct OracleResult {
    std::vector<double> y;
    // max over layers of (input values + output values) materialised at once
    std::size_t peak_live_values = 0;
};

/// Reference path: materialises every intermediate channel in double
/// precision, then averages. Input is channel-major {C0, N}.
OracleResult naive_conv_avgpool_oracle(const nn::ModelGraph& model, const nn::WeightSet& weights,
                                       std::span<const float> input, std::size_t prefix_end);

/// Classifier forward pass with the prefix streamed and the head (layers
/// after GlobalAvgPool) executed by nn::run.
std::array<float, 2> streaming_forward(const nn::ModelGraph& model, const nn::WeightSet& weights,
                                       std::span<const float> input);

// ---------------------------------------------------------------------------
// Randomised equivalence harness
// ---------------------------------------------------------------------------

inline constexpr double kRelTolerance = 1e-5;
inline constexpr double kAbsTolerance = 1e-7;

struct EquivalenceReport {
    std::string config;         // human-readable layer list
    std::size_t input_length = 0;
    double max_abs_err = 0.0;
    // max_j |stream_j - naive_j| / max(|naive_j|, kAbsTolerance / kRelTolerance);
    // <= kRelTolerance exactly when every channel meets the rel/abs tolerance.
    double max_rel_err = 0.0;
    std::size_t peak_values_stream = 0;
    std::size_t peak_values_naive = 0;
    double ratio = 0.0;  // naive / stream
    bool pass = false;
};

EquivalenceReport compare(const nn::ModelGraph& model, const nn::WeightSet& weights, std::span<const float> input,
                          std::size_t prefix_end);

/// Builds a random prefix (1-3 Conv1D layers, up to 16 channels, K in {3, 5},
/// optional ReLU / MaxPool1D / bias, N in [64, 4096]) from the seed, with
/// seeded weights and uniform(-1, 1) input, and compares both paths.
EquivalenceReport random_trial(std::uint64_t seed);

}  // namespace tinychirp::stream
