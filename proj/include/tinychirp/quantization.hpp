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

// Post-training asymmetric int8 quantization with min/max calibration.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "tinychirp/nn.hpp"

namespace tinychirp::quant {

struct QuantParams {
    float scale = 1.0f;
    int zero_point = 0;

    bool operator==(const QuantParams&) const = default;
};

/// clamp(round(x / s) + z, -128, 127), rounding half away from zero.
std::int8_t quantize_value(double x, QuantParams p) noexcept;
/// s * (q - z)
double dequantize_value(std::int8_t q, QuantParams p) noexcept;

/// Parameters covering [lo, hi]. lo == hi gives {1, 0}; otherwise the range
/// is widened to contain 0 so that 0 is exactly representable, then
/// s = (hi - lo) / 255 and z = round(-128 - lo / s).
QuantParams params_for_range(double lo, double hi) noexcept;

struct QuantTensor {
    nn::Shape shape;
    std::vector<std::int8_t> values;
    QuantParams params;
};

/// (layer, site) as reported to nn::ActivationObserver; the input is layer -1.
using Boundary = std::pair<int, int>;

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

class QuantModel {
public:
    QuantModel(nn::ModelGraph graph, std::map<std::size_t, std::vector<QuantTensor>> weights,
               std::map<Boundary, QuantParams> activations);

    const nn::ModelGraph& graph() const noexcept { return graph_; }
    const std::map<std::size_t, std::vector<QuantTensor>>& weights() const noexcept { return weights_; }
    const std::map<Boundary, QuantParams>& activations() const noexcept { return activations_; }
    bool calibrated() const noexcept { return !activations_.empty(); }
    /// Throws Error{NotCalibrated}.
    QuantParams activation(int layer, int site = nn::kOutput) const;

    /// Float weights recovered from the int8 values.
    nn::WeightSet dequantized_weights() const;

private:
    nn::ModelGraph graph_;
    std::map<std::size_t, std::vector<QuantTensor>> weights_;
    std::map<Boundary, QuantParams> activations_;
};

QuantTensor quantize_tensor(const nn::Tensor& t);

/// Weight-only model, not yet calibrated.
QuantModel quantize_weights(const nn::ModelGraph& model, const nn::WeightSet& weights);

/// Per-boundary extrema of a float forward pass over the inputs.
std::map<Boundary, Range> record_ranges(const nn::ModelGraph& model, const nn::WeightSet& weights,
                                        std::span<const nn::Tensor> inputs);

/// Throws Error{EmptyCalibrationSet}.
QuantModel calibrate(const nn::ModelGraph& model, const nn::WeightSet& weights,
                     std::span<const nn::Tensor> calib_inputs);

/// Integer forward pass; logits are dequantized and passed through a float
/// softmax. Throws Error{NotCalibrated} or Error{ShapeMismatch}.
std::array<float, 2> quantized_forward(const QuantModel& qmodel, const nn::Tensor& input);
/// Dequantized logits (the input of the final Softmax).
std::array<float, 2> quantized_logits(const QuantModel& qmodel, const nn::Tensor& input);

/// Sum of the scales of every calibrated activation boundary.
double boundary_scale_sum(const QuantModel& qmodel);

/// TCHW container with i8 tensors; activation parameters go in the metadata.
void save_quant_model(const QuantModel& qmodel, const std::filesystem::path& path);
/// Throws container errors, Error{ShapeMismatch} or Error{MissingWeights}.
QuantModel load_quant_model(const nn::ModelGraph& model, const std::filesystem::path& path);

}  // namespace tinychirp::quant
