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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tinychirp::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense float32 tensor, row-major. 1-D feature maps are {channels, length},
/// 2-D feature maps are {channels, height, width}, vectors are {n}.
struct Tensor {
    Shape shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(Shape s, float fill = 0.0f) : shape(std::move(s)), data(element_count(shape), fill) {}
    Tensor(Shape s, std::vector<float> values);

    std::size_t size() const noexcept { return data.size(); }
    bool operator==(const Tensor&) const = default;
};

enum class LayerKind {
    Conv1D,
    Conv2D,
    MaxPool1D,
    MaxPool2D,
    GlobalAvgPool,
    FullyConnected,
    ReLU,
    Softmax,
    Dropout,
    SingleHeadTransformer,
    Fire1D,
    Reshape,
};

enum class Padding { Valid, Same };

std::string_view kind_name(LayerKind kind) noexcept;
std::optional<LayerKind> parse_kind(std::string_view name) noexcept;

struct FireCounts {
    std::size_t squeeze = 0;
    std::size_t expand1 = 0;
    std::size_t expand3 = 0;
};

/// Filter counts of the slimmed 1-D fire module for an original filter count
/// x: squeeze = 3 * floor(0.3 x), expand1 = expand3 = 4 * floor(0.3 x).
FireCounts fire1d_counts(std::size_t x) noexcept;

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;  // square for Conv2D
    std::size_t stride = 1;
    std::size_t pool = 2;
    Padding padding = Padding::Valid;
    bool has_bias = false;
    float rate = 0.0f;  // Dropout, inference no-op
    std::size_t dim = 0;  // SingleHeadTransformer width
    FireCounts fire{};
    std::size_t reshape_size = 0;

    static LayerSpec conv1d(std::size_t in, std::size_t out, std::size_t kernel, Padding padding, bool bias,
                            std::size_t stride = 1);
    static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t kernel, Padding padding, bool bias);
    static LayerSpec maxpool1d(std::size_t pool = 2);
    static LayerSpec maxpool2d(std::size_t pool = 2);
    static LayerSpec global_avg_pool();
    static LayerSpec fully_connected(std::size_t in, std::size_t out, bool bias);
    static LayerSpec relu();
    static LayerSpec softmax();
    static LayerSpec dropout(float rate);
    static LayerSpec transformer(std::size_t dim);
    // Throws Error{DegenerateFire} if any count is zero.
    static LayerSpec fire1d(std::size_t in, FireCounts counts, bool bias = true);
    static LayerSpec reshape(std::size_t size);
};

struct ParamSlot {
    std::string name;
    Shape shape;
};

/// Learnable tensors of a layer in storage order.
///   Conv1D: weight {out, in, K}, [bias {out}]
///   Conv2D: weight {out, in, K, K}, [bias {out}]
///   FullyConnected: weight {out, in}, [bias {out}]
///   SingleHeadTransformer: wq, wk, wv, wo, ff1, ff2, each {dim, dim}
///   Fire1D: squeeze {s, in, 1}, expand1 {e1, s, 1}, expand3 {e3, s, 3}, each with optional bias
std::vector<ParamSlot> parameter_slots(const LayerSpec& layer);

/// Ordered layer list with shapes checked at construction.
class ModelGraph {
public:
    /// Throws Error{InvalidGraph} when consecutive shapes do not compose.
    static ModelGraph compose(std::string name, Shape input_shape, std::vector<LayerSpec> layers);

    const std::string& name() const noexcept { return name_; }
    const Shape& input_shape() const noexcept { return input_shape_; }
    const Shape& output_shape() const noexcept { return shapes_.back(); }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    /// Shape entering layer i; index layers().size() gives the output shape.
    const Shape& shape_before(std::size_t i) const { return shapes_.at(i); }
    const Shape& shape_after(std::size_t i) const { return shapes_.at(i + 1); }

    /// Last layer is a Softmax over two classes.
    bool is_classifier() const noexcept;
    std::optional<std::size_t> global_pool_index() const noexcept;

private:
    std::string name_;
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<Shape> shapes_;
};

inline constexpr std::size_t kSegmentSamples = 48000;
inline constexpr std::size_t kTargetClass = 1;

ModelGraph build_cnn_time(std::size_t input_len = kSegmentSamples);
ModelGraph build_transformer_time(std::size_t input_len = kSegmentSamples);
ModelGraph build_cnn_mel(std::size_t frames = 184, std::size_t mels = 80);

std::size_t param_count(const ModelGraph& model);

/// Parameters keyed by layer index, in parameter_slots() order.
struct WeightSet {
    std::map<std::size_t, std::vector<Tensor>> layers;

    const std::vector<Tensor>& at(std::size_t layer) const;
    bool operator==(const WeightSet&) const = default;
};

/// Throws Error{MissingWeights} or Error{ShapeMismatch}.
void validate_weights(const ModelGraph& model, const WeightSet& weights);

/// splitmix64; uniform() maps the top 53 bits to [0, 1).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    std::uint64_t next() noexcept;
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

/// Fills every parameter with uniform(-0.1, 0.1) draws from SplitMix64(seed),
/// walking layers in order and tensors in parameter_slots() order.
WeightSet seeded_init(const ModelGraph& model, std::uint64_t seed);
WeightSet zero_weights(const ModelGraph& model);

// ---------------------------------------------------------------------------
// Float execution
// ---------------------------------------------------------------------------

/// Activation sites reported to an observer. Site 0 is a layer's output;
/// the model input is reported as layer -1. Composite layers report extra
/// internal sites.
enum Site : int {
    kOutput = 0,
    kTransformerValue = 1,
    kTransformerAttention = 2,
    kTransformerResidual1 = 3,
    kTransformerHidden = 4,
    kTransformerFeedForward = 5,
    kFireSqueeze = 1,
};

class ActivationObserver {
public:
    virtual ~ActivationObserver() = default;
    virtual void observe(int layer, int site, std::span<const float> values) = 0;
};

/// Executes layers [begin, end) on a tensor shaped like shape_before(begin).
Tensor run(const ModelGraph& model, const WeightSet& weights, Tensor input, std::size_t begin, std::size_t end,
           ActivationObserver* observer = nullptr);

/// Full float32 pass of a classifier graph. Dropout is the identity.
/// Throws Error{ShapeMismatch} or Error{MissingWeights}.
std::array<float, 2> forward(const ModelGraph& model, const WeightSet& weights, const Tensor& input,
                             ActivationObserver* observer = nullptr);

/// Numerically stable softmax, computed in double.
std::vector<float> softmax(std::span<const float> logits);

}  // namespace tinychirp::nn
