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
#include <array>
#include <numeric>
#include <sstream>
#include <utility>

#include "tinychirp/error.hpp"
#include "tinychirp/nn.hpp"

namespace tinychirp::nn {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 12> kKindNames{{
    {LayerKind::Conv1D, "Conv1D"},
    {LayerKind::Conv2D, "Conv2D"},
    {LayerKind::MaxPool1D, "MaxPool1D"},
    {LayerKind::MaxPool2D, "MaxPool2D"},
    {LayerKind::GlobalAvgPool, "GlobalAvgPool"},
    {LayerKind::FullyConnected, "FullyConnected"},
    {LayerKind::ReLU, "ReLU"},
    {LayerKind::Softmax, "Softmax"},
    {LayerKind::Dropout, "Dropout"},
    {LayerKind::SingleHeadTransformer, "SingleHeadTransformer"},
    {LayerKind::Fire1D, "Fire1D"},
    {LayerKind::Reshape, "Reshape"},
}};

std::size_t conv_out_len(std::size_t n, std::size_t kernel, std::size_t stride, Padding padding) {
    if (padding == Padding::Same) return (n + stride - 1) / stride;
    if (n < kernel) return 0;
    return (n - kernel) / stride + 1;
}

[[noreturn]] void bad_graph(const std::string& model, std::size_t layer, const std::string& why) {
    throw Error(Errc::InvalidGraph, model + " layer " + std::to_string(layer) + ": " + why);
}

Shape infer(const std::string& model, std::size_t idx, const LayerSpec& l, const Shape& in) {
    const auto need_rank = [&](std::size_t rank) {
        if (in.size() != rank)
            bad_graph(model, idx, std::string(kind_name(l.kind)) + " expects rank " + std::to_string(rank) +
                                      " input, got " + shape_string(in));
    };
    const auto need_channels = [&](std::size_t c) {
        if (in[0] != c)
            bad_graph(model, idx, "expects " + std::to_string(c) + " input channels, got " + shape_string(in));
    };
    switch (l.kind) {
        case LayerKind::Conv1D: {
            need_rank(2);
            need_channels(l.in_channels);
            if (l.kernel == 0 || l.out_channels == 0 || l.stride == 0) bad_graph(model, idx, "zero-sized conv");
            const std::size_t n = conv_out_len(in[1], l.kernel, l.stride, l.padding);
            if (n == 0) bad_graph(model, idx, "kernel longer than input");
            return {l.out_channels, n};
        }
        case LayerKind::Conv2D: {
            need_rank(3);
            need_channels(l.in_channels);
            if (l.kernel == 0 || l.out_channels == 0 || l.stride == 0) bad_graph(model, idx, "zero-sized conv");
            const std::size_t h = conv_out_len(in[1], l.kernel, l.stride, l.padding);
            const std::size_t w = conv_out_len(in[2], l.kernel, l.stride, l.padding);
            if (h == 0 || w == 0) bad_graph(model, idx, "kernel larger than input");
            return {l.out_channels, h, w};
        }
        case LayerKind::MaxPool1D:
            need_rank(2);
            if (l.pool == 0 || in[1] / l.pool == 0) bad_graph(model, idx, "pool window exceeds input");
            return {in[0], in[1] / l.pool};
        case LayerKind::MaxPool2D:
            need_rank(3);
            if (l.pool == 0 || in[1] / l.pool == 0 || in[2] / l.pool == 0)
                bad_graph(model, idx, "pool window exceeds input");
            return {in[0], in[1] / l.pool, in[2] / l.pool};
        case LayerKind::GlobalAvgPool:
            if (in.size() < 2) bad_graph(model, idx, "global pooling needs a feature map");
            return {in[0]};
        case LayerKind::FullyConnected:
            need_rank(1);
            need_channels(l.in_channels);
            if (l.out_channels == 0) bad_graph(model, idx, "zero-sized fully connected layer");
            return {l.out_channels};
        case LayerKind::ReLU:
        case LayerKind::Dropout:
            return in;
        case LayerKind::Softmax:
            need_rank(1);
            return in;
        case LayerKind::SingleHeadTransformer:
            need_rank(1);
            need_channels(l.dim);
            return in;
        case LayerKind::Fire1D:
            need_rank(2);
            need_channels(l.in_channels);
            return {l.fire.expand1 + l.fire.expand3, in[1]};
        case LayerKind::Reshape:
            if (element_count(in) != l.reshape_size)
                bad_graph(model, idx, "cannot reshape " + shape_string(in) + " to " + std::to_string(l.reshape_size));
            return {l.reshape_size};
    }
    bad_graph(model, idx, "unknown layer kind");
}

}  // namespace

std::size_t element_count(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != element_count(shape))
        throw Error(Errc::ShapeMismatch, "tensor of shape " + shape_string(shape) + " given " +
                                             std::to_string(data.size()) + " values");
}

std::string_view kind_name(LayerKind kind) noexcept {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "Unknown";
}

std::optional<LayerKind> parse_kind(std::string_view name) noexcept {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    return std::nullopt;
}

FireCounts fire1d_counts(std::size_t x) noexcept {
    const std::size_t base = (3 * x) / 10;  // floor(0.3 x) without float rounding
    return {3 * base, 4 * base, 4 * base};
}

LayerSpec LayerSpec::conv1d(std::size_t in, std::size_t out, std::size_t kernel, Padding padding, bool bias,
                            std::size_t stride) {
    LayerSpec l;
    l.kind = LayerKind::Conv1D;
    l.in_channels = in;
    l.out_channels = out;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in, std::size_t out, std::size_t kernel, Padding padding, bool bias) {
    LayerSpec l = conv1d(in, out, kernel, padding, bias);
    l.kind = LayerKind::Conv2D;
    return l;
}

LayerSpec LayerSpec::maxpool1d(std::size_t pool) {
    LayerSpec l;
    l.kind = LayerKind::MaxPool1D;
    l.pool = pool;
    l.stride = pool;
    return l;
}

LayerSpec LayerSpec::maxpool2d(std::size_t pool) {
    LayerSpec l = maxpool1d(pool);
    l.kind = LayerKind::MaxPool2D;
    return l;
}

LayerSpec LayerSpec::global_avg_pool() {
    LayerSpec l;
    l.kind = LayerKind::GlobalAvgPool;
    return l;
}

LayerSpec LayerSpec::fully_connected(std::size_t in, std::size_t out, bool bias) {
    LayerSpec l;
    l.kind = LayerKind::FullyConnected;
    l.in_channels = in;
    l.out_channels = out;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::relu() {
    LayerSpec l;
    l.kind = LayerKind::ReLU;
    return l;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec l;
    l.kind = LayerKind::Softmax;
    return l;
}

LayerSpec LayerSpec::dropout(float rate) {
    LayerSpec l;
    l.kind = LayerKind::Dropout;
    l.rate = rate;
    return l;
}

LayerSpec LayerSpec::transformer(std::size_t dim) {
    LayerSpec l;
    l.kind = LayerKind::SingleHeadTransformer;
    l.dim = dim;
    l.in_channels = dim;
    l.out_channels = dim;
    return l;
}

LayerSpec LayerSpec::fire1d(std::size_t in, FireCounts counts, bool bias) {
    if (counts.squeeze == 0 || counts.expand1 == 0 || counts.expand3 == 0)
        throw Error(Errc::DegenerateFire, "fire module with a zero filter count");
    LayerSpec l;
    l.kind = LayerKind::Fire1D;
    l.in_channels = in;
    l.out_channels = counts.expand1 + counts.expand3;
    l.kernel = 3;
    l.padding = Padding::Same;
    l.fire = counts;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::reshape(std::size_t size) {
    LayerSpec l;
    l.kind = LayerKind::Reshape;
    l.reshape_size = size;
    return l;
}

std::vector<ParamSlot> parameter_slots(const LayerSpec& l) {
    std::vector<ParamSlot> slots;
    const auto add_conv = [&](const std::string& prefix, std::size_t out, std::size_t in, std::size_t k) {
        slots.push_back({prefix + "weight", {out, in, k}});
        if (l.has_bias) slots.push_back({prefix + "bias", {out}});
    };
    switch (l.kind) {
        case LayerKind::Conv1D:
            add_conv("", l.out_channels, l.in_channels, l.kernel);
            break;
        case LayerKind::Conv2D:
            slots.push_back({"weight", {l.out_channels, l.in_channels, l.kernel, l.kernel}});
            if (l.has_bias) slots.push_back({"bias", {l.out_channels}});
            break;
        case LayerKind::FullyConnected:
            slots.push_back({"weight", {l.out_channels, l.in_channels}});
            if (l.has_bias) slots.push_back({"bias", {l.out_channels}});
            break;
        case LayerKind::SingleHeadTransformer:
            for (const char* name : {"wq", "wk", "wv", "wo", "ff1", "ff2"}) slots.push_back({name, {l.dim, l.dim}});
            break;
        case LayerKind::Fire1D:
            add_conv("squeeze.", l.fire.squeeze, l.in_channels, 1);
            add_conv("expand1.", l.fire.expand1, l.fire.squeeze, 1);
            add_conv("expand3.", l.fire.expand3, l.fire.squeeze, 3);
            break;
        default:
            break;
    }
    return slots;
}

ModelGraph ModelGraph::compose(std::string name, Shape input_shape, std::vector<LayerSpec> layers) {
    ModelGraph g;
    g.name_ = std::move(name);
    g.input_shape_ = std::move(input_shape);
    g.layers_ = std::move(layers);
    g.shapes_.push_back(g.input_shape_);
    if (element_count(g.input_shape_) == 0 || g.input_shape_.empty()) bad_graph(g.name_, 0, "empty input shape");
    for (std::size_t i = 0; i < g.layers_.size(); ++i) g.shapes_.push_back(infer(g.name_, i, g.layers_[i], g.shapes_.back()));
    return g;
}

bool ModelGraph::is_classifier() const noexcept {
    return !layers_.empty() && layers_.back().kind == LayerKind::Softmax && output_shape() == Shape{2};
}

std::optional<std::size_t> ModelGraph::global_pool_index() const noexcept {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].kind == LayerKind::GlobalAvgPool) return i;
    return std::nullopt;
}

ModelGraph build_cnn_time(std::size_t input_len) {
    return ModelGraph::compose("cnn_time", {1, input_len},
                               {
                                   LayerSpec::conv1d(1, 4, 3, Padding::Same, false),
                                   LayerSpec::relu(),
                                   LayerSpec::maxpool1d(2),
                                   LayerSpec::conv1d(4, 8, 3, Padding::Same, false),
                                   LayerSpec::maxpool1d(2),
                                   LayerSpec::dropout(0.25f),
                                   LayerSpec::global_avg_pool(),
                                   LayerSpec::fully_connected(8, 64, false),
                                   LayerSpec::relu(),
                                   LayerSpec::fully_connected(64, 2, false),
                                   LayerSpec::softmax(),
                               });
}

ModelGraph build_transformer_time(std::size_t input_len) {
    return ModelGraph::compose("transformer_time", {1, input_len},
                               {
                                   LayerSpec::conv1d(1, 16, 3, Padding::Same, false),
                                   LayerSpec::relu(),
                                   LayerSpec::maxpool1d(2),
                                   LayerSpec::dropout(0.25f),
                                   LayerSpec::global_avg_pool(),
                                   LayerSpec::transformer(16),
                                   LayerSpec::fully_connected(16, 2, false),
                                   LayerSpec::softmax(),
                               });
}

ModelGraph build_cnn_mel(std::size_t frames, std::size_t mels) {
    const std::size_t h = ((frames - 2) / 2 - 2) / 2;
    const std::size_t w = ((mels - 2) / 2 - 2) / 2;
    return ModelGraph::compose("cnn_mel", {1, frames, mels},
                               {
                                   LayerSpec::conv2d(1, 4, 3, Padding::Valid, true),
                                   LayerSpec::relu(),
                                   LayerSpec::maxpool2d(2),
                                   LayerSpec::conv2d(4, 4, 3, Padding::Valid, true),
                                   LayerSpec::relu(),
                                   LayerSpec::maxpool2d(2),
                                   LayerSpec::reshape(4 * h * w),
                                   LayerSpec::fully_connected(4 * h * w, 8, true),
                                   LayerSpec::relu(),
                                   LayerSpec::fully_connected(8, 2, true),
                                   LayerSpec::softmax(),
                               });
}

std::size_t param_count(const ModelGraph& model) {
    std::size_t total = 0;
    for (const auto& layer : model.layers())
        for (const auto& slot : parameter_slots(layer)) total += element_count(slot.shape);
    return total;
}

const std::vector<Tensor>& WeightSet::at(std::size_t layer) const {
    const auto it = layers.find(layer);
    if (it == layers.end()) throw Error(Errc::MissingWeights, "no weights for layer " + std::to_string(layer));
    return it->second;
}

void validate_weights(const ModelGraph& model, const WeightSet& weights) {
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const auto slots = parameter_slots(model.layers()[i]);
        if (slots.empty()) continue;
        const auto it = weights.layers.find(i);
        if (it == weights.layers.end() || it->second.size() != slots.size())
            throw Error(Errc::MissingWeights, model.name() + " layer " + std::to_string(i) + " (" +
                                                  std::string(kind_name(model.layers()[i].kind)) + ")");
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const Tensor& t = it->second[s];
            if (t.shape != slots[s].shape || t.data.size() != element_count(slots[s].shape))
                throw Error(Errc::ShapeMismatch, model.name() + " layer " + std::to_string(i) + " " + slots[s].name +
                                                     ": expected " + shape_string(slots[s].shape) + ", got " +
                                                     shape_string(t.shape));
        }
    }
}

}  // namespace tinychirp::nn
