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
#include "tinychirp/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <variant>

#include "tinychirp/error.hpp"
#include "tinychirp/kernels.hpp"

namespace tinychirp::stream {
namespace {

// Same-padded, stride-1 convolution over a doubled ring of K points: every
// point is written at slot w and w + K, so the newest K points are always a
// contiguous, time-ordered window of K * in_ch values.
struct ConvStage {
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel = 0;
    std::vector<float> weights;  // [out][t][in], matches the window layout
    std::vector<float> bias;     // empty when the layer has none
    std::vector<float> ring;     // 2 * kernel * in_ch
    std::vector<float> out;      // out_ch
    std::size_t stored = 0;      // points written, including leading virtual zeros

    std::size_t half() const { return kernel / 2; }

    void store(std::span<const float> point) {
        const std::size_t slot = stored % kernel;
        std::copy(point.begin(), point.end(), ring.begin() + static_cast<std::ptrdiff_t>(slot * in_ch));
        std::copy(point.begin(), point.end(), ring.begin() + static_cast<std::ptrdiff_t>((slot + kernel) * in_ch));
        ++stored;
    }

    // Valid once stored >= kernel.
    void compute() {
        const float* window = ring.data() + (stored % kernel) * in_ch;
        const std::size_t span_len = kernel * in_ch;
        const auto& k = kernels::active();
        for (std::size_t c = 0; c < out_ch; ++c)
            out[c] = k.dot(weights.data() + c * span_len, window, span_len) + (bias.empty() ? 0.0f : bias[c]);
    }
};

struct ReluStage {};

struct PoolStage {
    std::size_t pool = 2;
    std::vector<float> pending;
    std::size_t count = 0;
};

using Stage = std::variant<ConvStage, ReluStage, PoolStage>;

}  // namespace

struct StreamState::Impl {
    std::vector<Stage> stages;
    std::vector<double> y;
    std::size_t input_length = 0;
    std::size_t input_channels = 0;
    std::size_t pooled_length = 0;
    std::size_t pushed = 0;
    std::size_t emitted = 0;
    double inv_pooled = 0.0;

    void accumulate(std::span<const float> point) {
        // y_j(k) = y_j(k-1) + A_j(k) / N_L
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += inv_pooled * static_cast<double>(point[j]);
        ++emitted;
    }

    void feed(std::size_t idx, std::span<float> point) {
        if (idx == stages.size()) {
            accumulate(point);
            return;
        }
        Stage& stage = stages[idx];
        if (auto* conv = std::get_if<ConvStage>(&stage)) {
            conv->store(point);
            if (conv->stored >= conv->kernel) {
                conv->compute();
                feed(idx + 1, conv->out);
            }
        } else if (std::holds_alternative<ReluStage>(stage)) {
            kernels::active().relu(point.data(), point.size());
            feed(idx + 1, point);
        } else {
            auto& pool = std::get<PoolStage>(stage);
            if (pool.count == 0) {
                std::copy(point.begin(), point.end(), pool.pending.begin());
            } else {
                for (std::size_t c = 0; c < point.size(); ++c) pool.pending[c] = std::max(pool.pending[c], point[c]);
            }
            if (++pool.count == pool.pool) {
                pool.count = 0;
                feed(idx + 1, pool.pending);
            }
        }
    }

    // Upstream input of stage idx is exhausted.
    void finish(std::size_t idx) {
        if (idx == stages.size()) return;
        if (auto* conv = std::get_if<ConvStage>(&stages[idx])) {
            const std::vector<float> zeros(conv->in_ch, 0.0f);
            for (std::size_t i = 0; i < conv->half(); ++i) {
                conv->store(zeros);
                if (conv->stored >= conv->kernel) {
                    conv->compute();
                    feed(idx + 1, conv->out);
                }
            }
        }
        // A pooling window left incomplete is dropped (floor semantics).
        finish(idx + 1);
    }

    std::size_t buffered() const {
        std::size_t total = y.size();
        for (const auto& stage : stages) {
            if (const auto* conv = std::get_if<ConvStage>(&stage)) total += conv->ring.size() + conv->out.size();
            if (const auto* pool = std::get_if<PoolStage>(&stage)) total += pool->pending.size();
        }
        return total;
    }
};

StreamState::StreamState(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
StreamState::StreamState(StreamState&&) noexcept = default;
StreamState& StreamState::operator=(StreamState&&) noexcept = default;
StreamState::~StreamState() = default;

StreamState StreamState::init(const nn::ModelGraph& model, const nn::WeightSet& weights, std::size_t prefix_end) {
    if (prefix_end == 0) throw Error(Errc::UnsupportedLayerInPrefix, "empty prefix");
    if (prefix_end > model.layers().size()) throw Error(Errc::InvalidGraph, "prefix extends past the model");
    if (model.input_shape().size() != 2)
        throw Error(Errc::UnsupportedLayerInPrefix, "streaming needs a {channels, length} input");

    auto impl = std::make_unique<Impl>();
    impl->input_channels = model.input_shape()[0];
    impl->input_length = model.input_shape()[1];
    for (std::size_t i = 0; i < prefix_end; ++i) {
        const nn::LayerSpec& l = model.layers()[i];
        const std::string where = "layer " + std::to_string(i) + " (" + std::string(nn::kind_name(l.kind)) + ")";
        switch (l.kind) {
            case nn::LayerKind::Conv1D: {
                if (l.stride != 1 || l.kernel % 2 == 0 || l.padding != nn::Padding::Same)
                    throw Error(Errc::UnsupportedLayerInPrefix, where + ": needs stride 1, odd kernel, same padding");
                const auto& p = weights.at(i);
                ConvStage conv;
                conv.in_ch = l.in_channels;
                conv.out_ch = l.out_channels;
                conv.kernel = l.kernel;
                conv.weights.resize(l.out_channels * l.kernel * l.in_channels);
                for (std::size_t c = 0; c < l.out_channels; ++c)
                    for (std::size_t ic = 0; ic < l.in_channels; ++ic)
                        for (std::size_t t = 0; t < l.kernel; ++t)
                            conv.weights[(c * l.kernel + t) * l.in_channels + ic] =
                                p[0].data[(c * l.in_channels + ic) * l.kernel + t];
                if (l.has_bias) conv.bias = p[1].data;
                conv.ring.assign(2 * l.kernel * l.in_channels, 0.0f);
                conv.out.assign(l.out_channels, 0.0f);
                conv.stored = conv.half();  // leading virtual zeros
                impl->stages.emplace_back(std::move(conv));
                break;
            }
            case nn::LayerKind::ReLU: impl->stages.emplace_back(ReluStage{}); break;
            case nn::LayerKind::MaxPool1D: {
                PoolStage pool;
                pool.pool = l.pool;
                pool.pending.assign(model.shape_before(i)[0], 0.0f);
                impl->stages.emplace_back(std::move(pool));
                break;
            }
            case nn::LayerKind::Dropout: break;
            default: throw Error(Errc::UnsupportedLayerInPrefix, where);
        }
    }
    const nn::Shape& last = model.shape_before(prefix_end);
    impl->pooled_length = last[1];
    impl->inv_pooled = 1.0 / static_cast<double>(last[1]);
    impl->y.assign(last[0], 0.0);
    return StreamState(std::move(impl));
}

StreamState StreamState::init(const nn::ModelGraph& model, const nn::WeightSet& weights) {
    const auto gap = model.global_pool_index();
    if (!gap) throw Error(Errc::UnsupportedLayerInPrefix, model.name() + " has no GlobalAvgPool layer");
    return init(model, weights, *gap);
}

void StreamState::push(std::span<const float> point) {
    Impl& s = *impl_;
    if (s.pushed >= s.input_length)
        throw Error(Errc::StreamOverflow, "more than " + std::to_string(s.input_length) + " points pushed");
    if (point.size() != s.input_channels)
        throw Error(Errc::ShapeMismatch, "point has " + std::to_string(point.size()) + " channels, expected " +
                                             std::to_string(s.input_channels));
    float buf[64];
    std::vector<float> heap;
    std::span<float> mutable_point;
    if (point.size() <= std::size(buf)) {
        std::copy(point.begin(), point.end(), buf);
        mutable_point = std::span<float>(buf, point.size());
    } else {
        heap.assign(point.begin(), point.end());
        mutable_point = heap;
    }
    ++s.pushed;
    s.feed(0, mutable_point);
    if (s.pushed == s.input_length) s.finish(0);
}

void StreamState::push_all(std::span<const float> samples) {
    const std::size_t c = impl_->input_channels;
    if (samples.size() % c != 0) throw Error(Errc::ShapeMismatch, "sample count not a multiple of channels");
    for (std::size_t i = 0; i < samples.size(); i += c) push(samples.subspan(i, c));
}

StreamResult StreamState::finalize() const {
    const Impl& s = *impl_;
    if (s.pushed != s.input_length)
        throw Error(Errc::IncompleteStream, std::to_string(s.pushed) + " of " + std::to_string(s.input_length) +
                                                " points pushed");
    return {s.y, {s.buffered(), s.pushed}};
}

std::size_t StreamState::input_length() const noexcept { return impl_->input_length; }
std::size_t StreamState::input_channels() const noexcept { return impl_->input_channels; }
std::size_t StreamState::pooled_length() const noexcept { return impl_->pooled_length; }
std::size_t StreamState::output_channels() const noexcept { return impl_->y.size(); }
std::size_t StreamState::buffered_values() const noexcept { return impl_->buffered(); }

std::vector<std::size_t> StreamState::ring_widths() const {
    std::vector<std::size_t> widths;
    for (const auto& stage : impl_->stages)
        if (const auto* conv = std::get_if<ConvStage>(&stage)) widths.push_back(conv->kernel);
    return widths;
}

OracleResult naive_conv_avgpool_oracle(const nn::ModelGraph& model, const nn::WeightSet& weights,
                                       std::span<const float> input, std::size_t prefix_end) {
    std::size_t channels = model.input_shape()[0];
    std::size_t length = model.input_shape()[1];
    if (input.size() != channels * length) throw Error(Errc::ShapeMismatch, "oracle input size mismatch");

    // act[c][n], channel-major
    std::vector<double> act(input.begin(), input.end());
    OracleResult result;
    result.peak_live_values = act.size();

    for (std::size_t i = 0; i < prefix_end; ++i) {
        const nn::LayerSpec& l = model.layers()[i];
        if (l.kind == nn::LayerKind::Conv1D) {
            const auto& w = weights.at(i)[0].data;
            const auto half = static_cast<std::ptrdiff_t>(l.kernel / 2);
            std::vector<double> next(l.out_channels * length, 0.0);
            for (std::size_t c = 0; c < l.out_channels; ++c) {
                for (std::size_t n = 0; n < length; ++n) {
                    double sum = l.has_bias ? weights.at(i)[1].data[c] : 0.0;
                    for (std::size_t ic = 0; ic < channels; ++ic) {
                        for (std::size_t t = 0; t < l.kernel; ++t) {
                            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(n + t) - half;
                            if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
                            sum += static_cast<double>(w[(c * channels + ic) * l.kernel + t]) *
                                   act[ic * length + static_cast<std::size_t>(src)];
                        }
                    }
                    next[c * length + n] = sum;
                }
            }
            result.peak_live_values = std::max(result.peak_live_values, act.size() + next.size());
            act = std::move(next);
            channels = l.out_channels;
        } else if (l.kind == nn::LayerKind::ReLU) {
            for (auto& v : act) v = std::max(v, 0.0);
        } else if (l.kind == nn::LayerKind::MaxPool1D) {
            const std::size_t out_len = length / l.pool;
            std::vector<double> next(channels * out_len);
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t n = 0; n < out_len; ++n) {
                    double m = act[c * length + n * l.pool];
                    for (std::size_t k = 1; k < l.pool; ++k) m = std::max(m, act[c * length + n * l.pool + k]);
                    next[c * out_len + n] = m;
                }
            result.peak_live_values = std::max(result.peak_live_values, act.size() + next.size());
            act = std::move(next);
            length = out_len;
        } else if (l.kind != nn::LayerKind::Dropout) {
            throw Error(Errc::UnsupportedLayerInPrefix, "oracle: " + std::string(nn::kind_name(l.kind)));
        }
    }

    result.y.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < length; ++n) sum += act[c * length + n];
        result.y[c] = sum / static_cast<double>(length);
    }
    return result;
}

std::array<float, 2> streaming_forward(const nn::ModelGraph& model, const nn::WeightSet& weights,
                                       std::span<const float> input) {
    if (!model.is_classifier()) throw Error(Errc::InvalidGraph, model.name() + " has no 2-class softmax head");
    nn::validate_weights(model, weights);
    StreamState state = StreamState::init(model, weights);
    state.push_all(input);
    const StreamResult r = state.finalize();
    nn::Tensor pooled({r.y.size()});
    for (std::size_t j = 0; j < r.y.size(); ++j) pooled.data[j] = static_cast<float>(r.y[j]);
    const std::size_t gap = *model.global_pool_index();
    const nn::Tensor out = nn::run(model, weights, std::move(pooled), gap + 1, model.layers().size());
    return {out.data[0], out.data[1]};
}

EquivalenceReport compare(const nn::ModelGraph& model, const nn::WeightSet& weights, std::span<const float> input,
                          std::size_t prefix_end) {
    StreamState state = StreamState::init(model, weights, prefix_end);
    state.push_all(input);
    const StreamResult streamed = state.finalize();
    const OracleResult naive = naive_conv_avgpool_oracle(model, weights, input, prefix_end);

    EquivalenceReport report;
    std::ostringstream cfg;
    for (std::size_t i = 0; i < prefix_end; ++i) {
        const auto& l = model.layers()[i];
        cfg << (i ? " > " : "") << nn::kind_name(l.kind);
        if (l.kind == nn::LayerKind::Conv1D)
            cfg << "(" << l.in_channels << "->" << l.out_channels << ",k" << l.kernel << (l.has_bias ? ",b" : "") << ")";
        if (l.kind == nn::LayerKind::MaxPool1D) cfg << "(" << l.pool << ")";
    }
    report.config = cfg.str();
    report.input_length = state.input_length();
    const double floor = kAbsTolerance / kRelTolerance;
    for (std::size_t j = 0; j < naive.y.size(); ++j) {
        const double diff = std::abs(streamed.y[j] - naive.y[j]);
        report.max_abs_err = std::max(report.max_abs_err, diff);
        report.max_rel_err = std::max(report.max_rel_err, diff / std::max(std::abs(naive.y[j]), floor));
    }
    report.peak_values_stream = streamed.stats.peak_buffered_values;
    report.peak_values_naive = naive.peak_live_values;
    report.ratio = static_cast<double>(naive.peak_live_values) / static_cast<double>(streamed.stats.peak_buffered_values);
    report.pass = report.max_rel_err <= kRelTolerance;
    return report;
}

EquivalenceReport random_trial(std::uint64_t seed) {
    nn::SplitMix64 rng(seed);
    const auto pick = [&](std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
    };
    std::size_t length = pick(64, 4096);
    const std::size_t input_len = length;
    const std::size_t convs = pick(1, 3);
    std::size_t channels = 1;
    std::vector<nn::LayerSpec> layers;
    for (std::size_t c = 0; c < convs; ++c) {
        const std::size_t out = pick(1, 16);
        const std::size_t kernel = pick(0, 1) ? 5 : 3;
        const bool bias = pick(0, 1) == 1;
        layers.push_back(nn::LayerSpec::conv1d(channels, out, kernel, nn::Padding::Same, bias));
        channels = out;
        if (pick(0, 1)) layers.push_back(nn::LayerSpec::relu());
        if (pick(0, 1) && length >= 4) {
            layers.push_back(nn::LayerSpec::maxpool1d(2));
            length /= 2;
        }
    }
    const std::size_t prefix_end = layers.size();
    layers.push_back(nn::LayerSpec::global_avg_pool());
    const auto model = nn::ModelGraph::compose("random_prefix", {1, input_len}, std::move(layers));
    const auto weights = nn::seeded_init(model, rng.next());
    std::vector<float> input(input_len);
    for (auto& v : input) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return compare(model, weights, input, prefix_end);
}

}  // namespace tinychirp::stream
