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
#include "tinychirp/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "json.hpp"
#include "tinychirp/container.hpp"
#include "tinychirp/error.hpp"
#include "tinychirp/kernels.hpp"

namespace tinychirp::quant {
namespace {

using json = nlohmann::json;
using nn::LayerKind;

std::int8_t saturate(double v) noexcept {
    return static_cast<std::int8_t>(std::clamp(v, -128.0, 127.0));
}

// Requantized value of an accumulator holding real value acc * (1 / m) * s_out.
std::int8_t requantize(double acc, double m, int zero_point, int lower = -128) noexcept {
    const double q = std::round(acc * m) + zero_point;
    return static_cast<std::int8_t>(std::clamp(q, static_cast<double>(lower), 127.0));
}

std::size_t leading_pad(std::size_t n, std::size_t out, std::size_t kernel, std::size_t stride, nn::Padding padding) {
    if (padding == nn::Padding::Valid) return 0;
    const std::size_t needed = (out - 1) * stride + kernel;
    return needed > n ? (needed - n) / 2 : 0;
}

struct QAct {
    nn::Shape shape;
    std::vector<std::int8_t> q;
    QuantParams p;
};

std::vector<std::int16_t> centered(std::span<const std::int8_t> q, int zero_point) {
    std::vector<std::int16_t> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = static_cast<std::int16_t>(q[i] - zero_point);
    return out;
}

// Bias folded into the int32 accumulator domain (scale s_in * s_w).
std::vector<std::int32_t> bias_accumulators(const QuantTensor* bias, double acc_scale, std::size_t n) {
    std::vector<std::int32_t> out(n, 0);
    if (bias == nullptr) return out;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<std::int32_t>(std::round(dequantize_value(bias->values[i], bias->params) / acc_scale));
    return out;
}

std::vector<std::int8_t> matvec(std::span<const std::int16_t> x, double s_x, const QuantTensor& w,
                                const QuantTensor* bias, QuantParams out, bool relu) {
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    const auto wc = centered(w.values, w.params.zero_point);
    const double acc_scale = s_x * w.params.scale;
    const auto b32 = bias_accumulators(bias, acc_scale, rows);
    const double m = acc_scale / out.scale;
    const int lower = relu ? out.zero_point : -128;
    const auto& k = kernels::active();
    std::vector<std::int8_t> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::int32_t acc = k.dot_i16(wc.data() + r * cols, x.data(), cols) + b32[r];
        y[r] = requantize(acc, m, out.zero_point, lower);
    }
    return y;
}

// Writes out_ch x out_len int8 values into dst.
void conv1d_q(const std::vector<std::int8_t>& x, QuantParams px, std::size_t in_ch, std::size_t n,
              const QuantTensor& w, const QuantTensor* bias, std::size_t stride, nn::Padding padding,
              std::size_t out_len, QuantParams out, bool relu, std::int8_t* dst) {
    const std::size_t out_ch = w.shape[0], kernel = w.shape[2];
    const std::size_t pad = leading_pad(n, out_len, kernel, stride, padding);
    const std::size_t rows = (out_len - 1) * stride + kernel;
    // Time-major, zero-padded, zero point removed: each output window is contiguous.
    std::vector<std::int16_t> xt(rows * in_ch, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        if (r < pad || r - pad >= n) continue;
        for (std::size_t i = 0; i < in_ch; ++i)
            xt[r * in_ch + i] = static_cast<std::int16_t>(x[i * n + (r - pad)] - px.zero_point);
    }
    const std::size_t span_len = kernel * in_ch;
    std::vector<std::int16_t> wt(out_ch * span_len);
    for (std::size_t c = 0; c < out_ch; ++c)
        for (std::size_t i = 0; i < in_ch; ++i)
            for (std::size_t t = 0; t < kernel; ++t)
                wt[(c * kernel + t) * in_ch + i] =
                    static_cast<std::int16_t>(w.values[(c * in_ch + i) * kernel + t] - w.params.zero_point);
    const double acc_scale = px.scale * w.params.scale;
    const auto b32 = bias_accumulators(bias, acc_scale, out_ch);
    const double m = acc_scale / out.scale;
    const int lower = relu ? out.zero_point : -128;
    const auto& k = kernels::active();
    for (std::size_t c = 0; c < out_ch; ++c)
        for (std::size_t o = 0; o < out_len; ++o) {
            const std::int32_t acc = k.dot_i16(wt.data() + c * span_len, xt.data() + o * stride * in_ch, span_len);
            dst[c * out_len + o] = requantize(acc + b32[c], m, out.zero_point, lower);
        }
}

QAct conv2d_q(const QAct& x, const nn::LayerSpec& l, const nn::Shape& out_shape, const std::vector<QuantTensor>& p,
              QuantParams out) {
    const std::size_t in_ch = x.shape[0], h = x.shape[1], w = x.shape[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2], kk = l.kernel;
    const auto pad_t = static_cast<std::ptrdiff_t>(leading_pad(h, oh, kk, l.stride, l.padding));
    const auto pad_l = static_cast<std::ptrdiff_t>(leading_pad(w, ow, kk, l.stride, l.padding));
    const std::size_t span_len = in_ch * kk * kk;
    const auto wc = centered(p[0].values, p[0].params.zero_point);
    const double acc_scale = x.p.scale * p[0].params.scale;
    const auto b32 = bias_accumulators(l.has_bias ? &p[1] : nullptr, acc_scale, l.out_channels);
    const double m = acc_scale / out.scale;
    const auto& k = kernels::active();

    QAct y{out_shape, std::vector<std::int8_t>(nn::element_count(out_shape)), out};
    std::vector<std::int16_t> patch(span_len);
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t col = 0; col < ow; ++col) {
            for (std::size_t i = 0; i < in_ch; ++i)
                for (std::size_t kh = 0; kh < kk; ++kh)
                    for (std::size_t kw = 0; kw < kk; ++kw) {
                        const auto sr = static_cast<std::ptrdiff_t>(r * l.stride + kh) - pad_t;
                        const auto sc = static_cast<std::ptrdiff_t>(col * l.stride + kw) - pad_l;
                        std::int16_t v = 0;
                        if (sr >= 0 && sr < static_cast<std::ptrdiff_t>(h) && sc >= 0 &&
                            sc < static_cast<std::ptrdiff_t>(w))
                            v = static_cast<std::int16_t>(
                                x.q[(i * h + static_cast<std::size_t>(sr)) * w + static_cast<std::size_t>(sc)] -
                                x.p.zero_point);
                        patch[(i * kk + kh) * kk + kw] = v;
                    }
            for (std::size_t c = 0; c < l.out_channels; ++c) {
                const std::int32_t acc = k.dot_i16(wc.data() + c * span_len, patch.data(), span_len) + b32[c];
                y.q[(c * oh + r) * ow + col] = requantize(acc, m, out.zero_point);
            }
        }
    }
    return y;
}

QAct maxpool1d_q(const QAct& x, const nn::LayerSpec& l, const nn::Shape& out_shape) {
    QAct y{out_shape, std::vector<std::int8_t>(nn::element_count(out_shape)), x.p};
    const std::size_t n = x.shape[1], on = out_shape[1];
    for (std::size_t c = 0; c < x.shape[0]; ++c)
        for (std::size_t o = 0; o < on; ++o) {
            const std::int8_t* src = x.q.data() + c * n + o * l.pool;
            y.q[c * on + o] = *std::max_element(src, src + l.pool);
        }
    return y;
}

QAct maxpool2d_q(const QAct& x, const nn::LayerSpec& l, const nn::Shape& out_shape) {
    QAct y{out_shape, std::vector<std::int8_t>(nn::element_count(out_shape)), x.p};
    const std::size_t h = x.shape[1], w = x.shape[2], oh = out_shape[1], ow = out_shape[2];
    for (std::size_t c = 0; c < x.shape[0]; ++c)
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t col = 0; col < ow; ++col) {
                std::int8_t m = -128;
                for (std::size_t dr = 0; dr < l.pool; ++dr)
                    for (std::size_t dc = 0; dc < l.pool; ++dc)
                        m = std::max(m, x.q[(c * h + r * l.pool + dr) * w + col * l.pool + dc]);
                y.q[(c * oh + r) * ow + col] = m;
            }
    return y;
}

QAct global_avg_pool_q(const QAct& x, QuantParams out) {
    const std::size_t channels = x.shape[0];
    const std::size_t per = x.q.size() / channels;
    QAct y{{channels}, std::vector<std::int8_t>(channels), out};
    const double m = x.p.scale / (static_cast<double>(per) * out.scale);
    for (std::size_t c = 0; c < channels; ++c) {
        std::int64_t acc = 0;
        for (std::size_t i = 0; i < per; ++i) acc += x.q[c * per + i] - x.p.zero_point;
        y.q[c] = requantize(static_cast<double>(acc), m, out.zero_point);
    }
    return y;
}

QAct relu_q(const QAct& x, QuantParams out) {
    QAct y{x.shape, std::vector<std::int8_t>(x.q.size()), out};
    const double m = x.p.scale / out.scale;
    for (std::size_t i = 0; i < x.q.size(); ++i)
        y.q[i] = requantize(std::max(0, x.q[i] - x.p.zero_point), m, out.zero_point, out.zero_point);
    return y;
}

std::vector<std::int8_t> add_q(std::span<const std::int8_t> a, QuantParams pa, std::span<const std::int8_t> b,
                               QuantParams pb, QuantParams out) {
    std::vector<std::int8_t> y(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double real = static_cast<double>(pa.scale) * (a[i] - pa.zero_point) +
                            static_cast<double>(pb.scale) * (b[i] - pb.zero_point);
        y[i] = requantize(real, 1.0 / out.scale, out.zero_point);
    }
    return y;
}

// Single token: the attention weight is exactly 1, so q and k do not affect
// the output and the value path goes straight to the output projection.
QAct transformer_q(const QuantModel& qm, const QAct& x, std::size_t layer, const std::vector<QuantTensor>& p) {
    const int li = static_cast<int>(layer);
    const QuantParams pv = qm.activation(li, nn::kTransformerValue);
    const QuantParams pa = qm.activation(li, nn::kTransformerAttention);
    const QuantParams ph = qm.activation(li, nn::kTransformerResidual1);
    const QuantParams pf1 = qm.activation(li, nn::kTransformerHidden);
    const QuantParams pf2 = qm.activation(li, nn::kTransformerFeedForward);
    const QuantParams po = qm.activation(li, nn::kOutput);

    const auto xc = centered(x.q, x.p.zero_point);
    const auto v = matvec(xc, x.p.scale, p[2], nullptr, pv, false);
    const auto a = matvec(centered(v, pv.zero_point), pv.scale, p[3], nullptr, pa, false);
    const auto h = add_q(x.q, x.p, a, pa, ph);
    const auto f1 = matvec(centered(h, ph.zero_point), ph.scale, p[4], nullptr, pf1, true);
    const auto f2 = matvec(centered(f1, pf1.zero_point), pf1.scale, p[5], nullptr, pf2, false);
    return {x.shape, add_q(h, ph, f2, pf2, po), po};
}

QAct fire1d_q(const QuantModel& qm, const QAct& x, std::size_t layer, const nn::LayerSpec& l,
              const std::vector<QuantTensor>& p) {
    const std::size_t n = x.shape[1];
    const auto& fc = l.fire;
    const std::size_t stride = l.has_bias ? 2 : 1;
    const auto bias = [&](std::size_t slot) { return l.has_bias ? &p[slot + 1] : nullptr; };
    const QuantParams ps = qm.activation(static_cast<int>(layer), nn::kFireSqueeze);
    const QuantParams po = qm.activation(static_cast<int>(layer), nn::kOutput);

    std::vector<std::int8_t> squeezed(fc.squeeze * n);
    conv1d_q(x.q, x.p, l.in_channels, n, p[0], bias(0), 1, nn::Padding::Same, n, ps, true, squeezed.data());
    QAct y{{fc.expand1 + fc.expand3, n}, std::vector<std::int8_t>((fc.expand1 + fc.expand3) * n), po};
    conv1d_q(squeezed, ps, fc.squeeze, n, p[stride], bias(stride), 1, nn::Padding::Same, n, po, true, y.q.data());
    conv1d_q(squeezed, ps, fc.squeeze, n, p[2 * stride], bias(2 * stride), 1, nn::Padding::Same, n, po, true,
             y.q.data() + fc.expand1 * n);
    return y;
}

class RangeRecorder final : public nn::ActivationObserver {
public:
    std::map<Boundary, Range> ranges;

    void observe(int layer, int site, std::span<const float> values) override {
        if (values.empty()) return;
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        const auto key = Boundary{layer, site};
        auto it = ranges.find(key);
        if (it == ranges.end()) {
            ranges.emplace(key, Range{*lo, *hi});
        } else {
            it->second.lo = std::min(it->second.lo, static_cast<double>(*lo));
            it->second.hi = std::max(it->second.hi, static_cast<double>(*hi));
        }
    }
};

bool passes_params_through(LayerKind kind) {
    return kind == LayerKind::MaxPool1D || kind == LayerKind::MaxPool2D || kind == LayerKind::Dropout ||
           kind == LayerKind::Reshape;
}

}  // namespace

std::int8_t quantize_value(double x, QuantParams p) noexcept {
    return saturate(std::round(x / static_cast<double>(p.scale)) + p.zero_point);
}

double dequantize_value(std::int8_t q, QuantParams p) noexcept {
    return static_cast<double>(p.scale) * (static_cast<int>(q) - p.zero_point);
}

QuantParams params_for_range(double lo, double hi) noexcept {
    if (lo == hi) return {1.0f, 0};
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    const auto scale = static_cast<float>((hi - lo) / 255.0);
    const double z = std::round(-128.0 - lo / static_cast<double>(scale));
    return {scale, static_cast<int>(std::clamp(z, -128.0, 127.0))};
}

QuantModel::QuantModel(nn::ModelGraph graph, std::map<std::size_t, std::vector<QuantTensor>> weights,
                       std::map<Boundary, QuantParams> activations)
    : graph_(std::move(graph)), weights_(std::move(weights)), activations_(std::move(activations)) {}

QuantParams QuantModel::activation(int layer, int site) const {
    const auto it = activations_.find({layer, site});
    if (it == activations_.end())
        throw Error(Errc::NotCalibrated, graph_.name() + ": no activation parameters for layer " +
                                             std::to_string(layer) + " site " + std::to_string(site));
    return it->second;
}

nn::WeightSet QuantModel::dequantized_weights() const {
    nn::WeightSet w;
    for (const auto& [layer, tensors] : weights_)
        for (const auto& qt : tensors) {
            nn::Tensor t(qt.shape);
            for (std::size_t i = 0; i < t.data.size(); ++i)
                t.data[i] = static_cast<float>(dequantize_value(qt.values[i], qt.params));
            w.layers[layer].push_back(std::move(t));
        }
    return w;
}

QuantTensor quantize_tensor(const nn::Tensor& t) {
    QuantTensor q;
    q.shape = t.shape;
    if (!t.data.empty()) {
        const auto [lo, hi] = std::minmax_element(t.data.begin(), t.data.end());
        q.params = params_for_range(*lo, *hi);
    }
    q.values.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) q.values[i] = quantize_value(t.data[i], q.params);
    return q;
}

QuantModel quantize_weights(const nn::ModelGraph& model, const nn::WeightSet& weights) {
    nn::validate_weights(model, weights);
    std::map<std::size_t, std::vector<QuantTensor>> q;
    for (const auto& [layer, tensors] : weights.layers)
        for (const auto& t : tensors) q[layer].push_back(quantize_tensor(t));
    return QuantModel(model, std::move(q), {});
}

std::map<Boundary, Range> record_ranges(const nn::ModelGraph& model, const nn::WeightSet& weights,
                                        std::span<const nn::Tensor> inputs) {
    nn::validate_weights(model, weights);
    RangeRecorder recorder;
    for (const auto& x : inputs) nn::run(model, weights, x, 0, model.layers().size(), &recorder);
    return recorder.ranges;
}

QuantModel calibrate(const nn::ModelGraph& model, const nn::WeightSet& weights,
                     std::span<const nn::Tensor> calib_inputs) {
    if (calib_inputs.empty()) throw Error(Errc::EmptyCalibrationSet, "calibration needs at least one input");
    const auto ranges = record_ranges(model, weights, calib_inputs);
    std::map<Boundary, QuantParams> act;
    for (const auto& [key, r] : ranges) act[key] = params_for_range(r.lo, r.hi);
    // Layers that only move or select values keep their input's parameters.
    for (std::size_t i = 0; i < model.layers().size(); ++i)
        if (passes_params_through(model.layers()[i].kind))
            act[{static_cast<int>(i), nn::kOutput}] = act.at({static_cast<int>(i) - 1, nn::kOutput});
    QuantModel weights_only = quantize_weights(model, weights);
    return QuantModel(model, weights_only.weights(), std::move(act));
}

std::array<float, 2> quantized_logits(const QuantModel& qm, const nn::Tensor& input) {
    const nn::ModelGraph& g = qm.graph();
    if (!qm.calibrated()) throw Error(Errc::NotCalibrated, g.name() + " has no calibrated activation parameters");
    if (!g.is_classifier()) throw Error(Errc::InvalidGraph, g.name() + " has no 2-class softmax head");
    if (input.shape != g.input_shape())
        throw Error(Errc::ShapeMismatch, g.name() + " expects " + nn::shape_string(g.input_shape()) + " input, got " +
                                             nn::shape_string(input.shape));

    QAct x{input.shape, std::vector<std::int8_t>(input.size()), qm.activation(-1)};
    for (std::size_t i = 0; i < input.size(); ++i) x.q[i] = quantize_value(input.data[i], x.p);

    const auto& layers = g.layers();
    const auto no_weights = std::vector<QuantTensor>{};
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        const nn::LayerSpec& l = layers[i];
        const nn::Shape& out_shape = g.shape_after(i);
        const auto wit = qm.weights().find(i);
        const auto& p = wit != qm.weights().end() ? wit->second : no_weights;
        const int li = static_cast<int>(i);
        switch (l.kind) {
            case LayerKind::Conv1D: {
                const QuantParams out = qm.activation(li);
                QAct y{out_shape, std::vector<std::int8_t>(nn::element_count(out_shape)), out};
                conv1d_q(x.q, x.p, x.shape[0], x.shape[1], p[0], l.has_bias ? &p[1] : nullptr, l.stride, l.padding,
                         out_shape[1], out, false, y.q.data());
                x = std::move(y);
                break;
            }
            case LayerKind::Conv2D: x = conv2d_q(x, l, out_shape, p, qm.activation(li)); break;
            case LayerKind::MaxPool1D: x = maxpool1d_q(x, l, out_shape); break;
            case LayerKind::MaxPool2D: x = maxpool2d_q(x, l, out_shape); break;
            case LayerKind::GlobalAvgPool: x = global_avg_pool_q(x, qm.activation(li)); break;
            case LayerKind::FullyConnected: {
                const QuantParams out = qm.activation(li);
                const auto xc = centered(x.q, x.p.zero_point);
                x = QAct{out_shape, matvec(xc, x.p.scale, p[0], l.has_bias ? &p[1] : nullptr, out, false), out};
                break;
            }
            case LayerKind::ReLU: x = relu_q(x, qm.activation(li)); break;
            case LayerKind::Dropout: break;
            case LayerKind::Reshape: x.shape = out_shape; break;
            case LayerKind::SingleHeadTransformer: x = transformer_q(qm, x, i, p); break;
            case LayerKind::Fire1D: x = fire1d_q(qm, x, i, l, p); break;
            case LayerKind::Softmax: throw Error(Errc::InvalidGraph, "Softmax before the final layer");
        }
    }
    return {static_cast<float>(dequantize_value(x.q[0], x.p)), static_cast<float>(dequantize_value(x.q[1], x.p))};
}

std::array<float, 2> quantized_forward(const QuantModel& qm, const nn::Tensor& input) {
    const auto logits = quantized_logits(qm, input);
    const auto probs = nn::softmax(logits);
    return {probs[0], probs[1]};
}

double boundary_scale_sum(const QuantModel& qm) {
    double total = 0.0;
    for (const auto& [key, p] : qm.activations()) total += p.scale;
    return total;
}

void save_quant_model(const QuantModel& qm, const std::filesystem::path& path) {
    if (!qm.calibrated()) throw Error(Errc::NotCalibrated, qm.graph().name() + " is not calibrated");
    nn::Container c;
    c.model = qm.graph().name();
    for (std::size_t i = 0; i < qm.graph().layers().size(); ++i) {
        const auto slots = nn::parameter_slots(qm.graph().layers()[i]);
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const QuantTensor& qt = qm.weights().at(i).at(s);
            nn::StoredTensor st;
            st.layer = i;
            st.name = slots[s].name;
            st.shape = qt.shape;
            st.dtype = nn::DType::I8;
            st.bytes.resize(qt.values.size());
            std::memcpy(st.bytes.data(), qt.values.data(), qt.values.size());
            st.quant = nn::QuantTag{qt.params.scale, qt.params.zero_point};
            c.tensors.push_back(std::move(st));
        }
    }
    json act = json::array();
    for (const auto& [key, p] : qm.activations())
        act.push_back({{"layer", key.first}, {"site", key.second}, {"scale", p.scale}, {"zero_point", p.zero_point}});
    c.metadata_json = json{{"activations", act}}.dump();
    nn::write_container(path, qm.graph(), c);
}

QuantModel load_quant_model(const nn::ModelGraph& model, const std::filesystem::path& path) {
    const nn::Container c = nn::read_container(path);
    nn::check_container(model, c);
    std::map<std::size_t, std::vector<QuantTensor>> weights;
    for (const auto& st : c.tensors) {
        if (st.dtype != nn::DType::I8 || !st.quant)
            throw Error(Errc::UnsupportedEncoding, path.string() + ": " + st.name + " is not an int8 tensor");
        QuantTensor qt;
        qt.shape = st.shape;
        qt.values.resize(st.bytes.size());
        std::memcpy(qt.values.data(), st.bytes.data(), st.bytes.size());
        qt.params = {st.quant->scale, st.quant->zero_point};
        weights[st.layer].push_back(std::move(qt));
    }
    std::map<Boundary, QuantParams> act;
    try {
        const json meta = json::parse(c.metadata_json);
        for (const auto& a : meta.at("activations"))
            act[{a.at("layer").get<int>(), a.at("site").get<int>()}] =
                QuantParams{a.at("scale").get<float>(), a.at("zero_point").get<int>()};
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedHeader, path.string() + ": activation parameters: " + e.what());
    }
    return QuantModel(model, std::move(weights), std::move(act));
}

}  // namespace tinychirp::quant
