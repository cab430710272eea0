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
#include <algorithm>
#include <cmath>
#include <limits>

#include "tinychirp/error.hpp"
#include "tinychirp/kernels.hpp"
#include "tinychirp/nn.hpp"

namespace tinychirp::nn {
namespace {

std::size_t leading_pad(std::size_t n, std::size_t out, std::size_t kernel, std::size_t stride, Padding padding) {
    if (padding == Padding::Valid) return 0;
    const std::size_t needed = (out - 1) * stride + kernel;
    return needed > n ? (needed - n) / 2 : 0;
}

// out[c][n] = bias[c] + sum_i sum_t w[c][i][t] * x[i][n * stride + t - pad]
void conv1d_into(const float* x, std::size_t in_ch, std::size_t n, const float* w, const float* bias,
                 std::size_t out_ch, std::size_t kernel, std::size_t stride, Padding padding, float* out,
                 std::size_t out_len) {
    const auto& k = kernels::active();
    const auto pad = static_cast<std::ptrdiff_t>(leading_pad(n, out_len, kernel, stride, padding));
    for (std::size_t c = 0; c < out_ch; ++c) {
        float* orow = out + c * out_len;
        std::fill(orow, orow + out_len, bias != nullptr ? bias[c] : 0.0f);
        for (std::size_t i = 0; i < in_ch; ++i) {
            const float* xrow = x + i * n;
            const float* wrow = w + (c * in_ch + i) * kernel;
            for (std::size_t t = 0; t < kernel; ++t) {
                const auto shift = static_cast<std::ptrdiff_t>(t) - pad;
                if (stride == 1) {
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
                    const std::ptrdiff_t hi =
                        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_len), static_cast<std::ptrdiff_t>(n) - shift);
                    if (hi > lo) k.axpy(wrow[t], xrow + lo + shift, orow + lo, static_cast<std::size_t>(hi - lo));
                } else {
                    for (std::size_t o = 0; o < out_len; ++o) {
                        const auto idx = static_cast<std::ptrdiff_t>(o * stride) + shift;
                        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n)) orow[o] += wrow[t] * xrow[idx];
                    }
                }
            }
        }
    }
}

Tensor conv1d(const Tensor& x, const LayerSpec& l, const Shape& out_shape, const std::vector<Tensor>& p) {
    Tensor out(out_shape);
    conv1d_into(x.data.data(), x.shape[0], x.shape[1], p[0].data.data(), l.has_bias ? p[1].data.data() : nullptr,
                l.out_channels, l.kernel, l.stride, l.padding, out.data.data(), out_shape[1]);
    return out;
}

Tensor conv2d(const Tensor& x, const LayerSpec& l, const Shape& out_shape, const std::vector<Tensor>& p) {
    const auto& k = kernels::active();
    const std::size_t in_ch = x.shape[0], h = x.shape[1], w = x.shape[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2], kk = l.kernel;
    const auto pad_t = static_cast<std::ptrdiff_t>(leading_pad(h, oh, kk, l.stride, l.padding));
    const auto pad_l = static_cast<std::ptrdiff_t>(leading_pad(w, ow, kk, l.stride, l.padding));
    const float* weights = p[0].data.data();
    Tensor out(out_shape);
    for (std::size_t c = 0; c < l.out_channels; ++c) {
        float* oplane = out.data.data() + c * oh * ow;
        std::fill(oplane, oplane + oh * ow, l.has_bias ? p[1].data[c] : 0.0f);
        for (std::size_t i = 0; i < in_ch; ++i) {
            const float* xplane = x.data.data() + i * h * w;
            for (std::size_t kh = 0; kh < kk; ++kh) {
                for (std::size_t kw = 0; kw < kk; ++kw) {
                    const float wv = weights[((c * in_ch + i) * kk + kh) * kk + kw];
                    const auto dx = static_cast<std::ptrdiff_t>(kw) - pad_l;
                    for (std::size_t r = 0; r < oh; ++r) {
                        const auto src_r = static_cast<std::ptrdiff_t>(r * l.stride + kh) - pad_t;
                        if (src_r < 0 || src_r >= static_cast<std::ptrdiff_t>(h)) continue;
                        const float* xrow = xplane + static_cast<std::size_t>(src_r) * w;
                        float* orow = oplane + r * ow;
                        if (l.stride == 1) {
                            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -dx);
                            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ow),
                                                                               static_cast<std::ptrdiff_t>(w) - dx);
                            if (hi > lo) k.axpy(wv, xrow + lo + dx, orow + lo, static_cast<std::size_t>(hi - lo));
                        } else {
                            for (std::size_t col = 0; col < ow; ++col) {
                                const auto src_c = static_cast<std::ptrdiff_t>(col * l.stride) + dx;
                                if (src_c >= 0 && src_c < static_cast<std::ptrdiff_t>(w)) orow[col] += wv * xrow[src_c];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor maxpool1d(const Tensor& x, const LayerSpec& l, const Shape& out_shape) {
    Tensor out(out_shape);
    const std::size_t n = x.shape[1], on = out_shape[1];
    for (std::size_t c = 0; c < x.shape[0]; ++c)
        for (std::size_t o = 0; o < on; ++o) {
            const float* src = x.data.data() + c * n + o * l.pool;
            out.data[c * on + o] = *std::max_element(src, src + l.pool);
        }
    return out;
}

Tensor maxpool2d(const Tensor& x, const LayerSpec& l, const Shape& out_shape) {
    Tensor out(out_shape);
    const std::size_t h = x.shape[1], w = x.shape[2], oh = out_shape[1], ow = out_shape[2];
    for (std::size_t c = 0; c < x.shape[0]; ++c)
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t col = 0; col < ow; ++col) {
                float m = -std::numeric_limits<float>::infinity();
                for (std::size_t dr = 0; dr < l.pool; ++dr)
                    for (std::size_t dc = 0; dc < l.pool; ++dc)
                        m = std::max(m, x.data[(c * h + r * l.pool + dr) * w + col * l.pool + dc]);
                out.data[(c * oh + r) * ow + col] = m;
            }
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    const std::size_t channels = x.shape[0];
    const std::size_t per = x.size() / channels;
    Tensor out({channels});
    for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < per; ++i) acc += x.data[c * per + i];
        out.data[c] = static_cast<float>(acc / static_cast<double>(per));
    }
    return out;
}

void matvec(const float* w, const float* bias, std::size_t out_n, std::size_t in_n, const float* x, float* y) {
    const auto& k = kernels::active();
    for (std::size_t o = 0; o < out_n; ++o) y[o] = k.dot(w + o * in_n, x, in_n) + (bias != nullptr ? bias[o] : 0.0f);
}

Tensor fully_connected(const Tensor& x, const LayerSpec& l, const std::vector<Tensor>& p) {
    Tensor out({l.out_channels});
    matvec(p[0].data.data(), l.has_bias ? p[1].data.data() : nullptr, l.out_channels, l.in_channels, x.data.data(),
           out.data.data());
    return out;
}

void report(ActivationObserver* observer, int layer, int site, std::span<const float> values) {
    if (observer != nullptr) observer->observe(layer, site, values);
}

// Single token: the attention distribution is softmax over one logit, i.e. 1.
Tensor transformer(const Tensor& x, const LayerSpec& l, const std::vector<Tensor>& p, int layer,
                   ActivationObserver* observer) {
    const std::size_t d = l.dim;
    std::vector<float> q(d), key(d), v(d), attn(d), a(d), h(d), f1(d), f2(d);
    matvec(p[0].data.data(), nullptr, d, d, x.data.data(), q.data());
    matvec(p[1].data.data(), nullptr, d, d, x.data.data(), key.data());
    matvec(p[2].data.data(), nullptr, d, d, x.data.data(), v.data());
    report(observer, layer, kTransformerValue, v);

    const float logit = kernels::active().dot(q.data(), key.data(), d) / std::sqrt(static_cast<float>(d));
    const std::vector<float> weight = softmax(std::span<const float>(&logit, 1));
    for (std::size_t i = 0; i < d; ++i) attn[i] = weight[0] * v[i];

    matvec(p[3].data.data(), nullptr, d, d, attn.data(), a.data());
    report(observer, layer, kTransformerAttention, a);
    for (std::size_t i = 0; i < d; ++i) h[i] = x.data[i] + a[i];
    report(observer, layer, kTransformerResidual1, h);

    matvec(p[4].data.data(), nullptr, d, d, h.data(), f1.data());
    kernels::active().relu(f1.data(), d);
    report(observer, layer, kTransformerHidden, f1);
    matvec(p[5].data.data(), nullptr, d, d, f1.data(), f2.data());
    report(observer, layer, kTransformerFeedForward, f2);

    Tensor out({d});
    for (std::size_t i = 0; i < d; ++i) out.data[i] = h[i] + f2[i];
    return out;
}

Tensor fire1d(const Tensor& x, const LayerSpec& l, const std::vector<Tensor>& p, int layer,
              ActivationObserver* observer) {
    const std::size_t n = x.shape[1];
    const auto& fc = l.fire;
    const std::size_t stride = l.has_bias ? 2 : 1;
    const auto bias = [&](std::size_t slot) { return l.has_bias ? p[slot + 1].data.data() : nullptr; };

    Tensor squeezed({fc.squeeze, n});
    conv1d_into(x.data.data(), l.in_channels, n, p[0].data.data(), bias(0), fc.squeeze, 1, 1, Padding::Same,
                squeezed.data.data(), n);
    kernels::active().relu(squeezed.data.data(), squeezed.size());
    report(observer, layer, kFireSqueeze, squeezed.data);

    Tensor out({fc.expand1 + fc.expand3, n});
    conv1d_into(squeezed.data.data(), fc.squeeze, n, p[stride].data.data(), bias(stride), fc.expand1, 1, 1,
                Padding::Same, out.data.data(), n);
    conv1d_into(squeezed.data.data(), fc.squeeze, n, p[2 * stride].data.data(), bias(2 * stride), fc.expand3, 3, 1,
                Padding::Same, out.data.data() + fc.expand1 * n, n);
    kernels::active().relu(out.data.data(), out.size());
    return out;
}

}  // namespace

std::vector<float> softmax(std::span<const float> logits) {
    std::vector<float> out(logits.size());
    if (logits.empty()) return out;
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    std::vector<double> e(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) sum += (e[i] = std::exp(static_cast<double>(logits[i]) - m));
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(e[i] / sum);
    return out;
}

Tensor run(const ModelGraph& model, const WeightSet& weights, Tensor x, std::size_t begin, std::size_t end,
           ActivationObserver* observer) {
    if (begin > end || end > model.layers().size()) throw Error(Errc::InvalidGraph, "invalid layer range");
    if (x.shape != model.shape_before(begin))
        throw Error(Errc::ShapeMismatch, model.name() + " expects " + shape_string(model.shape_before(begin)) +
                                             " input, got " + shape_string(x.shape));
    if (begin == 0) report(observer, -1, kOutput, x.data);

    for (std::size_t i = begin; i < end; ++i) {
        const LayerSpec& l = model.layers()[i];
        const Shape& out_shape = model.shape_after(i);
        const int idx = static_cast<int>(i);
        switch (l.kind) {
            case LayerKind::Conv1D: x = conv1d(x, l, out_shape, weights.at(i)); break;
            case LayerKind::Conv2D: x = conv2d(x, l, out_shape, weights.at(i)); break;
            case LayerKind::MaxPool1D: x = maxpool1d(x, l, out_shape); break;
            case LayerKind::MaxPool2D: x = maxpool2d(x, l, out_shape); break;
            case LayerKind::GlobalAvgPool: x = global_avg_pool(x); break;
            case LayerKind::FullyConnected: x = fully_connected(x, l, weights.at(i)); break;
            case LayerKind::ReLU: kernels::active().relu(x.data.data(), x.size()); break;
            case LayerKind::Softmax: x.data = softmax(x.data); break;
            case LayerKind::Dropout: break;
            case LayerKind::SingleHeadTransformer: x = transformer(x, l, weights.at(i), idx, observer); break;
            case LayerKind::Fire1D: x = fire1d(x, l, weights.at(i), idx, observer); break;
            case LayerKind::Reshape: x.shape = out_shape; break;
        }
        report(observer, idx, kOutput, x.data);
    }
    return x;
}

std::array<float, 2> forward(const ModelGraph& model, const WeightSet& weights, const Tensor& input,
                             ActivationObserver* observer) {
    if (!model.is_classifier()) throw Error(Errc::InvalidGraph, model.name() + " has no 2-class softmax head");
    validate_weights(model, weights);
    const Tensor out = run(model, weights, input, 0, model.layers().size(), observer);
    return {out.data[0], out.data[1]};
}

}  // namespace tinychirp::nn
