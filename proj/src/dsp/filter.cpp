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
#include <numbers>

#include "tinychirp/dsp.hpp"
#include "tinychirp/error.hpp"

namespace tinychirp::dsp {

using cplx = std::complex<double>;

std::complex<double> FilterSOS::response(std::complex<double> z) const {
    const cplx zi = 1.0 / z;
    const cplx zi2 = zi * zi;
    cplx h{1.0, 0.0};
    for (const auto& s : sections) h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
    return h;
}

double FilterSOS::magnitude_at(double freq_hz) const {
    using lcplx = std::complex<long double>;
    const long double w = 2.0L * std::numbers::pi_v<long double> * freq_hz / design.sample_rate_hz;
    const lcplx zi = std::polar(1.0L, -w);
    const lcplx zi2 = zi * zi;
    lcplx h{1.0L, 0.0L};
    for (const auto& s : sections) {
        const lcplx num = static_cast<long double>(s.b0) + static_cast<long double>(s.b1) * zi +
                          static_cast<long double>(s.b2) * zi2;
        const lcplx den = 1.0L + static_cast<long double>(s.a1) * zi + static_cast<long double>(s.a2) * zi2;
        h *= num / den;
    }
    return static_cast<double>(std::abs(h));
}

FilterSOS design_butterworth_highpass(int order, double cutoff_hz, int sample_rate_hz) {
    if (order < 1) throw Error(Errc::InvalidConfig, "filter order must be >= 1");
    if (sample_rate_hz <= 0 || !(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate_hz / 2.0))
        throw Error(Errc::InvalidCutoff, "cutoff " + std::to_string(cutoff_hz) + " Hz outside (0, fs/2)");

    const double fs2 = 2.0 * sample_rate_hz;
    const double warped = fs2 * std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);

    // Upper-half-plane analog prototype poles plus the real pole for odd
    // orders; the conjugates are implied by the real-coefficient sections.
    FilterSOS sos;
    sos.design = {order, cutoff_hz, sample_rate_hz};
    const auto to_digital = [&](cplx prototype_pole) {
        const cplx hp = warped / prototype_pole;  // s -> wc / s
        return (fs2 + hp) / (fs2 - hp);
    };

    for (int k = 1; k <= order / 2; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + order - 1.0) / (2.0 * order);
        const cplx zp = to_digital(std::polar(1.0, theta));
        Biquad s;
        s.a1 = -2.0 * zp.real();
        s.a2 = std::norm(zp);
        // Double zero at z = 1; scale for unit gain at z = -1.
        const double gain = (1.0 - s.a1 + s.a2) / 4.0;
        s.b0 = gain;
        s.b1 = -2.0 * gain;
        s.b2 = gain;
        sos.sections.push_back(s);
    }
    if (order % 2 == 1) {
        const double zp = to_digital(cplx{-1.0, 0.0}).real();
        Biquad s;
        s.a1 = -zp;
        const double gain = (1.0 + zp) / 2.0;
        s.b0 = gain;
        s.b1 = -gain;
        sos.sections.push_back(s);
    }
    // Lowest-Q sections first.
    std::stable_sort(sos.sections.begin(), sos.sections.end(),
                     [](const Biquad& a, const Biquad& b) { return a.a2 < b.a2; });
    return sos;
}

FilterState::FilterState(const FilterSOS& filter)
    : filter_(&filter), z1_(filter.sections.size(), 0.0), z2_(filter.sections.size(), 0.0) {}

float FilterState::process(float x) {
    double v = x;
    const auto& sections = filter_->sections;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        const Biquad& s = sections[i];
        const double y = s.b0 * v + z1_[i];
        z1_[i] = s.b1 * v - s.a1 * y + z2_[i];
        z2_[i] = s.b2 * v - s.a2 * y;
        v = y;
    }
    return static_cast<float>(v);
}

void FilterState::process(std::span<const float> in, std::span<float> out) {
    for (std::size_t n = 0; n < in.size(); ++n) out[n] = process(in[n]);
}

void FilterState::reset() {
    std::fill(z1_.begin(), z1_.end(), 0.0);
    std::fill(z2_.begin(), z2_.end(), 0.0);
}

audio::AudioSegment filter_apply(const FilterSOS& filter, const audio::AudioSegment& segment) {
    if (segment.sample_rate != filter.design.sample_rate_hz)
        throw Error(Errc::SampleRateMismatch, "segment at " + std::to_string(segment.sample_rate) +
                                                  " Hz, filter designed for " +
                                                  std::to_string(filter.design.sample_rate_hz) + " Hz");
    audio::AudioSegment out = segment;
    FilterState state(filter);
    state.process(segment.samples, out.samples);
    return out;
}

}  // namespace tinychirp::dsp
