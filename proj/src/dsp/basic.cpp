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

#include "tinychirp/dsp.hpp"
#include "tinychirp/error.hpp"
#include "tinychirp/kernels.hpp"

namespace tinychirp::dsp {

audio::AudioSegment minmax_normalize(const audio::AudioSegment& segment) {
    audio::AudioSegment out = segment;
    if (segment.samples.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(segment.samples.begin(), segment.samples.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) {
        std::fill(out.samples.begin(), out.samples.end(), 0.0f);
        return out;
    }
    const double range = hi - lo;
    for (auto& s : out.samples) s = static_cast<float>((static_cast<double>(s) - lo) / range);
    return out;
}

audio::AudioSignal downsample_zoh(const audio::AudioSignal& signal, int dst_rate) {
    if (dst_rate <= 0) throw Error(Errc::InvalidConfig, "destination rate must be positive");
    if (dst_rate > signal.sample_rate)
        throw Error(Errc::UpsampleRequested, "cannot resample " + std::to_string(signal.sample_rate) + " Hz to " +
                                                 std::to_string(dst_rate) + " Hz");
    if (dst_rate == signal.sample_rate) return signal;

    const auto channels = static_cast<std::size_t>(signal.channels);
    const std::size_t in_frames = signal.frames();
    const auto src = static_cast<std::uint64_t>(signal.sample_rate);
    const auto dst = static_cast<std::uint64_t>(dst_rate);
    const std::size_t out_frames = static_cast<std::size_t>(in_frames * dst / src);

    audio::AudioSignal out;
    out.sample_rate = dst_rate;
    out.channels = signal.channels;
    out.samples.resize(out_frames * channels);
    for (std::size_t k = 0; k < out_frames; ++k) {
        const std::size_t idx = static_cast<std::size_t>(k * src / dst);
        for (std::size_t c = 0; c < channels; ++c) out.samples[k * channels + c] = signal.samples[idx * channels + c];
    }
    return out;
}

PowerReading signal_power(std::span<const float> samples) {
    if (samples.empty()) throw Error(Errc::EmptySegment, "signal power of an empty segment");
    const double energy = kernels::active().sum_squares(samples.data(), samples.size());
    return {energy / static_cast<double>(samples.size()), samples.size()};
}

PowerReading signal_power(const audio::AudioSegment& segment) { return signal_power(segment.samples); }

}  // namespace tinychirp::dsp
