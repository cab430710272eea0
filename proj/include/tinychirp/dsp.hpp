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

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tinychirp/audio_io.hpp"

namespace tinychirp::dsp {

// ---------------------------------------------------------------------------
// Time-domain helpers
// ---------------------------------------------------------------------------

/// Affine map of the segment onto [0, 1]. A constant segment maps to zeros.
audio::AudioSegment minmax_normalize(const audio::AudioSegment& segment);

/// Zero-order-hold decimation: out[k] = in[floor(k * src / dst)] per channel.
/// Throws Error{UpsampleRequested} when dst_rate exceeds the source rate.
audio::AudioSignal downsample_zoh(const audio::AudioSignal& signal, int dst_rate);

struct PowerReading {
    double p = 0.0;
    std::size_t n = 0;
};

/// Mean squared amplitude. Throws Error{EmptySegment}.
PowerReading signal_power(std::span<const float> samples);
PowerReading signal_power(const audio::AudioSegment& segment);

// ---------------------------------------------------------------------------
// IIR filtering
// ---------------------------------------------------------------------------

struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct FilterDesign {
    int order = 0;
    double cutoff_hz = 0.0;
    int sample_rate_hz = 0;
};

struct FilterSOS {
    std::vector<Biquad> sections;
    FilterDesign design;

    /// H(z) of the cascade evaluated at z.
    std::complex<double> response(std::complex<double> z) const;
    /// |H(e^{j 2 pi f / fs})|
    double magnitude_at(double freq_hz) const;
};

/// Digital Butterworth high-pass as cascaded second-order sections: analog
/// prototype poles, low-to-high-pass transform, bilinear transform with the
/// cutoff prewarped, unit gain at Nyquist. Odd orders end in one first-order
/// section (b2 = a2 = 0). Throws Error{InvalidCutoff}.
FilterSOS design_butterworth_highpass(int order, double cutoff_hz, int sample_rate_hz);

/// Per-stream delay line for a FilterSOS (transposed direct form II).
class FilterState {
public:
    explicit FilterState(const FilterSOS& filter);

    float process(float x);
    void process(std::span<const float> in, std::span<float> out);
    void reset();

private:
    const FilterSOS* filter_;
    std::vector<double> z1_;
    std::vector<double> z2_;
};

/// Causal filtering with zero initial state, output has the input's length.
/// Throws Error{SampleRateMismatch} if the segment rate differs from the design.
audio::AudioSegment filter_apply(const FilterSOS& filter, const audio::AudioSegment& segment);

// ---------------------------------------------------------------------------
// Spectral features
// ---------------------------------------------------------------------------

inline constexpr std::size_t kFftSize = 1024;
inline constexpr std::size_t kHopSize = 256;
inline constexpr std::size_t kFftBins = kFftSize / 2 + 1;
inline constexpr std::size_t kMelBands = 80;
inline constexpr double kMelFminHz = 80.0;
inline constexpr double kMelFmaxHz = 8000.0;
inline constexpr double kLogFloor = 1e-10;

/// Row-major frames x bins matrix.
struct Spectrogram {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<float> values;

    float at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
    float& at(std::size_t frame, std::size_t bin) { return values[frame * bins + bin]; }
};

/// Row-major frames x n_mels log10 magnitudes.
struct MelSpectrogram {
    std::size_t frames = 0;
    std::size_t mels = 0;
    std::vector<float> values;

    float at(std::size_t frame, std::size_t mel) const { return values[frame * mels + mel]; }
};

/// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / length).
std::vector<double> hann_window(std::size_t length);

/// Magnitude STFT: Hann(1024) frames every 256 samples, no padding, so
/// frames = floor((N - 1024) / 256) + 1. Throws Error{SegmentTooShort}.
Spectrogram stft_magnitude(std::span<const float> samples);
Spectrogram stft_magnitude(const audio::AudioSegment& segment);

double hz_to_mel(double hz) noexcept;
double mel_to_hz(double mel) noexcept;

struct MelFilterbank {
    std::size_t mels = 0;
    std::size_t bins = 0;
    std::vector<float> weights;      // mels x bins, row-major
    std::vector<double> centers_hz;  // per band
};

/// Unnormalised triangular filters with HTK mel spacing between fmin and
/// fmax. Throws Error{InvalidRange}.
MelFilterbank mel_filterbank(std::size_t n_mels = kMelBands, double fmin_hz = kMelFminHz,
                             double fmax_hz = kMelFmaxHz, int sample_rate_hz = 16000,
                             std::size_t n_fft = kFftSize);

/// log10(max(fb * spec^T, 1e-10))^T. Throws Error{ShapeMismatch}.
MelSpectrogram log_mel(const Spectrogram& spec, const MelFilterbank& fb);

/// Full preprocessing chain for the spectrogram model.
MelSpectrogram log_mel(const audio::AudioSegment& segment);

/// Elementwise mean of the segments' magnitude spectrograms.
/// Throws Error{EmptyList} or Error{ShapeMismatch}.
Spectrogram average_stft(std::span<const audio::AudioSegment> segments);

// Export helpers: CSV (one row per frame) and a raw little-endian float32
// matrix prefixed by {"TCSP", u32 rows, u32 cols, u32 reserved}.
void write_matrix_csv(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const float> values);
void write_matrix_tcsp(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                       std::span<const float> values);
std::vector<float> read_matrix_tcsp(const std::filesystem::path& path, std::size_t& rows, std::size_t& cols);

}  // namespace tinychirp::dsp
