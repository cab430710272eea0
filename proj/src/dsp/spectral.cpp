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
#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>

#include "tinychirp/dsp.hpp"
#include "tinychirp/error.hpp"

namespace tinychirp::dsp {
namespace {

struct FftwDeleter {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
    return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

// One shared r2c plan for kFftSize. Planning is not thread-safe in FFTW, so
// it happens once; fftw_execute_dft_r2c on fresh, fftw_malloc'd arrays is.
fftw_plan shared_plan() {
    static std::once_flag once;
    static fftw_plan plan = nullptr;
    std::call_once(once, [] {
        auto in = fftw_alloc<double>(kFftSize);
        auto out = fftw_alloc<fftw_complex>(kFftBins);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), in.get(), out.get(), FFTW_ESTIMATE);
    });
    return plan;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>((v >> 8) & 0xFF),
                                static_cast<unsigned char>((v >> 16) & 0xFF),
                                static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4] = {};
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::vector<double> hann_window(std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t n = 0; n < length; ++n)
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
    return w;
}

Spectrogram stft_magnitude(std::span<const float> samples) {
    if (samples.size() < kFftSize)
        throw Error(Errc::SegmentTooShort, std::to_string(samples.size()) + " samples, need at least " +
                                               std::to_string(kFftSize));
    static const std::vector<double> window = hann_window(kFftSize);

    Spectrogram spec;
    spec.frames = (samples.size() - kFftSize) / kHopSize + 1;
    spec.bins = kFftBins;
    spec.values.resize(spec.frames * spec.bins);

    const fftw_plan plan = shared_plan();
    auto in = fftw_alloc<double>(kFftSize);
    auto out = fftw_alloc<fftw_complex>(kFftBins);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const float* frame = samples.data() + f * kHopSize;
        for (std::size_t n = 0; n < kFftSize; ++n) in[n] = window[n] * frame[n];
        fftw_execute_dft_r2c(plan, in.get(), out.get());
        for (std::size_t k = 0; k < kFftBins; ++k)
            spec.at(f, k) = static_cast<float>(std::hypot(out[k][0], out[k][1]));
    }
    return spec;
}

Spectrogram stft_magnitude(const audio::AudioSegment& segment) { return stft_magnitude(segment.samples); }

double hz_to_mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) noexcept { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(std::size_t n_mels, double fmin_hz, double fmax_hz, int sample_rate_hz,
                             std::size_t n_fft) {
    if (n_mels == 0 || n_fft < 2 || sample_rate_hz <= 0 || !(fmin_hz >= 0.0) || !(fmin_hz < fmax_hz) ||
        fmax_hz > sample_rate_hz / 2.0)
        throw Error(Errc::InvalidRange, "mel range [" + std::to_string(fmin_hz) + ", " + std::to_string(fmax_hz) +
                                            "] Hz invalid for " + std::to_string(sample_rate_hz) + " Hz");

    MelFilterbank fb;
    fb.mels = n_mels;
    fb.bins = n_fft / 2 + 1;
    fb.weights.assign(fb.mels * fb.bins, 0.0f);

    const double mel_lo = hz_to_mel(fmin_hz);
    const double mel_hi = hz_to_mel(fmax_hz);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    fb.centers_hz.resize(n_mels);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double left = edges[m];
        const double center = edges[m + 1];
        const double right = edges[m + 2];
        fb.centers_hz[m] = center;
        for (std::size_t k = 0; k < fb.bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n_fft);
            const double rise = (f - left) / (center - left);
            const double fall = (right - f) / (right - center);
            fb.weights[m * fb.bins + k] = static_cast<float>(std::max(0.0, std::min(rise, fall)));
        }
    }
    return fb;
}

MelSpectrogram log_mel(const Spectrogram& spec, const MelFilterbank& fb) {
    if (spec.bins != fb.bins)
        throw Error(Errc::ShapeMismatch, "spectrogram has " + std::to_string(spec.bins) + " bins, filterbank expects " +
                                             std::to_string(fb.bins));
    MelSpectrogram mel;
    mel.frames = spec.frames;
    mel.mels = fb.mels;
    mel.values.resize(mel.frames * mel.mels);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const float* row = spec.values.data() + f * spec.bins;
        for (std::size_t m = 0; m < fb.mels; ++m) {
            const float* w = fb.weights.data() + m * fb.bins;
            double acc = 0.0;
            for (std::size_t k = 0; k < fb.bins; ++k) acc += static_cast<double>(w[k]) * static_cast<double>(row[k]);
            mel.values[f * mel.mels + m] = static_cast<float>(std::log10(std::max(acc, kLogFloor)));
        }
    }
    return mel;
}

MelSpectrogram log_mel(const audio::AudioSegment& segment) {
    static const MelFilterbank fb = mel_filterbank(kMelBands, kMelFminHz, kMelFmaxHz, 16000, kFftSize);
    if (segment.sample_rate != 16000)
        throw Error(Errc::SampleRateMismatch, "log-mel features expect 16 kHz input");
    return log_mel(stft_magnitude(segment), fb);
}

Spectrogram average_stft(std::span<const audio::AudioSegment> segments) {
    if (segments.empty()) throw Error(Errc::EmptyList, "average_stft needs at least one segment");
    const std::size_t len = segments.front().samples.size();
    Spectrogram first = stft_magnitude(segments.front());
    std::vector<double> acc(first.values.begin(), first.values.end());
    for (std::size_t i = 1; i < segments.size(); ++i) {
        if (segments[i].samples.size() != len)
            throw Error(Errc::ShapeMismatch, "average_stft needs segments of uniform length");
        const Spectrogram s = stft_magnitude(segments[i]);
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += s.values[j];
    }
    const double inv = 1.0 / static_cast<double>(segments.size());
    for (std::size_t j = 0; j < acc.size(); ++j) first.values[j] = static_cast<float>(acc[j] * inv);
    return first;
}

void write_matrix_csv(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const float> values) {
    if (values.size() != rows * cols) throw Error(Errc::ShapeMismatch, "matrix size does not match rows x cols");
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
    out.precision(9);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) out << ',';
            out << values[r * cols + c];
        }
        out << '\n';
    }
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

void write_matrix_tcsp(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                       std::span<const float> values) {
    if (values.size() != rows * cols) throw Error(Errc::ShapeMismatch, "matrix size does not match rows x cols");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
    out.write("TCSP", 4);
    write_u32(out, static_cast<std::uint32_t>(rows));
    write_u32(out, static_cast<std::uint32_t>(cols));
    write_u32(out, 0);
    for (const float v : values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        write_u32(out, bits);
    }
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

std::vector<float> read_matrix_tcsp(const std::filesystem::path& path, std::size_t& rows, std::size_t& cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TCSP", 4) != 0) throw Error(Errc::MagicMismatch, path.string() + " is not TCSP");
    rows = read_u32(in);
    cols = read_u32(in);
    read_u32(in);
    std::vector<float> values(rows * cols);
    for (auto& v : values) {
        const std::uint32_t bits = read_u32(in);
        std::memcpy(&v, &bits, sizeof v);
    }
    if (!in) throw Error(Errc::TruncatedData, path.string() + " ends early");
    return values;
}

}  // namespace tinychirp::dsp
