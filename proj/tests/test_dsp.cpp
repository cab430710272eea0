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
#include <gtest/gtest.h>

#include <complex>
#include <fstream>
#include <numbers>

#include "test_support.hpp"
#include "tinychirp/dsp.hpp"
#include "tinychirp/error.hpp"

namespace {

using namespace tinychirp;
using namespace tinychirp::dsp;
using audio::AudioSegment;
using audio::AudioSignal;
using testkit::make_segment;
using testkit::noise_samples;

constexpr double kPi = std::numbers::pi;

template <typename F>
Errc error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no tinychirp::Error thrown";
    return Errc::IoFailure;
}

// Closed-form magnitude of the bilinear (prewarped) Butterworth high-pass:
// |H|^2 = 1 / (1 + (tan(pi fc / fs) / tan(pi f / fs))^(2N)).
double butterworth_hp_magnitude(double f, double fc, double fs, int order) {
    if (f <= 0.0) return 0.0;
    const double ratio = std::tan(kPi * fc / fs) / std::tan(kPi * f / fs);
    return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * order));
}

std::vector<float> sine(double hz, double amplitude, std::size_t n, double fs = 16000.0) {
    std::vector<float> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(amplitude * std::sin(2.0 * kPi * hz * i / fs));
    return x;
}

// ---------------------------------------------------------------------------
// normalisation, decimation, power
// ---------------------------------------------------------------------------

TEST(MinMaxNormalize, AffineMap) {
    EXPECT_EQ(minmax_normalize(make_segment({-1.0f, 0.0f, 1.0f})).samples, (std::vector<float>{0.0f, 0.5f, 1.0f}));
}

TEST(MinMaxNormalize, ConstantMapsToZeros) {
    EXPECT_EQ(minmax_normalize(make_segment({0.3f, 0.3f})).samples, (std::vector<float>{0.0f, 0.0f}));
}

TEST(MinMaxNormalize, NoiseHitsExactEndpoints) {
    const auto out = minmax_normalize(make_segment(noise_samples(5, 0.7, 5000))).samples;
    EXPECT_EQ(*std::min_element(out.begin(), out.end()), 0.0f);
    EXPECT_EQ(*std::max_element(out.begin(), out.end()), 1.0f);
}

TEST(DownsampleZoh, IntegerFactor) {
    const AudioSignal sig{{0, 1, 2, 3, 4, 5, 6, 7, 8}, 48000, 1};
    const auto out = downsample_zoh(sig, 16000);
    EXPECT_EQ(out.sample_rate, 16000);
    EXPECT_EQ(out.samples, (std::vector<float>{0, 3, 6}));
}

TEST(DownsampleZoh, SameRateIsIdentity) {
    const AudioSignal sig{{0.1f, 0.2f, 0.3f}, 16000, 1};
    EXPECT_EQ(downsample_zoh(sig, 16000).samples, sig.samples);
}

TEST(DownsampleZoh, FractionalRatioMatchesIndexOracle) {
    AudioSignal ramp{std::vector<float>(44100), 44100, 1};
    for (std::size_t i = 0; i < ramp.samples.size(); ++i) ramp.samples[i] = static_cast<float>(i);
    const auto out = downsample_zoh(ramp, 16000);
    ASSERT_EQ(out.samples.size(), 44100u * 16000u / 44100u);
    for (std::size_t k = 0; k < out.samples.size(); ++k) {
        const auto idx = static_cast<std::uint64_t>(k) * 44100u / 16000u;
        ASSERT_EQ(out.samples[k], static_cast<float>(idx)) << k;
    }
}

TEST(DownsampleZoh, MultiChannelDecimatesPerChannel) {
    const AudioSignal sig{{0, 10, 1, 11, 2, 12, 3, 13, 4, 14, 5, 15}, 48000, 2};
    const auto out = downsample_zoh(sig, 16000);
    EXPECT_EQ(out.channels, 2);
    EXPECT_EQ(out.samples, (std::vector<float>{0, 10, 3, 13}));
}

TEST(DownsampleZoh, UpsampleRejected) {
    EXPECT_EQ(error_code([] { downsample_zoh({{1, 2}, 8000, 1}, 16000); }), Errc::UpsampleRequested);
}

TEST(SignalPower, Examples) {
    EXPECT_DOUBLE_EQ(signal_power(std::vector<float>{3.0f, 4.0f}).p, 12.5);
    EXPECT_EQ(signal_power(std::vector<float>(100, 0.0f)).p, 0.0);
    EXPECT_NEAR(signal_power(std::vector<float>(64, 0.25f)).p, 0.0625, 1e-15);
    EXPECT_EQ(signal_power(std::vector<float>{1, 2, 3}).n, 3u);
    EXPECT_EQ(error_code([] { signal_power(std::vector<float>{}); }), Errc::EmptySegment);
}

TEST(SignalPower, ShiftInvariantAndQuadratic) {
    auto x = noise_samples(11, 0.5, 4096);
    const double p = signal_power(x).p;
    std::rotate(x.begin(), x.begin() + 1000, x.end());
    EXPECT_NEAR(signal_power(x).p, p, 1e-12);
    for (auto& v : x) v *= 2.0f;
    EXPECT_NEAR(signal_power(x).p, 4.0 * p, 1e-12);
}

// ---------------------------------------------------------------------------
// Butterworth design
// ---------------------------------------------------------------------------

class Butterworth9 : public ::testing::Test {
protected:
    const FilterSOS filter = design_butterworth_highpass(9, 7000.0, 16000);
};

TEST_F(Butterworth9, SectionLayout) {
    ASSERT_EQ(filter.sections.size(), 5u);
    EXPECT_EQ(filter.design.order, 9);
    EXPECT_EQ(filter.design.cutoff_hz, 7000.0);
    EXPECT_EQ(filter.design.sample_rate_hz, 16000);
    const auto first_order = std::count_if(filter.sections.begin(), filter.sections.end(),
                                           [](const Biquad& s) { return s.b2 == 0.0 && s.a2 == 0.0; });
    EXPECT_EQ(first_order, 1);
}

TEST_F(Butterworth9, HalfPowerAtCutoff) { EXPECT_NEAR(filter.magnitude_at(7000.0), 1.0 / std::sqrt(2.0), 1e-3); }

TEST_F(Butterworth9, ZeroAtDc) { EXPECT_LE(std::abs(filter.response({1.0, 0.0})), 1e-9); }

TEST_F(Butterworth9, MatchesClosedFormMagnitude) {
    for (int i = 0; i < 50; ++i) {
        const double f = 20.0 * std::pow(7999.0 / 20.0, i / 49.0);
        const double want = butterworth_hp_magnitude(f, 7000.0, 16000.0, 9);
        const double got = filter.magnitude_at(f);
        EXPECT_NEAR(got, want, 1e-6 * want + 1e-300) << "f=" << f;
    }
}

TEST_F(Butterworth9, MonotoneMagnitude) {
    double prev = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double f = 8000.0 * i / 199.0;
        const double m = filter.magnitude_at(f);
        EXPECT_GE(m, prev - 1e-12) << "f=" << f;
        prev = m;
    }
}

TEST(Butterworth, StableForEveryOrderAndCutoff) {
    for (int order = 1; order <= 12; ++order) {
        for (double fc : {50.0, 500.0, 3000.0, 7000.0, 7900.0}) {
            const auto f = design_butterworth_highpass(order, fc, 16000);
            EXPECT_EQ(f.sections.size(), static_cast<std::size_t>((order + 1) / 2));
            for (const auto& s : f.sections) {
                // Roots of z^2 + a1 z + a2.
                const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2));
                EXPECT_LT(std::abs((-s.a1 + disc) / 2.0), 1.0) << order << " " << fc;
                EXPECT_LT(std::abs((-s.a1 - disc) / 2.0), 1.0) << order << " " << fc;
            }
            EXPECT_NEAR(f.magnitude_at(fc), 1.0 / std::sqrt(2.0), 1e-6) << order << " " << fc;
        }
    }
}

TEST(Butterworth, InvalidCutoff) {
    EXPECT_EQ(error_code([] { design_butterworth_highpass(9, 0.0, 16000); }), Errc::InvalidCutoff);
    EXPECT_EQ(error_code([] { design_butterworth_highpass(9, 8000.0, 16000); }), Errc::InvalidCutoff);
    EXPECT_EQ(error_code([] { design_butterworth_highpass(0, 1000.0, 16000); }), Errc::InvalidConfig);
}

// ---------------------------------------------------------------------------
// filtering
// ---------------------------------------------------------------------------

TEST_F(Butterworth9, ZeroInZeroOut) {
    const auto out = filter_apply(filter, make_segment(std::vector<float>(2048, 0.0f)));
    EXPECT_EQ(out.samples, std::vector<float>(2048, 0.0f));
}

double tail_amplitude(const std::vector<float>& y) {
    // Peak of the last 4000 samples (steady state).
    double peak = 0.0;
    for (std::size_t i = y.size() - 4000; i < y.size(); ++i) peak = std::max(peak, std::fabs(static_cast<double>(y[i])));
    return peak;
}

TEST_F(Butterworth9, LowToneIsRemoved) {
    const auto out = filter_apply(filter, make_segment(sine(200.0, 1.0, 16000)));
    EXPECT_LT(tail_amplitude(out.samples), 1e-6);
    EXPECT_LT(butterworth_hp_magnitude(200.0, 7000.0, 16000.0, 9), 1e-6);
}

TEST_F(Butterworth9, HighToneKeepsPredictedGain) {
    const auto out = filter_apply(filter, make_segment(sine(7800.0, 1.0, 16000)));
    const double want = butterworth_hp_magnitude(7800.0, 7000.0, 16000.0, 9);
    // Sampled peak of a 7.8 kHz tone can fall between samples; use RMS instead.
    double sq = 0.0;
    for (std::size_t i = out.samples.size() - 8000; i < out.samples.size(); ++i) sq += out.samples[i] * out.samples[i];
    const double amplitude = std::sqrt(2.0 * sq / 8000.0);
    EXPECT_NEAR(amplitude, want, 0.02 * want);
}

TEST_F(Butterworth9, MatchesDirectDifferenceEquations) {
    // Oracle: direct form I per section in long double.
    const auto x = noise_samples(3, 1.0, 3000);
    std::vector<long double> cur(x.begin(), x.end());
    for (const auto& s : filter.sections) {
        std::vector<long double> next(cur.size());
        for (std::size_t n = 0; n < cur.size(); ++n) {
            long double y = s.b0 * cur[n];
            if (n >= 1) y += s.b1 * cur[n - 1] - s.a1 * next[n - 1];
            if (n >= 2) y += s.b2 * cur[n - 2] - s.a2 * next[n - 2];
            next[n] = y;
        }
        cur = std::move(next);
    }
    const auto out = filter_apply(filter, make_segment(x));
    for (std::size_t n = 0; n < x.size(); ++n) ASSERT_NEAR(out.samples[n], static_cast<double>(cur[n]), 1e-5) << n;
}

TEST_F(Butterworth9, StatefulProcessingMatchesBatch) {
    const auto x = noise_samples(4, 1.0, 1000);
    const auto batch = filter_apply(filter, make_segment(x)).samples;
    FilterState state(filter);
    for (std::size_t n = 0; n < x.size(); ++n) ASSERT_EQ(state.process(x[n]), batch[n]);
    state.reset();
    EXPECT_EQ(state.process(x[0]), batch[0]);
}

TEST_F(Butterworth9, RateMismatch) {
    auto seg = make_segment({1.0f, 2.0f});
    seg.sample_rate = 48000;
    EXPECT_EQ(error_code([&] { filter_apply(filter, seg); }), Errc::SampleRateMismatch);
}

// ---------------------------------------------------------------------------
// STFT and mel features
// ---------------------------------------------------------------------------

TEST(Hann, PeriodicDefinition) {
    const auto w = hann_window(1024);
    ASSERT_EQ(w.size(), 1024u);
    EXPECT_EQ(w[0], 0.0);
    EXPECT_NEAR(w[512], 1.0, 1e-15);
    for (std::size_t n = 1; n < 1024; ++n) EXPECT_NEAR(w[n], w[1024 - n], 1e-15);
}

TEST(Stft, PaperShape) {
    const auto spec = stft_magnitude(make_segment(noise_samples(1, 0.5)));
    EXPECT_EQ(spec.frames, 184u);
    EXPECT_EQ(spec.bins, 513u);
    EXPECT_EQ(spec.values.size(), 184u * 513u);
    for (float v : spec.values) ASSERT_GE(v, 0.0f);
}

TEST(Stft, FrameCountFormula) {
    for (std::size_t n : {1024u, 1279u, 1280u, 5000u}) {
        EXPECT_EQ(stft_magnitude(std::vector<float>(n, 0.0f)).frames, (n - 1024) / 256 + 1) << n;
    }
    EXPECT_EQ(error_code([] { stft_magnitude(std::vector<float>(1023, 0.0f)); }), Errc::SegmentTooShort);
}

TEST(Stft, ZeroInputGivesZeros) {
    const auto spec = stft_magnitude(std::vector<float>(48000, 0.0f));
    EXPECT_TRUE(std::all_of(spec.values.begin(), spec.values.end(), [](float v) { return v == 0.0f; }));
}

TEST(Stft, MatchesNaiveDft) {
    const auto x = noise_samples(8, 1.0, 2048);
    const auto spec = stft_magnitude(x);
    for (std::size_t frame : {0u, 3u}) {
        for (std::size_t k : {0u, 1u, 64u, 255u, 512u}) {
            std::complex<double> acc = 0.0;
            for (std::size_t n = 0; n < 1024; ++n) {
                const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * n / 1024.0);
                acc += w * x[frame * 256 + n] * std::polar(1.0, -2.0 * kPi * k * n / 1024.0);
            }
            EXPECT_NEAR(spec.at(frame, k), std::abs(acc), 1e-3) << frame << " " << k;
        }
    }
}

TEST(Stft, ToneLandsInExpectedBin) {
    const auto spec = stft_magnitude(sine(1000.0, 0.5, 48000));
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const auto* row = spec.values.data() + f * spec.bins;
        EXPECT_EQ(std::max_element(row, row + spec.bins) - row, 64) << f;
    }
}

TEST(Stft, NoLookahead) {
    const auto prefix = noise_samples(21, 1.0, 4096);
    auto longer = prefix;
    const auto more = noise_samples(22, 1.0, 4096);
    longer.insert(longer.end(), more.begin(), more.end());
    const auto a = stft_magnitude(prefix);
    const auto b = stft_magnitude(longer);
    for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_EQ(a.values[i], b.values[i]);
}

TEST(Mel, FormulaRoundtrip) {
    EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
    for (double hz : {0.0, 80.0, 1000.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
}

TEST(MelFilterbank, CentersMatchClosedForm) {
    const auto fb = mel_filterbank();
    ASSERT_EQ(fb.mels, 80u);
    ASSERT_EQ(fb.bins, 513u);
    const double lo = 2595.0 * std::log10(1.0 + 80.0 / 700.0);
    const double hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    for (std::size_t m = 0; m < 80; ++m) {
        const double mel = lo + (hi - lo) * static_cast<double>(m + 1) / 81.0;
        const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
        EXPECT_NEAR(fb.centers_hz[m], hz, 0.5) << m;
        if (m > 0) {
            EXPECT_GT(fb.centers_hz[m], fb.centers_hz[m - 1]);
        }
    }
    EXPECT_GT(fb.centers_hz.front(), 80.0);
    EXPECT_LT(fb.centers_hz.back(), 8000.0);
}

TEST(MelFilterbank, OneContiguousNonNegativeSupportPerRow) {
    const auto fb = mel_filterbank();
    for (std::size_t m = 0; m < fb.mels; ++m) {
        const float* row = fb.weights.data() + m * fb.bins;
        int runs = 0;
        bool inside = false;
        for (std::size_t k = 0; k < fb.bins; ++k) {
            ASSERT_GE(row[k], 0.0f);
            ASSERT_LE(row[k], 1.0f);
            if (row[k] > 0.0f && !inside) ++runs;
            inside = row[k] > 0.0f;
        }
        EXPECT_EQ(runs, 1) << "band " << m;
    }
}

TEST(MelFilterbank, InvalidRange) {
    EXPECT_EQ(error_code([] { mel_filterbank(80, 8000.0, 80.0); }), Errc::InvalidRange);
    EXPECT_EQ(error_code([] { mel_filterbank(80, 80.0, 9000.0, 16000); }), Errc::InvalidRange);
}

TEST(LogMel, PaperShapeAndFinite) {
    const auto mel = log_mel(make_segment(noise_samples(2, 0.3)));
    EXPECT_EQ(mel.frames, 184u);
    EXPECT_EQ(mel.mels, 80u);
    for (float v : mel.values) ASSERT_TRUE(std::isfinite(v));
}

TEST(LogMel, ZeroSpectrogramHitsFloor) {
    const auto mel = log_mel(make_segment(std::vector<float>(48000, 0.0f)));
    for (float v : mel.values) ASSERT_EQ(v, -10.0f);
}

TEST(LogMel, MatchesNaiveMatrixProduct) {
    const auto spec = stft_magnitude(noise_samples(6, 0.8));
    const auto fb = mel_filterbank();
    const auto mel = log_mel(spec, fb);
    for (std::size_t f : {0u, 91u, 183u}) {
        for (std::size_t m = 0; m < 80; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 513; ++k)
                acc += static_cast<double>(fb.weights[m * 513 + k]) * static_cast<double>(spec.at(f, k));
            const double want = std::log10(std::max(acc, 1e-10));
            EXPECT_NEAR(mel.at(f, m), want, 1e-12 + 1e-6 * std::fabs(want)) << f << " " << m;
            EXPECT_EQ(mel.at(f, m), static_cast<float>(want));
        }
    }
}

TEST(LogMel, ShapeMismatch) {
    Spectrogram spec{1, 100, std::vector<float>(100, 1.0f)};
    EXPECT_EQ(error_code([&] { log_mel(spec, mel_filterbank()); }), Errc::ShapeMismatch);
}

TEST(AverageStft, MeanOfSpectrograms) {
    const auto a = make_segment(noise_samples(31, 0.5, 4096));
    const auto b = make_segment(noise_samples(32, 0.9, 4096));
    const auto sa = stft_magnitude(a), sb = stft_magnitude(b);

    const std::vector<AudioSegment> one{a};
    EXPECT_EQ(average_stft(one).values, sa.values);
    const std::vector<AudioSegment> twice{a, a};
    const auto same = average_stft(twice);
    for (std::size_t i = 0; i < sa.values.size(); ++i) ASSERT_FLOAT_EQ(same.values[i], sa.values[i]);

    const std::vector<AudioSegment> both{a, b};
    const auto avg = average_stft(both);
    for (std::size_t i = 0; i < sa.values.size(); ++i)
        ASSERT_NEAR(avg.values[i], (sa.values[i] + sb.values[i]) / 2.0f, 1e-5f);

    EXPECT_EQ(error_code([] { average_stft(std::vector<AudioSegment>{}); }), Errc::EmptyList);
}

TEST(MatrixExport, TcspRoundtripAndCsvRows) {
    testkit::TempDir dir;
    const std::vector<float> v{1.0f, -2.5f, 3.25f, 0.0f, 5.0f, 6.0f};
    write_matrix_tcsp(dir / "m.tcsp", 2, 3, v);
    std::size_t rows = 0, cols = 0;
    EXPECT_EQ(read_matrix_tcsp(dir / "m.tcsp", rows, cols), v);
    EXPECT_EQ(rows, 2u);
    EXPECT_EQ(cols, 3u);
    EXPECT_EQ(std::filesystem::file_size(dir / "m.tcsp"), 16u + 6u * 4u);

    write_matrix_csv(dir / "m.csv", 2, 3, v);
    std::ifstream in(dir / "m.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
        ++lines;
    }
    EXPECT_EQ(lines, 2);
}

}  // namespace
