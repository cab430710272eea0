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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tinychirp::audio {

enum class Label { Target, NonTarget };
enum class Split { Train, Validation, Test };

std::string to_string(Label label);
std::string to_string(Split split);
// Accepts "target" and "non_target". Throws Error{UnknownLabel}.
Label parse_label(const std::string& text);
// Accepts "train", "validation" and "test". Throws Error{UnknownSplit}.
Split parse_split(const std::string& text);

/// PCM audio with interleaved channels, amplitudes nominally in [-1, 1].
struct AudioSignal {
    std::vector<float> samples;
    int sample_rate = 0;
    int channels = 1;

    std::size_t frames() const noexcept {
        return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
    }
    double duration_s() const noexcept {
        return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0;
    }
};

/// Fixed-length mono window cut from a longer recording.
struct AudioSegment {
    std::vector<float> samples;
    int sample_rate = 0;
    std::optional<Label> label;
    std::string source_id;
    double offset_s = 0.0;
};

inline constexpr double kSegmentSeconds = 3.0;

/// Reads a RIFF/WAVE file holding PCM16 or float32 samples (canonical or
/// WAVE_FORMAT_EXTENSIBLE headers). Int16 samples are divided by 32768.
AudioSignal read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM. Amplitudes are clamped to [-32768, 32767] after
/// scaling by 32768, so 1.0 is stored as 32767.
void write_wav(const AudioSignal& signal, const std::filesystem::path& path);

/// Keeps one channel of an interleaved signal (channel 0 by default).
AudioSignal to_mono(const AudioSignal& signal, int channel = 0);

/// Cuts a mono signal into consecutive, non-overlapping windows of
/// duration_s. The last window is zero-padded. Throws Error{EmptySignal}.
std::vector<AudioSegment> segment(const AudioSignal& signal, double duration_s = kSegmentSeconds,
                                  const std::string& source_id = {});

struct ManifestEntry {
    std::filesystem::path path;
    Label label;
    Split split;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

/// Parses a `path,label,split` CSV. Relative paths are resolved against the
/// manifest's directory. A path listed under two different splits is
/// rejected with Error{DuplicateAcrossSplits}.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace tinychirp::audio
