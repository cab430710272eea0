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
#include "tinychirp/audio_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "tinychirp/error.hpp"

namespace tinychirp::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

struct FormatChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
};

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

std::string to_string(Label label) { return label == Label::Target ? "target" : "non_target"; }

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "unknown";
}

Label parse_label(const std::string& text) {
    if (text == "target") return Label::Target;
    if (text == "non_target") return Label::NonTarget;
    throw Error(Errc::UnknownLabel, "label '" + text + "' (expected target|non_target)");
}

Split parse_split(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "validation") return Split::Validation;
    if (text == "test") return Split::Test;
    throw Error(Errc::UnknownSplit, "split '" + text + "' (expected train|validation|test)");
}

AudioSignal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw Error(Errc::MalformedHeader, path.string() + " is not a RIFF/WAVE file");

    std::optional<FormatChunk> fmt;
    const std::uint8_t* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t available = bytes.size() - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || size > available) throw Error(Errc::MalformedHeader, "bad fmt chunk in " + path.string());
            const std::uint8_t* f = chunk + 8;
            FormatChunk parsed;
            parsed.format = read_u16(f);
            parsed.channels = read_u16(f + 2);
            parsed.sample_rate = read_u32(f + 4);
            parsed.bits = read_u16(f + 14);
            if (parsed.format == kFormatExtensible) {
                if (size < 40) throw Error(Errc::MalformedHeader, "short extensible fmt chunk in " + path.string());
                // First two bytes of the SubFormat GUID carry the actual format tag.
                parsed.format = read_u16(f + 24);
            }
            fmt = parsed;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (size > available)
                throw Error(Errc::TruncatedData, path.string() + ": data chunk declares " + std::to_string(size) +
                                                     " bytes, file holds " + std::to_string(available));
            data = chunk + 8;
            data_size = size;
        }
        if (size > available) break;
        pos = body + size + (size & 1u);
    }

    if (!fmt) throw Error(Errc::MalformedHeader, "missing fmt chunk in " + path.string());
    if (data == nullptr) throw Error(Errc::MalformedHeader, "missing data chunk in " + path.string());
    if (fmt->channels == 0 || fmt->sample_rate == 0)
        throw Error(Errc::MalformedHeader, "zero channels or sample rate in " + path.string());

    const bool pcm16 = fmt->format == kFormatPcm && fmt->bits == 16;
    const bool f32 = fmt->format == kFormatFloat && fmt->bits == 32;
    if (!pcm16 && !f32)
        throw Error(Errc::UnsupportedEncoding, path.string() + ": format tag " + std::to_string(fmt->format) + ", " +
                                                   std::to_string(fmt->bits) + " bits");

    AudioSignal signal;
    signal.sample_rate = static_cast<int>(fmt->sample_rate);
    signal.channels = fmt->channels;
    const std::size_t bytes_per_sample = fmt->bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
    const std::size_t count = (data_size / frame_bytes) * fmt->channels;
    signal.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t* p = data + i * bytes_per_sample;
        if (pcm16) {
            signal.samples[i] = static_cast<float>(static_cast<std::int16_t>(read_u16(p))) / 32768.0f;
        } else {
            const std::uint32_t bits = read_u32(p);
            float v;
            std::memcpy(&v, &bits, sizeof v);
            signal.samples[i] = v;
        }
    }
    return signal;
}

void write_wav(const AudioSignal& signal, const std::filesystem::path& path) {
    if (signal.channels <= 0 || signal.sample_rate <= 0)
        throw Error(Errc::IoFailure, "invalid signal metadata for " + path.string());
    const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
    const auto channels = static_cast<std::uint16_t>(signal.channels);
    const auto rate = static_cast<std::uint32_t>(signal.sample_rate);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, channels);
    put_u32(out, rate);
    put_u32(out, rate * channels * 2);
    put_u16(out, static_cast<std::uint16_t>(channels * 2));
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    for (const float s : signal.samples) {
        const double scaled = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(Errc::IoFailure, "cannot create " + path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

AudioSignal to_mono(const AudioSignal& signal, int channel) {
    if (channel < 0 || channel >= signal.channels)
        throw Error(Errc::InvalidConfig, "channel " + std::to_string(channel) + " out of range");
    if (signal.channels == 1) return signal;
    AudioSignal mono;
    mono.sample_rate = signal.sample_rate;
    mono.channels = 1;
    const std::size_t frames = signal.frames();
    mono.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i)
        mono.samples[i] = signal.samples[i * static_cast<std::size_t>(signal.channels) + static_cast<std::size_t>(channel)];
    return mono;
}

std::vector<AudioSegment> segment(const AudioSignal& signal, double duration_s, const std::string& source_id) {
    if (signal.channels != 1) throw Error(Errc::InvalidConfig, "segment() expects a mono signal");
    if (signal.samples.empty()) throw Error(Errc::EmptySignal, "cannot segment an empty signal");
    const auto seg_len = static_cast<std::size_t>(std::llround(duration_s * signal.sample_rate));
    if (seg_len == 0) throw Error(Errc::InvalidConfig, "segment duration rounds to zero samples");

    const std::size_t total = signal.samples.size();
    const std::size_t count = (total + seg_len - 1) / seg_len;
    std::vector<AudioSegment> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        AudioSegment seg;
        seg.sample_rate = signal.sample_rate;
        seg.source_id = source_id;
        seg.offset_s = static_cast<double>(i * seg_len) / signal.sample_rate;
        seg.samples.assign(seg_len, 0.0f);
        const std::size_t begin = i * seg_len;
        const std::size_t end = std::min(total, begin + seg_len);
        std::copy(signal.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                  signal.samples.begin() + static_cast<std::ptrdiff_t>(end), seg.samples.begin());
        out.push_back(std::move(seg));
    }
    return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open manifest " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "empty manifest " + path.string());
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = split_csv_line(line);
    if (header != std::vector<std::string>{"path", "label", "split"})
        throw Error(Errc::MalformedHeader, "manifest header must be 'path,label,split'");

    const auto base = path.parent_path();
    DatasetManifest manifest;
    std::map<std::string, Split> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw Error(Errc::MalformedHeader, "line " + std::to_string(line_no) + ": expected 3 fields");
        ManifestEntry entry;
        entry.path = std::filesystem::path(fields[0]);
        if (entry.path.is_relative()) entry.path = base / entry.path;
        entry.path = entry.path.lexically_normal();
        entry.label = parse_label(fields[1]);
        entry.split = parse_split(fields[2]);

        const auto key = entry.path.string();
        if (const auto it = seen.find(key); it != seen.end() && it->second != entry.split)
            throw Error(Errc::DuplicateAcrossSplits,
                        key + " listed in both " + to_string(it->second) + " and " + to_string(entry.split));
        seen.emplace(key, entry.split);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

}  // namespace tinychirp::audio
