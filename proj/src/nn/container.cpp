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
#include "tinychirp/container.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "tinychirp/error.hpp"

namespace tinychirp::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

using json = nlohmann::json;

constexpr char kMagic[4] = {'T', 'C', 'H', 'W'};

std::size_t align8(std::size_t n) { return (n + 7) & ~std::size_t{7}; }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; payloads here are far below 4 GiB.
    crc = crc32(crc, data, static_cast<uInt>(n));
    return static_cast<std::uint32_t>(crc);
}

std::size_t dtype_size(DType t) { return t == DType::F32 ? 4 : 1; }

json layer_json(const LayerSpec& l) {
    json j{{"kind", std::string(kind_name(l.kind))}};
    switch (l.kind) {
        case LayerKind::Conv1D:
        case LayerKind::Conv2D:
            j["in"] = l.in_channels;
            j["out"] = l.out_channels;
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["padding"] = l.padding == Padding::Same ? "same" : "valid";
            j["bias"] = l.has_bias;
            break;
        case LayerKind::FullyConnected:
            j["in"] = l.in_channels;
            j["out"] = l.out_channels;
            j["bias"] = l.has_bias;
            break;
        case LayerKind::MaxPool1D:
        case LayerKind::MaxPool2D: j["pool"] = l.pool; break;
        case LayerKind::Dropout: j["rate"] = l.rate; break;
        case LayerKind::SingleHeadTransformer: j["dim"] = l.dim; break;
        case LayerKind::Fire1D:
            j["in"] = l.in_channels;
            j["squeeze"] = l.fire.squeeze;
            j["expand1"] = l.fire.expand1;
            j["expand3"] = l.fire.expand3;
            j["bias"] = l.has_bias;
            break;
        case LayerKind::Reshape: j["size"] = l.reshape_size; break;
        default: break;
    }
    return j;
}

}  // namespace

std::size_t payload_bytes(const Container& container) {
    std::size_t total = 0;
    for (const auto& t : container.tensors) total = align8(total) + t.bytes.size();
    return align8(total);
}

void write_container(const std::filesystem::path& path, const ModelGraph& model, const Container& container) {
    json header;
    header["model"] = container.model;
    header["layers"] = json::array();
    for (const auto& l : model.layers()) header["layers"].push_back(layer_json(l));
    header["tensors"] = json::array();

    std::vector<std::uint8_t> payload;
    for (const auto& t : container.tensors) {
        payload.resize(align8(payload.size()), 0);
        json jt{{"layer", t.layer},
                {"name", t.name},
                {"shape", t.shape},
                {"dtype", t.dtype == DType::F32 ? "f32" : "i8"},
                {"offset", payload.size()},
                {"bytes", t.bytes.size()}};
        if (t.quant) {
            jt["scale"] = t.quant->scale;
            jt["zero_point"] = t.quant->zero_point;
        }
        header["tensors"].push_back(std::move(jt));
        payload.insert(payload.end(), t.bytes.begin(), t.bytes.end());
    }
    payload.resize(align8(payload.size()), 0);
    header["metadata"] = json::parse(container.metadata_json);

    const std::string text = header.dump();
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kContainerVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.resize(align8(out.size()), 0);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, crc_of(payload.data(), payload.size()));

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(Errc::IoFailure, "cannot create " + path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

namespace {

struct RawContainer {
    json header;
    std::vector<std::uint8_t> bytes;
    std::size_t payload_begin = 0;
    std::size_t payload_size = 0;
};

RawContainer read_raw(const std::filesystem::path& path, bool verify_crc) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    RawContainer raw;
    raw.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    const auto& b = raw.bytes;
    if (b.size() < 12 || std::memcmp(b.data(), kMagic, 4) != 0)
        throw Error(Errc::MagicMismatch, path.string() + " is not a TCHW container");
    const std::uint32_t version = get_u32(b.data() + 4);
    if (version != kContainerVersion)
        throw Error(Errc::VersionUnsupported, "container version " + std::to_string(version));
    const std::uint32_t header_len = get_u32(b.data() + 8);
    if (12 + std::size_t{header_len} > b.size()) throw Error(Errc::TruncatedData, path.string() + ": header cut short");
    try {
        raw.header = json::parse(b.begin() + 12, b.begin() + 12 + header_len);
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedHeader, path.string() + ": " + e.what());
    }
    raw.payload_begin = align8(12 + std::size_t{header_len});
    if (raw.payload_begin + 4 > b.size()) throw Error(Errc::TruncatedData, path.string() + ": missing payload");
    raw.payload_size = b.size() - 4 - raw.payload_begin;
    if (verify_crc) {
        const std::uint32_t stored = get_u32(b.data() + b.size() - 4);
        if (crc_of(b.data() + raw.payload_begin, raw.payload_size) != stored)
            throw Error(Errc::ChecksumFailure, path.string() + ": payload CRC32 mismatch");
    }
    return raw;
}

}  // namespace

std::string peek_model_name(const std::filesystem::path& path) {
    return read_raw(path, false).header.value("model", std::string{});
}

Container read_container(const std::filesystem::path& path) {
    const RawContainer raw = read_raw(path, true);
    Container c;
    try {
        c.model = raw.header.at("model").get<std::string>();
        c.metadata_json = raw.header.value("metadata", json::object()).dump();
        for (const auto& jt : raw.header.at("tensors")) {
            StoredTensor t;
            t.layer = jt.at("layer").get<std::size_t>();
            t.name = jt.at("name").get<std::string>();
            t.shape = jt.at("shape").get<Shape>();
            const auto dtype = jt.at("dtype").get<std::string>();
            if (dtype == "f32") {
                t.dtype = DType::F32;
            } else if (dtype == "i8") {
                t.dtype = DType::I8;
                t.quant = QuantTag{jt.at("scale").get<float>(), jt.at("zero_point").get<int>()};
            } else {
                throw Error(Errc::MalformedHeader, "unknown dtype " + dtype);
            }
            const auto offset = jt.at("offset").get<std::size_t>();
            const auto nbytes = jt.at("bytes").get<std::size_t>();
            if (offset + nbytes > raw.payload_size)
                throw Error(Errc::TruncatedData, t.name + " extends past the payload");
            if (nbytes != element_count(t.shape) * dtype_size(t.dtype))
                throw Error(Errc::ShapeMismatch, t.name + ": byte length does not match shape");
            const auto* begin = raw.bytes.data() + raw.payload_begin + offset;
            t.bytes.assign(begin, begin + nbytes);
            c.tensors.push_back(std::move(t));
        }
        c.layers_json = raw.header.at("layers").dump();
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedHeader, path.string() + ": " + e.what());
    }
    return c;
}

void check_container(const ModelGraph& model, const Container& c) {
    if (!c.layers_json.empty()) {
        const json layers = json::parse(c.layers_json);
        if (layers.size() != model.layers().size())
            throw Error(Errc::ShapeMismatch, "container has " + std::to_string(layers.size()) + " layers, " +
                                                 model.name() + " has " + std::to_string(model.layers().size()));
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i] != layer_json(model.layers()[i]))
                throw Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + " differs: container " +
                                                     layers[i].dump() + " vs graph " +
                                                     layer_json(model.layers()[i]).dump());
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        for (const auto& slot : parameter_slots(model.layers()[i])) {
            if (cursor >= c.tensors.size() || c.tensors[cursor].layer != i || c.tensors[cursor].name != slot.name)
                throw Error(Errc::MissingWeights, "layer " + std::to_string(i) + " " + slot.name + " missing");
            if (c.tensors[cursor].shape != slot.shape)
                throw Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + " " + slot.name + ": container " +
                                                     shape_string(c.tensors[cursor].shape) + ", graph " +
                                                     shape_string(slot.shape));
            ++cursor;
        }
    }
    if (cursor != c.tensors.size()) throw Error(Errc::ShapeMismatch, "container holds extra tensors");
}

void save_weights(const ModelGraph& model, const WeightSet& weights, const std::filesystem::path& path) {
    validate_weights(model, weights);
    Container c;
    c.model = model.name();
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const auto slots = parameter_slots(model.layers()[i]);
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const Tensor& t = weights.at(i)[s];
            StoredTensor st;
            st.layer = i;
            st.name = slots[s].name;
            st.shape = t.shape;
            st.dtype = DType::F32;
            st.bytes.resize(t.data.size() * sizeof(float));
            std::memcpy(st.bytes.data(), t.data.data(), st.bytes.size());
            c.tensors.push_back(std::move(st));
        }
    }
    write_container(path, model, c);
}

WeightSet load_weights(const ModelGraph& model, const std::filesystem::path& path) {
    const Container c = read_container(path);
    check_container(model, c);
    WeightSet w;
    for (const auto& st : c.tensors) {
        if (st.dtype != DType::F32)
            throw Error(Errc::UnsupportedEncoding, path.string() + " holds int8 tensors; load it as a quantized model");
        Tensor t(st.shape);
        std::memcpy(t.data.data(), st.bytes.data(), st.bytes.size());
        w.layers[st.layer].push_back(std::move(t));
    }
    return w;
}

}  // namespace tinychirp::nn
