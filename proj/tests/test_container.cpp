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

#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "test_support.hpp"
#include "tinychirp/container.hpp"
#include "tinychirp/error.hpp"

namespace {

using namespace tinychirp;
using namespace tinychirp::nn;
using testkit::TempDir;

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

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, b.data() + off, 4);
    return v;
}

// Rewrites the JSON header in place and pads so the payload offset is kept.
std::vector<std::uint8_t> with_header(const std::vector<std::uint8_t>& b, const std::string& header) {
    const std::uint32_t old_len = u32_at(b, 8);
    const std::size_t payload = (12 + old_len + 7) & ~std::size_t{7};
    std::vector<std::uint8_t> out(b.begin(), b.begin() + 8);
    const auto len = static_cast<std::uint32_t>(header.size());
    out.resize(12);
    std::memcpy(out.data() + 8, &len, 4);
    out.insert(out.end(), header.begin(), header.end());
    out.resize((out.size() + 7) & ~std::size_t{7}, 0);
    out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(payload), b.end());
    return out;
}

class ContainerTest : public ::testing::Test {
protected:
    TempDir dir;
    const ModelGraph graph = build_cnn_time();
    const WeightSet weights = seeded_init(graph, 5);
    std::filesystem::path file = dir / "w.tchw";

    void SetUp() override { save_weights(graph, weights, file); }
};

TEST_F(ContainerTest, RoundtripIsBitExact) {
    const auto back = load_weights(graph, file);
    ASSERT_EQ(back.layers.size(), weights.layers.size());
    for (const auto& [layer, tensors] : weights.layers) {
        ASSERT_EQ(back.at(layer).size(), tensors.size());
        for (std::size_t s = 0; s < tensors.size(); ++s) {
            EXPECT_EQ(back.at(layer)[s].shape, tensors[s].shape);
            EXPECT_EQ(std::memcmp(back.at(layer)[s].data.data(), tensors[s].data.data(), tensors[s].data.size() * 4), 0);
        }
    }
    EXPECT_EQ(peek_model_name(file), "cnn_time");
}

TEST_F(ContainerTest, LayoutMatchesFormat) {
    const auto b = slurp(file);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "TCHW");
    EXPECT_EQ(u32_at(b, 4), kContainerVersion);
    const std::uint32_t header_len = u32_at(b, 8);
    const auto header = nlohmann::json::parse(b.begin() + 12, b.begin() + 12 + header_len);
    EXPECT_EQ(header.at("model"), "cnn_time");
    EXPECT_EQ(header.at("layers").size(), graph.layers().size());
    const std::size_t payload_begin = (12 + header_len + 7) & ~std::size_t{7};
    EXPECT_EQ(payload_begin % 8, 0u);
    for (const auto& t : header.at("tensors")) {
        EXPECT_EQ(t.at("offset").get<std::size_t>() % 8, 0u);
        EXPECT_EQ(t.at("dtype"), "f32");
    }
    // float payload: 748 params, 8-aligned per tensor, then CRC32.
    const Container c = read_container(file);
    EXPECT_EQ(payload_bytes(c), 748u * 4u);
    EXPECT_EQ(b.size(), payload_begin + payload_bytes(c) + 4);
}

TEST_F(ContainerTest, CorruptPayloadByteFailsChecksum) {
    auto b = slurp(file);
    b[b.size() - 100] ^= 0x01;
    spit(file, b);
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::ChecksumFailure);
}

TEST_F(ContainerTest, CorruptChecksumItselfFails) {
    auto b = slurp(file);
    b.back() ^= 0x80;
    spit(file, b);
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::ChecksumFailure);
}

TEST_F(ContainerTest, WrongMagic) {
    auto b = slurp(file);
    b[0] = 'X';
    spit(file, b);
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::MagicMismatch);
    spit(file, {'T', 'C'});
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::MagicMismatch);
}

TEST_F(ContainerTest, FutureVersion) {
    auto b = slurp(file);
    b[4] = 2;
    spit(file, b);
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::VersionUnsupported);
}

TEST_F(ContainerTest, TruncatedFile) {
    auto b = slurp(file);
    b.resize(20);
    spit(file, b);
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::TruncatedData);
}

TEST_F(ContainerTest, KernelMismatchInHeader) {
    const auto b = slurp(file);
    auto header = nlohmann::json::parse(b.begin() + 12, b.begin() + 12 + u32_at(b, 8));
    header["layers"][0]["kernel"] = 5;
    spit(file, with_header(b, header.dump()));
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::ShapeMismatch);
}

TEST_F(ContainerTest, TensorShapeMismatch) {
    const auto b = slurp(file);
    auto header = nlohmann::json::parse(b.begin() + 12, b.begin() + 12 + u32_at(b, 8));
    header["tensors"][0]["shape"] = {4, 3, 1};
    spit(file, with_header(b, header.dump()));
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::ShapeMismatch);
}

TEST_F(ContainerTest, OtherGraphRejected) {
    EXPECT_EQ(error_code([&] { load_weights(build_transformer_time(), file); }), Errc::ShapeMismatch);
}

TEST_F(ContainerTest, MalformedJsonHeader) {
    const auto b = slurp(file);
    spit(file, with_header(b, "{\"model\": "));
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::MalformedHeader);
}

TEST_F(ContainerTest, Int8TensorsNeedQuantLoader) {
    Container c = read_container(file);
    for (auto& t : c.tensors) {
        t.dtype = DType::I8;
        t.bytes.assign(element_count(t.shape), 0);
        t.quant = QuantTag{0.01f, 3};
    }
    write_container(file, graph, c);
    const Container back = read_container(file);
    ASSERT_TRUE(back.tensors[0].quant.has_value());
    EXPECT_EQ(back.tensors[0].quant->scale, 0.01f);
    EXPECT_EQ(back.tensors[0].quant->zero_point, 3);
    EXPECT_EQ(error_code([&] { load_weights(graph, file); }), Errc::UnsupportedEncoding);
}

TEST(Container, MetadataSurvives) {
    TempDir dir;
    const auto g = build_transformer_time();
    Container c;
    c.model = g.name();
    c.metadata_json = R"({"note":"x","n":[1,2]})";
    write_container(dir / "m.tchw", g, c);
    const auto back = read_container(dir / "m.tchw");
    EXPECT_EQ(nlohmann::json::parse(back.metadata_json), nlohmann::json::parse(c.metadata_json));
}

TEST(Container, MissingFile) {
    EXPECT_EQ(error_code([] { load_weights(build_cnn_time(), "/nonexistent/w.tchw"); }), Errc::IoFailure);
}

}  // namespace
