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

#include <cmath>
#include <vector>

#include "tinychirp/kernels.hpp"
#include "tinychirp/nn.hpp"

namespace {

using namespace tinychirp;
using kernels::Isa;

std::vector<float> random_floats(std::uint64_t seed, std::size_t n, double lo = -1.0, double hi = 1.0) {
    nn::SplitMix64 rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

std::vector<std::int16_t> random_i16(std::uint64_t seed, std::size_t n) {
    nn::SplitMix64 rng(seed);
    std::vector<std::int16_t> v(n);
    for (auto& x : v) x = static_cast<std::int16_t>(static_cast<int>(rng.next() % 511) - 255);
    return v;
}

// Sizes straddle the 8- and 16-lane tails.
const std::size_t kSizes[] = {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 1023, 4097};

class KernelEquivalence : public ::testing::Test {
protected:
    void SetUp() override {
        if (!kernels::available(Isa::Avx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
    }
    const kernels::KernelTable& ref = kernels::table(Isa::Scalar);
    const kernels::KernelTable& simd() { return kernels::table(Isa::Avx2); }
};

TEST(Kernels, ScalarIsAlwaysAvailable) {
    EXPECT_TRUE(kernels::available(Isa::Scalar));
    EXPECT_EQ(kernels::table(Isa::Scalar).isa, Isa::Scalar);
    EXPECT_EQ(kernels::isa_name(Isa::Scalar), "scalar");
}

TEST(Kernels, ScalarMatchesPlainLoops) {
    const auto& k = kernels::table(Isa::Scalar);
    const auto a = random_floats(1, 37), b = random_floats(2, 37);
    double dot = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        sq += static_cast<double>(a[i]) * a[i];
    }
    EXPECT_NEAR(k.dot(a.data(), b.data(), a.size()), dot, 1e-5);
    EXPECT_NEAR(k.sum_squares(a.data(), a.size()), sq, 1e-12);

    const auto ia = random_i16(3, 50), ib = random_i16(4, 50);
    std::int32_t idot = 0;
    for (std::size_t i = 0; i < ia.size(); ++i) idot += ia[i] * ib[i];
    EXPECT_EQ(k.dot_i16(ia.data(), ib.data(), ia.size()), idot);

    auto y = b;
    k.axpy(0.5f, a.data(), y.data(), y.size());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_FLOAT_EQ(y[i], b[i] + 0.5f * a[i]);

    auto r = a;
    k.relu(r.data(), r.size());
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i], std::max(a[i], 0.0f));
}

TEST_F(KernelEquivalence, Dot) {
    for (std::size_t n : kSizes) {
        const auto a = random_floats(10 + n, n), b = random_floats(20 + n, n);
        const float want = ref.dot(a.data(), b.data(), n);
        EXPECT_NEAR(simd().dot(a.data(), b.data(), n), want, 1e-5 * (1.0 + std::sqrt(static_cast<double>(n))))
            << "n=" << n;
    }
}

TEST_F(KernelEquivalence, Axpy) {
    for (std::size_t n : kSizes) {
        const auto x = random_floats(30 + n, n);
        auto y1 = random_floats(40 + n, n);
        auto y2 = y1;
        ref.axpy(-0.75f, x.data(), y1.data(), n);
        simd().axpy(-0.75f, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-6f) << "n=" << n << " i=" << i;
    }
}

TEST_F(KernelEquivalence, SumSquares) {
    for (std::size_t n : kSizes) {
        const auto x = random_floats(50 + n, n);
        EXPECT_NEAR(simd().sum_squares(x.data(), n), ref.sum_squares(x.data(), n), 1e-9) << "n=" << n;
    }
}

TEST_F(KernelEquivalence, DotI16IsExact) {
    for (std::size_t n : kSizes) {
        const auto a = random_i16(60 + n, n), b = random_i16(70 + n, n);
        EXPECT_EQ(simd().dot_i16(a.data(), b.data(), n), ref.dot_i16(a.data(), b.data(), n)) << "n=" << n;
    }
    // Extremes: every product is 255 * 255 or -255 * 255.
    std::vector<std::int16_t> hi(1000, 255), lo(1000, -255);
    EXPECT_EQ(simd().dot_i16(hi.data(), hi.data(), hi.size()), 255 * 255 * 1000);
    EXPECT_EQ(simd().dot_i16(hi.data(), lo.data(), hi.size()), -255 * 255 * 1000);
}

TEST_F(KernelEquivalence, ReluIsExact) {
    for (std::size_t n : kSizes) {
        auto a = random_floats(80 + n, n);
        auto b = a;
        ref.relu(a.data(), n);
        simd().relu(b.data(), n);
        EXPECT_EQ(a, b) << "n=" << n;
    }
}

TEST_F(KernelEquivalence, SelectSwitchesActiveTable) {
    const Isa before = kernels::active().isa;
    kernels::select(Isa::Scalar);
    EXPECT_EQ(kernels::active().isa, Isa::Scalar);
    kernels::select(Isa::Avx2);
    EXPECT_EQ(kernels::active().isa, Isa::Avx2);
    kernels::select(before);
}

TEST(Kernels, ForwardPassAgreesAcrossIsas) {
    if (!kernels::available(Isa::Avx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
    const auto model = nn::build_cnn_time(4096);
    const auto w = nn::seeded_init(model, 3);
    const nn::Tensor x({1, 4096}, random_floats(9, 4096));
    const Isa before = kernels::active().isa;
    kernels::select(Isa::Scalar);
    const auto p_ref = nn::forward(model, w, x);
    kernels::select(Isa::Avx2);
    const auto p_simd = nn::forward(model, w, x);
    kernels::select(before);
    EXPECT_NEAR(p_ref[0], p_simd[0], 1e-6);
    EXPECT_NEAR(p_ref[1], p_simd[1], 1e-6);
}

}  // namespace
