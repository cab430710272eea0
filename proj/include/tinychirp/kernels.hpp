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

// Data-parallel inner loops used by the DSP, float inference, streaming and
// int8 paths. Every kernel has a scalar reference version; wider variants are
// compiled per-ISA and chosen once at startup based on CPUID. The
// TINYCHIRP_SIMD environment variable ("scalar" or "avx2") pins the choice.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace tinychirp::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;
    // sum_i a[i] * b[i]
    float (*dot)(const float* a, const float* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
    // sum_i x[i]^2, accumulated in double
    double (*sum_squares)(const float* x, std::size_t n);
    // sum_i a[i] * b[i] with int32 accumulation; |a|,|b| <= 255
    std::int32_t (*dot_i16)(const std::int16_t* a, const std::int16_t* b, std::size_t n);
    // x[i] = max(x[i], 0)
    void (*relu)(float* x, std::size_t n);
};

std::string_view isa_name(Isa isa) noexcept;

bool available(Isa isa) noexcept;

// Throws std::invalid_argument when the ISA is not compiled in or not
// supported by this CPU.
const KernelTable& table(Isa isa);

const KernelTable& active() noexcept;

// Overrides the runtime choice for the whole process.
void select(Isa isa);

namespace scalar {
const KernelTable& table() noexcept;
}

#if defined(TINYCHIRP_HAVE_AVX2)
namespace avx2 {
const KernelTable& table() noexcept;
}
#endif

}  // namespace tinychirp::kernels
