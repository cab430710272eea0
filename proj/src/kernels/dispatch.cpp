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
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tinychirp/kernels.hpp"

namespace tinychirp::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(TINYCHIRP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* pick_default() noexcept {
    const char* env = std::getenv("TINYCHIRP_SIMD");
    if (env != nullptr && std::string(env) == "scalar") return &scalar::table();
#if defined(TINYCHIRP_HAVE_AVX2)
    if (cpu_has_avx2()) return &avx2::table();
#endif
    return &scalar::table();
}

std::atomic<const KernelTable*>& current() noexcept {
    static std::atomic<const KernelTable*> ptr{pick_default()};
    return ptr;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool available(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2: return cpu_has_avx2();
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!available(isa))
        throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
#if defined(TINYCHIRP_HAVE_AVX2)
    if (isa == Isa::Avx2) return avx2::table();
#endif
    return scalar::table();
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

}  // namespace tinychirp::kernels
