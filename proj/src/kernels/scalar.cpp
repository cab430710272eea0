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
#include <algorithm>

#include "tinychirp/kernels.hpp"

namespace tinychirp::kernels::scalar {
namespace {

float dot(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        acc += v * v;
    }
    return acc;
}

std::int32_t dot_i16(const std::int16_t* a, const std::int16_t* b, std::size_t n) {
    std::int32_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += std::int32_t{a[i]} * std::int32_t{b[i]};
    return acc;
}

void relu(float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::max(x[i], 0.0f);
}

constexpr KernelTable kTable{Isa::Scalar, dot, axpy, sum_squares, dot_i16, relu};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace tinychirp::kernels::scalar
