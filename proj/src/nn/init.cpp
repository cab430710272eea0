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
#include "tinychirp/nn.hpp"

namespace tinychirp::nn {

std::uint64_t SplitMix64::next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

WeightSet seeded_init(const ModelGraph& model, std::uint64_t seed) {
    SplitMix64 rng(seed);
    WeightSet weights;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const auto slots = parameter_slots(model.layers()[i]);
        if (slots.empty()) continue;
        auto& tensors = weights.layers[i];
        for (const auto& slot : slots) {
            Tensor t(slot.shape);
            for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
            tensors.push_back(std::move(t));
        }
    }
    return weights;
}

WeightSet zero_weights(const ModelGraph& model) {
    WeightSet weights;
    for (std::size_t i = 0; i < model.layers().size(); ++i)
        for (const auto& slot : parameter_slots(model.layers()[i])) weights.layers[i].emplace_back(slot.shape);
    return weights;
}

}  // namespace tinychirp::nn
