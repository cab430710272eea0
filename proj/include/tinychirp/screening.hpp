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

// Vocabulary shared by the pipeline, the energy budget and the CLI.

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace tinychirp {

enum class Variant { BaselineOnly, SkipBaseline, Full, PowerSaving };
enum class ModelChoice { None, CnnTime, TransformerTime, CnnMel };
enum class Verdict { DiscardedIdle, DiscardedByModel, StoredDirect, StoredAfterModel };

inline constexpr std::array<Verdict, 4> kAllVerdicts = {Verdict::DiscardedIdle, Verdict::DiscardedByModel,
                                                        Verdict::StoredDirect, Verdict::StoredAfterModel};

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(ModelChoice m) noexcept;
std::string_view to_string(Verdict v) noexcept;
std::optional<Variant> parse_variant(std::string_view s) noexcept;
std::optional<ModelChoice> parse_model_choice(std::string_view s) noexcept;
std::optional<Verdict> parse_verdict(std::string_view s) noexcept;

/// Decision threshold tuned for each model (probability of Target).
double default_model_threshold(ModelChoice m) noexcept;

inline constexpr double kDefaultTLow = 1.00e-7;
inline constexpr double kDefaultTHigh = 1.29e-5;

struct VerdictCounts {
    std::size_t discarded_idle = 0;
    std::size_t discarded_by_model = 0;
    std::size_t stored_direct = 0;
    std::size_t stored_after_model = 0;

    std::size_t& operator[](Verdict v) noexcept;
    std::size_t operator[](Verdict v) const noexcept;
    std::size_t total() const noexcept {
        return discarded_idle + discarded_by_model + stored_direct + stored_after_model;
    }
    std::size_t stored() const noexcept { return stored_direct + stored_after_model; }
    bool operator==(const VerdictCounts&) const = default;
};

}  // namespace tinychirp
