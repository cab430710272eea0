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
#include "tinychirp/screening.hpp"

namespace tinychirp {

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::BaselineOnly: return "baseline";
        case Variant::SkipBaseline: return "skip-baseline";
        case Variant::Full: return "full";
        case Variant::PowerSaving: return "power-saving";
    }
    return "?";
}

std::string_view to_string(ModelChoice m) noexcept {
    switch (m) {
        case ModelChoice::None: return "none";
        case ModelChoice::CnnTime: return "cnn_time";
        case ModelChoice::TransformerTime: return "transformer_time";
        case ModelChoice::CnnMel: return "cnn_mel";
    }
    return "?";
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::DiscardedIdle: return "DiscardedIdle";
        case Verdict::DiscardedByModel: return "DiscardedByModel";
        case Verdict::StoredDirect: return "StoredDirect";
        case Verdict::StoredAfterModel: return "StoredAfterModel";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view s) noexcept {
    for (auto v : {Variant::BaselineOnly, Variant::SkipBaseline, Variant::Full, Variant::PowerSaving})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

std::optional<ModelChoice> parse_model_choice(std::string_view s) noexcept {
    for (auto m : {ModelChoice::None, ModelChoice::CnnTime, ModelChoice::TransformerTime, ModelChoice::CnnMel})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

std::optional<Verdict> parse_verdict(std::string_view s) noexcept {
    for (auto v : kAllVerdicts)
        if (s == to_string(v)) return v;
    return std::nullopt;
}

double default_model_threshold(ModelChoice m) noexcept {
    switch (m) {
        case ModelChoice::CnnMel: return 0.27;
        case ModelChoice::CnnTime: return 0.23;
        case ModelChoice::TransformerTime: return 0.27;
        case ModelChoice::None: return 0.5;
    }
    return 0.5;
}

std::size_t& VerdictCounts::operator[](Verdict v) noexcept {
    switch (v) {
        case Verdict::DiscardedIdle: return discarded_idle;
        case Verdict::DiscardedByModel: return discarded_by_model;
        case Verdict::StoredDirect: return stored_direct;
        case Verdict::StoredAfterModel: break;
    }
    return stored_after_model;
}

std::size_t VerdictCounts::operator[](Verdict v) const noexcept {
    return const_cast<VerdictCounts&>(*this)[v];
}

}  // namespace tinychirp
