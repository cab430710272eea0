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

// Per-stage energy accounting and deployment-lifetime estimates.

#include <string>
#include <string_view>

#include "tinychirp/screening.hpp"

namespace tinychirp::budget {

struct StageCost {
    std::string name;
    double memory_kb = 0.0;
    double storage_kb = 0.0;
    double latency_inference_ms = 0.0;
    double latency_preprocess_ms = 0.0;
    double power_mw = 0.0;
    double energy_inference_mj = 0.0;
    double energy_total_mj = 0.0;

    double busy_ms() const noexcept { return latency_inference_ms + latency_preprocess_ms; }
};

/// Measured costs of one 3 s segment on an nRF52840 board.
struct EnergyTable {
    StageCost baseline;
    StageCost cnn_mel;
    StageCost cnn_time;
    StageCost transformer_time;
    double idle_power_mw = 0.0;

    static EnergyTable reference();
    /// Throws Error{InvalidConfig} for ModelChoice::None.
    const StageCost& model(ModelChoice m) const;
    /// Throws Error{InvalidConfig} for negative entries or total < inference energy.
    void validate() const;
};

/// Energy of one segment that ended with verdict v. Throws
/// Error{InconsistentCounts} if the variant cannot produce v.
double verdict_energy_mj(Verdict v, Variant variant, ModelChoice model, const EnergyTable& table);

/// Sum of per-verdict costs plus idle_power_mw over idle_seconds.
/// Throws Error{InconsistentCounts}.
double session_energy(const VerdictCounts& counts, const EnergyTable& table, Variant variant, ModelChoice model,
                      double idle_seconds = 0.0);

struct DeploymentProfile {
    double battery_mwh = 4.0 * 1.5 * 12000.0;  // four alkaline D cells
    double sd_bytes = 128e9;
    double record_rate_bytes_per_s = 16000.0 * 2.0;  // mono 16 kHz PCM16, as stored
    double segment_s = 3.0;
    double active_fraction = 0.1;  // segments passing the power gate
    double store_fraction = 0.1;   // segments written to storage
    // PowerSaving only: segments stored without inference (subset of active).
    double direct_store_fraction = 0.0;
    Variant variant = Variant::Full;
    ModelChoice model = ModelChoice::TransformerTime;
    EnergyTable table = EnergyTable::reference();
};

enum class LimitingFactor { Storage, Battery };
std::string_view to_string(LimitingFactor f) noexcept;

struct Lifetime {
    double storage_days = 0.0;
    double battery_days = 0.0;
    double daily_energy_mj = 0.0;
    double segment_energy_mj = 0.0;  // expected screening energy per segment
    double busy_fraction = 0.0;      // share of wall-clock time spent processing
    LimitingFactor limiting_factor = LimitingFactor::Storage;
    double lifetime_days() const noexcept;
};

/// Idle power is drawn over the wall-clock time not spent processing.
/// Throws Error{ZeroCapacity} or Error{InvalidConfig}.
Lifetime estimate_lifetime(const DeploymentProfile& profile);

}  // namespace tinychirp::budget
