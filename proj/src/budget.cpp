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
#include "tinychirp/budget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tinychirp/error.hpp"

namespace tinychirp::budget {
namespace {

constexpr double kSecondsPerDay = 86400.0;

void check_fraction(double f, const char* name) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(Errc::InvalidConfig, std::string(name) + " must lie in [0, 1]");
}

}  // namespace

EnergyTable EnergyTable::reference() {
    EnergyTable t;
    t.baseline = {"baseline", 67.216, 20.34, 213.755, 2.0, 9.900, 2.116, 2.136};
    t.cnn_mel = {"cnn_mel", 104.328, 37.868, 406.146, 1980.259, 17.820, 7.238, 42.525};
    t.cnn_time = {"cnn_time", 75.564, 24.104, 1490.687, 2.0, 17.160, 25.580, 25.614};
    t.transformer_time = {"transformer_time", 83.468, 24.712, 1079.293, 2.0, 17.820, 19.233, 19.268};
    t.idle_power_mw = 6.270;
    return t;
}

const StageCost& EnergyTable::model(ModelChoice m) const {
    switch (m) {
        case ModelChoice::CnnMel: return cnn_mel;
        case ModelChoice::CnnTime: return cnn_time;
        case ModelChoice::TransformerTime: return transformer_time;
        case ModelChoice::None: break;
    }
    throw Error(Errc::InvalidConfig, "no model selected");
}

void EnergyTable::validate() const {
    for (const StageCost* s : {&baseline, &cnn_mel, &cnn_time, &transformer_time}) {
        if (s->memory_kb < 0 || s->storage_kb < 0 || s->latency_inference_ms < 0 || s->latency_preprocess_ms < 0 ||
            s->power_mw < 0 || s->energy_inference_mj < 0 || s->energy_total_mj < 0)
            throw Error(Errc::InvalidConfig, s->name + ": negative cost");
        if (s->energy_total_mj < s->energy_inference_mj)
            throw Error(Errc::InvalidConfig, s->name + ": total energy below inference energy");
    }
    if (idle_power_mw < 0) throw Error(Errc::InvalidConfig, "negative idle power");
}

double verdict_energy_mj(Verdict v, Variant variant, ModelChoice model, const EnergyTable& table) {
    const auto inconsistent = [&] {
        return Error(Errc::InconsistentCounts, std::string(to_string(v)) + " cannot occur in variant " +
                                                   std::string(to_string(variant)));
    };
    const bool has_model = variant != Variant::BaselineOnly;
    if (has_model && model == ModelChoice::None)
        throw Error(Errc::InconsistentCounts, std::string(to_string(variant)) + " needs a model");
    switch (v) {
        case Verdict::DiscardedIdle:
            if (variant == Variant::SkipBaseline) throw inconsistent();
            return table.baseline.energy_total_mj;
        case Verdict::StoredDirect:
            if (variant != Variant::BaselineOnly && variant != Variant::PowerSaving) throw inconsistent();
            return table.baseline.energy_total_mj;
        case Verdict::DiscardedByModel:
        case Verdict::StoredAfterModel:
            if (!has_model) throw inconsistent();
            return (variant == Variant::SkipBaseline ? 0.0 : table.baseline.energy_total_mj) +
                   table.model(model).energy_total_mj;
    }
    throw inconsistent();
}

double session_energy(const VerdictCounts& counts, const EnergyTable& table, Variant variant, ModelChoice model,
                      double idle_seconds) {
    if (idle_seconds < 0) throw Error(Errc::InvalidConfig, "negative idle time");
    double total = 0.0;
    for (Verdict v : kAllVerdicts)
        if (counts[v] > 0) total += static_cast<double>(counts[v]) * verdict_energy_mj(v, variant, model, table);
    return total + table.idle_power_mw * idle_seconds;
}

std::string_view to_string(LimitingFactor f) noexcept {
    return f == LimitingFactor::Storage ? "storage" : "battery";
}

double Lifetime::lifetime_days() const noexcept { return std::min(storage_days, battery_days); }

Lifetime estimate_lifetime(const DeploymentProfile& p) {
    if (!(p.battery_mwh > 0) || !(p.sd_bytes > 0) || !(p.record_rate_bytes_per_s > 0))
        throw Error(Errc::ZeroCapacity, "battery, storage and record rate must be positive");
    if (!(p.segment_s > 0)) throw Error(Errc::InvalidConfig, "segment length must be positive");
    check_fraction(p.active_fraction, "active_fraction");
    check_fraction(p.store_fraction, "store_fraction");
    check_fraction(p.direct_store_fraction, "direct_store_fraction");
    if (p.direct_store_fraction > p.active_fraction)
        throw Error(Errc::InvalidConfig, "direct_store_fraction exceeds active_fraction");
    p.table.validate();

    const StageCost& base = p.table.baseline;
    double energy = 0.0, busy_ms = 0.0;
    switch (p.variant) {
        case Variant::BaselineOnly:
            energy = base.energy_total_mj;
            busy_ms = base.busy_ms();
            break;
        case Variant::SkipBaseline:
            energy = p.table.model(p.model).energy_total_mj;
            busy_ms = p.table.model(p.model).busy_ms();
            break;
        case Variant::Full:
        case Variant::PowerSaving: {
            const StageCost& m = p.table.model(p.model);
            const double inferred =
                p.active_fraction - (p.variant == Variant::PowerSaving ? p.direct_store_fraction : 0.0);
            energy = base.energy_total_mj + inferred * m.energy_total_mj;
            busy_ms = base.busy_ms() + inferred * m.busy_ms();
            break;
        }
    }

    Lifetime out;
    const double busy_s = std::min(busy_ms / 1000.0, p.segment_s);
    const double segments_per_day = kSecondsPerDay / p.segment_s;
    out.segment_energy_mj = energy;
    out.busy_fraction = busy_s / p.segment_s;
    out.daily_energy_mj = segments_per_day * (energy + p.table.idle_power_mw * (p.segment_s - busy_s));
    out.battery_days = out.daily_energy_mj > 0 ? p.battery_mwh * 3600.0 / out.daily_energy_mj
                                               : std::numeric_limits<double>::infinity();
    out.storage_days = p.store_fraction > 0
                           ? p.sd_bytes / (p.store_fraction * p.record_rate_bytes_per_s * kSecondsPerDay)
                           : std::numeric_limits<double>::infinity();
    out.limiting_factor = out.storage_days <= out.battery_days ? LimitingFactor::Storage : LimitingFactor::Battery;
    return out;
}

}  // namespace tinychirp::budget
