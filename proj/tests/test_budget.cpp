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

#include "tinychirp/budget.hpp"
#include "tinychirp/error.hpp"

namespace {

using namespace tinychirp;
using namespace tinychirp::budget;

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

VerdictCounts counts_of(Verdict v, std::size_t n) {
    VerdictCounts c;
    c[v] = n;
    return c;
}

TEST(EnergyTable, ReferenceRows) {
    const auto t = EnergyTable::reference();
    EXPECT_EQ(t.baseline.energy_total_mj, 2.136);
    EXPECT_EQ(t.cnn_mel.energy_total_mj, 42.525);
    EXPECT_EQ(t.cnn_time.energy_total_mj, 25.614);
    EXPECT_EQ(t.transformer_time.energy_total_mj, 19.268);
    EXPECT_EQ(t.idle_power_mw, 6.270);
    EXPECT_EQ(t.model(ModelChoice::CnnMel).latency_preprocess_ms, 1980.259);
    EXPECT_NO_THROW(t.validate());
    EXPECT_EQ(error_code([&] { t.model(ModelChoice::None); }), Errc::InvalidConfig);
}

TEST(EnergyTable, ValidationRejectsBadRows) {
    auto t = EnergyTable::reference();
    t.cnn_time.energy_total_mj = 1.0;  // below inference energy
    EXPECT_EQ(error_code([&] { t.validate(); }), Errc::InvalidConfig);
    t = EnergyTable::reference();
    t.idle_power_mw = -1.0;
    EXPECT_EQ(error_code([&] { t.validate(); }), Errc::InvalidConfig);
}

TEST(SessionEnergy, Examples) {
    const auto t = EnergyTable::reference();
    EXPECT_NEAR(session_energy(counts_of(Verdict::DiscardedIdle, 100), t, Variant::Full, ModelChoice::TransformerTime),
                213.6, 1e-9);
    EXPECT_NEAR(
        session_energy(counts_of(Verdict::DiscardedByModel, 1), t, Variant::Full, ModelChoice::TransformerTime),
        21.404, 1e-12);
    EXPECT_EQ(session_energy({}, t, Variant::Full, ModelChoice::TransformerTime), 0.0);
    EXPECT_NEAR(session_energy({}, t, Variant::Full, ModelChoice::TransformerTime, 10.0), 62.70, 1e-12);
}

TEST(SessionEnergy, PerVerdictCosts) {
    const auto t = EnergyTable::reference();
    EXPECT_EQ(verdict_energy_mj(Verdict::StoredDirect, Variant::PowerSaving, ModelChoice::CnnTime, t), 2.136);
    EXPECT_EQ(verdict_energy_mj(Verdict::StoredDirect, Variant::BaselineOnly, ModelChoice::None, t), 2.136);
    EXPECT_NEAR(verdict_energy_mj(Verdict::StoredAfterModel, Variant::PowerSaving, ModelChoice::CnnMel, t),
                2.136 + 42.525, 1e-12);
    EXPECT_EQ(verdict_energy_mj(Verdict::StoredAfterModel, Variant::SkipBaseline, ModelChoice::CnnTime, t), 25.614);

    VerdictCounts mixed;
    mixed.discarded_idle = 7;
    mixed.discarded_by_model = 2;
    mixed.stored_after_model = 1;
    EXPECT_NEAR(session_energy(mixed, t, Variant::Full, ModelChoice::CnnTime),
                10 * 2.136 + 3 * 25.614, 1e-9);
}

TEST(SessionEnergy, InconsistentCounts) {
    const auto t = EnergyTable::reference();
    EXPECT_EQ(error_code([&] {
                  session_energy(counts_of(Verdict::DiscardedByModel, 1), t, Variant::BaselineOnly, ModelChoice::None);
              }),
              Errc::InconsistentCounts);
    EXPECT_EQ(error_code([&] {
                  session_energy(counts_of(Verdict::DiscardedIdle, 1), t, Variant::SkipBaseline,
                                 ModelChoice::CnnTime);
              }),
              Errc::InconsistentCounts);
    EXPECT_EQ(error_code([&] {
                  session_energy(counts_of(Verdict::StoredDirect, 1), t, Variant::Full, ModelChoice::CnnTime);
              }),
              Errc::InconsistentCounts);
    EXPECT_EQ(error_code([&] {
                  session_energy(counts_of(Verdict::DiscardedIdle, 1), t, Variant::Full, ModelChoice::None);
              }),
              Errc::InconsistentCounts);
}

TEST(Lifetime, StorageRatioLaw) {
    DeploymentProfile p;
    p.store_fraction = 1.0;
    p.active_fraction = 1.0;
    const double full = estimate_lifetime(p).storage_days;
    p.store_fraction = 0.1;
    EXPECT_NEAR(estimate_lifetime(p).storage_days, 10.0 * full, 1e-9 * full);
    EXPECT_NEAR(full, 128e9 / (32000.0 * 86400.0), 1e-9);
    for (double f : {0.5, 0.25, 0.01}) {
        p.store_fraction = f;
        EXPECT_NEAR(estimate_lifetime(p).storage_days * f, full, 1e-9 * full);
    }
}

TEST(Lifetime, TwoWeeksToTwentyWeeks) {
    DeploymentProfile p;
    p.store_fraction = 1.0;
    // Record rate chosen so that storing everything fills the card in 14 days.
    p.record_rate_bytes_per_s = p.sd_bytes / (14.0 * 86400.0);
    EXPECT_NEAR(estimate_lifetime(p).storage_days, 14.0, 1e-9);
    p.store_fraction = 0.1;
    const double weeks = estimate_lifetime(p).storage_days / 7.0;
    EXPECT_NEAR(weeks, 20.0, 1e-9);
    EXPECT_LE(std::fabs(weeks - 18.0) / 18.0, 0.2);
}

TEST(Lifetime, IdleOnlyClosedForm) {
    DeploymentProfile p;
    p.table = EnergyTable{};
    p.table.idle_power_mw = 6.27;
    const auto life = estimate_lifetime(p);
    // mWh -> mJ over mW x seconds per day.
    EXPECT_NEAR(life.battery_days, p.battery_mwh * 3600.0 / (6.27 * 86400.0), 1e-9);
    EXPECT_EQ(life.busy_fraction, 0.0);
}

TEST(Lifetime, HandComputedFullVariant) {
    DeploymentProfile p;  // Transformer-Time, active 0.1
    const auto t = EnergyTable::reference();
    const double seg_mj = 2.136 + 0.1 * 19.268;
    const double busy_s = (215.755 + 0.1 * 1081.293) / 1000.0;
    const double daily = 28800.0 * (seg_mj + t.idle_power_mw * (3.0 - busy_s));
    const auto life = estimate_lifetime(p);
    EXPECT_NEAR(life.segment_energy_mj, seg_mj, 1e-12);
    EXPECT_NEAR(life.daily_energy_mj, daily, 1e-6);
    EXPECT_NEAR(life.battery_days, 72000.0 * 3600.0 / daily, 1e-9);
    EXPECT_EQ(life.lifetime_days(), std::min(life.storage_days, life.battery_days));
}

TEST(Lifetime, BatteryMonotoneInActivityAndCost) {
    DeploymentProfile p;
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 10; ++i) {
        p.active_fraction = i / 10.0;
        p.store_fraction = std::min(p.store_fraction, p.active_fraction);
        const double days = estimate_lifetime(p).battery_days;
        EXPECT_LE(days, prev) << i;
        prev = days;
    }
    p = DeploymentProfile{};
    const double base = estimate_lifetime(p).battery_days;
    p.table.transformer_time.energy_total_mj *= 2.0;
    p.table.transformer_time.energy_inference_mj *= 2.0;
    EXPECT_LT(estimate_lifetime(p).battery_days, base);
}

TEST(Lifetime, ScreeningVersusAlwaysInference) {
    DeploymentProfile full;
    DeploymentProfile always = full;
    always.variant = Variant::SkipBaseline;
    const double with_idle = estimate_lifetime(full).battery_days / estimate_lifetime(always).battery_days;
    // Idle draw between segments dominates both budgets.
    EXPECT_GT(with_idle, 1.0);

    full.table.idle_power_mw = 0.0;
    always.table.idle_power_mw = 0.0;
    const double active_only = estimate_lifetime(full).battery_days / estimate_lifetime(always).battery_days;
    EXPECT_NEAR(active_only, 19.268 / (2.136 + 0.1 * 19.268), 1e-9);
    EXPECT_GE(active_only, 3.0);
}

TEST(Lifetime, PowerSavingDirectStoresSkipInference) {
    DeploymentProfile p;
    p.variant = Variant::PowerSaving;
    p.direct_store_fraction = 0.05;
    EXPECT_NEAR(estimate_lifetime(p).segment_energy_mj, 2.136 + 0.05 * 19.268, 1e-12);
    p.direct_store_fraction = 0.2;
    EXPECT_EQ(error_code([&] { estimate_lifetime(p); }), Errc::InvalidConfig);
}

TEST(Lifetime, Errors) {
    DeploymentProfile p;
    p.battery_mwh = 0.0;
    EXPECT_EQ(error_code([&] { estimate_lifetime(p); }), Errc::ZeroCapacity);
    p = DeploymentProfile{};
    p.sd_bytes = 0.0;
    EXPECT_EQ(error_code([&] { estimate_lifetime(p); }), Errc::ZeroCapacity);
    p = DeploymentProfile{};
    p.active_fraction = 1.5;
    EXPECT_EQ(error_code([&] { estimate_lifetime(p); }), Errc::InvalidConfig);
    p = DeploymentProfile{};
    p.store_fraction = 0.0;
    EXPECT_TRUE(std::isinf(estimate_lifetime(p).storage_days));
    EXPECT_EQ(estimate_lifetime(p).limiting_factor, LimitingFactor::Battery);
}

}  // namespace
