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

// Binary classification metrics over Target-probability scores.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tinychirp/audio_io.hpp"

namespace tinychirp::metrics {

using audio::Label;

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const Confusion&) const = default;
};

/// Predicts Target iff score >= t. Throws Error{LengthMismatch} or Error{EmptyInput}.
Confusion confusion(std::span<const double> scores, std::span<const Label> labels, double t);

double accuracy(const Confusion& c) noexcept;
/// 0 when tp + fp == 0.
double precision(const Confusion& c) noexcept;
/// 0 when tp + fn == 0.
double recall(const Confusion& c) noexcept;
/// 0 when fp + tn == 0.
double false_positive_rate(const Confusion& c) noexcept;
/// (1 + b^2) P R / (b^2 P + R); 0 when P = R = 0.
double fbeta(double precision, double recall, double beta) noexcept;
double fbeta(const Confusion& c, double beta) noexcept;

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

/// Starts at (0, 0) with threshold +inf; one further point per distinct
/// score, in decreasing order, ending at (1, 1).
struct RocCurve {
    std::vector<RocPoint> points;
};

/// Throws Error{LengthMismatch}, Error{EmptyInput} or Error{SingleClassInput}.
RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels);
/// Trapezoidal area under the curve.
double auc(const RocCurve& curve) noexcept;

struct ThresholdMetrics {
    double threshold = 0.0;
    Confusion confusion;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fbeta = 0.0;
};

/// Metrics at 0, 1 and every distinct score, ascending by threshold.
std::vector<ThresholdMetrics> threshold_sweep(std::span<const double> scores, std::span<const Label> labels,
                                              double beta);

/// Best F_beta over threshold_sweep(); ties go to the smallest threshold.
/// Throws Error{SingleClassInput}.
ThresholdMetrics optimize_threshold(std::span<const double> scores, std::span<const Label> labels, double beta);

}  // namespace tinychirp::metrics
