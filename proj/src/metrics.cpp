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
#include "tinychirp/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "tinychirp/error.hpp"

namespace tinychirp::metrics {
namespace {

void check_inputs(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size())
        throw Error(Errc::LengthMismatch, std::to_string(scores.size()) + " scores but " +
                                              std::to_string(labels.size()) + " labels");
    if (scores.empty()) throw Error(Errc::EmptyInput, "no samples");
}

void check_both_classes(std::span<const Label> labels) {
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Target));
    if (positives == 0 || positives == labels.size())
        throw Error(Errc::SingleClassInput, "both Target and NonTarget samples are required");
}

double ratio(std::size_t num, std::size_t den) noexcept {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ThresholdMetrics at(const Confusion& c, double t, double beta) {
    return {t, c, accuracy(c), precision(c), recall(c), fbeta(c, beta)};
}

}  // namespace

Confusion confusion(std::span<const double> scores, std::span<const Label> labels, double t) {
    check_inputs(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= t;
        const bool actual = labels[i] == Label::Target;
        if (predicted && actual) ++c.tp;
        else if (predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double accuracy(const Confusion& c) noexcept { return ratio(c.tp + c.tn, c.total()); }
double precision(const Confusion& c) noexcept { return ratio(c.tp, c.tp + c.fp); }
double recall(const Confusion& c) noexcept { return ratio(c.tp, c.tp + c.fn); }
double false_positive_rate(const Confusion& c) noexcept { return ratio(c.fp, c.fp + c.tn); }

double fbeta(double p, double r, double beta) noexcept {
    const double b2 = beta * beta;
    const double den = b2 * p + r;
    return den == 0.0 ? 0.0 : (1.0 + b2) * p * r / den;
}

double fbeta(const Confusion& c, double beta) noexcept { return fbeta(precision(c), recall(c), beta); }

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels) {
    check_inputs(scores, labels);
    check_both_classes(labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Target));
    const std::size_t negatives = labels.size() - positives;
    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        // Equal scores cross the threshold together.
        for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == Label::Target ? tp : fp)++;
        curve.points.push_back({ratio(fp, negatives), ratio(tp, positives), s});
    }
    return curve;
}

double auc(const RocCurve& curve) noexcept {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

std::vector<ThresholdMetrics> threshold_sweep(std::span<const double> scores, std::span<const Label> labels,
                                              double beta) {
    check_inputs(scores, labels);
    std::vector<double> candidates(scores.begin(), scores.end());
    candidates.push_back(0.0);
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Sorted scores let each threshold's counts come from one binary search.
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == Label::Target ? pos : neg).push_back(scores[i]);
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());

    std::vector<ThresholdMetrics> rows;
    rows.reserve(candidates.size());
    for (double t : candidates) {
        const auto below_pos = static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), t) - pos.begin());
        const auto below_neg = static_cast<std::size_t>(std::lower_bound(neg.begin(), neg.end(), t) - neg.begin());
        const Confusion c{pos.size() - below_pos, neg.size() - below_neg, below_neg, below_pos};
        rows.push_back(at(c, t, beta));
    }
    return rows;
}

ThresholdMetrics optimize_threshold(std::span<const double> scores, std::span<const Label> labels, double beta) {
    check_inputs(scores, labels);
    check_both_classes(labels);
    const auto rows = threshold_sweep(scores, labels, beta);
    const ThresholdMetrics* best = &rows.front();
    for (const auto& row : rows)
        if (row.fbeta > best->fbeta) best = &row;
    return *best;
}

}  // namespace tinychirp::metrics
