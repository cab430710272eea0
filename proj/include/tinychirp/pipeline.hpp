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

// Baseline gate, optional model inference and storage of 3 s segments.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tinychirp/audio_io.hpp"
#include "tinychirp/budget.hpp"
#include "tinychirp/dsp.hpp"
#include "tinychirp/metrics.hpp"
#include "tinychirp/nn.hpp"
#include "tinychirp/quantization.hpp"
#include "tinychirp/screening.hpp"

namespace tinychirp::pipeline {

inline constexpr int kSampleRate = 16000;
inline constexpr int kFilterOrder = 9;
inline constexpr double kFilterCutoffHz = 7000.0;

struct ScreeningConfig {
    double t_low = kDefaultTLow;
    double t_high = kDefaultTHigh;
    double t_model = 0.5;
    Variant variant = Variant::BaselineOnly;
    ModelChoice model = ModelChoice::None;
    budget::EnergyTable energy = budget::EnergyTable::reference();

    bool power_saving() const noexcept { return variant == Variant::PowerSaving; }
    /// Throws Error{InvalidConfig} unless 0 < t_low <= t_high, 0 <= t_model <= 1
    /// and a model is chosen exactly when the variant runs one.
    void validate() const;
};

/// Config for a variant with the tuned threshold of the chosen model.
ScreeningConfig make_config(Variant variant, ModelChoice model);

/// A model graph with either float or int8 weights.
class ModelBundle {
public:
    ModelBundle(ModelChoice choice, nn::WeightSet weights);
    ModelBundle(ModelChoice choice, quant::QuantModel qmodel);

    /// Seeded float weights (see nn::seeded_init).
    static ModelBundle seeded(ModelChoice choice, std::uint64_t seed);
    /// Reads a TCHW container holding f32 or i8 tensors.
    static ModelBundle load(ModelChoice choice, const std::filesystem::path& path);

    ModelChoice choice() const noexcept { return choice_; }
    const nn::ModelGraph& graph() const noexcept { return graph_; }
    bool quantized() const noexcept { return std::holds_alternative<quant::QuantModel>(weights_); }
    std::string dtype() const { return quantized() ? "i8" : "f32"; }
    const nn::WeightSet* float_weights() const noexcept { return std::get_if<nn::WeightSet>(&weights_); }
    /// Float time-series models run the streaming prefix by default.
    void set_streaming(bool on) noexcept { streaming_ = on; }

    /// Model input for a 16 kHz, 3 s segment: raw samples {1, 48000} for the
    /// time-series models, the {1, 184, 80} log-Mel matrix for CNN-Mel.
    nn::Tensor input_for(const audio::AudioSegment& segment) const;
    /// Probability of Target.
    double score(const audio::AudioSegment& segment) const;

private:
    ModelChoice choice_;
    nn::ModelGraph graph_;
    std::variant<nn::WeightSet, quant::QuantModel> weights_;
    bool streaming_ = true;
};

/// Throws Error{InvalidConfig} for ModelChoice::None.
nn::ModelGraph graph_for(ModelChoice choice);

class Sink {
public:
    virtual ~Sink() = default;
    /// Throws Error{SinkFailure}.
    virtual void store(const audio::AudioSegment& segment) = 0;
};

/// <stem>_<offset_ms>.wav
std::string stored_name(const audio::AudioSegment& segment);

/// Writes PCM16 WAVs into a directory; safe to share between threads.
class DirectorySink final : public Sink {
public:
    explicit DirectorySink(std::filesystem::path dir);
    void store(const audio::AudioSegment& segment) override;
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    std::mutex mutex_;
};

/// Keeps the names of stored segments; for dry runs and tests.
class MemorySink final : public Sink {
public:
    void store(const audio::AudioSegment& segment) override;
    std::vector<std::string> names() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> names_;
};

enum class Stage { Baseline, Inference, Storage };
std::string_view to_string(Stage s) noexcept;

struct ScreeningOutcome {
    Verdict verdict = Verdict::DiscardedIdle;
    std::optional<dsp::PowerReading> power;  // absent when the baseline is skipped
    std::optional<double> model_score;       // present iff a model ran
    std::vector<Stage> stage_trace;
    double energy_mj = 0.0;
};

/// Baseline power of a segment: mean square of the high-passed, min-max
/// normalised copy.
dsp::PowerReading baseline_power(const audio::AudioSegment& segment, const dsp::FilterSOS& filter);
const dsp::FilterSOS& baseline_filter();

/// Throws Error{SampleRateMismatch}, Error{SegmentTooShort}, Error{ModelMissing}
/// or Error{SinkFailure}.
ScreeningOutcome screen_segment(const audio::AudioSegment& segment, const ScreeningConfig& cfg,
                                const ModelBundle* model, Sink& sink);

struct InputFile {
    std::filesystem::path path;
    std::optional<audio::Label> label;
};

/// A "path,label,split" manifest, a directory of .wav files (sorted, not
/// recursive) or a single .wav file.
std::vector<InputFile> collect_inputs(const std::filesystem::path& manifest_or_dir);

/// 16 kHz mono 3 s segments of one recording (channel 0, zero-order-hold
/// decimation). Throws audio errors or Error{UpsampleRequested}.
std::vector<audio::AudioSegment> load_segments(const InputFile& input);

struct SegmentRecord {
    std::string source;
    double offset_s = 0.0;
    Verdict verdict = Verdict::DiscardedIdle;
    std::optional<double> power;
    std::optional<double> score;
    std::optional<audio::Label> label;
    double energy_mj = 0.0;
};

struct FileError {
    std::string source;
    std::string code;
    std::string message;
};

struct SessionReport {
    ScreeningConfig config;
    std::string weights_dtype;  // empty without a model
    VerdictCounts counts;
    double energy_mj_total = 0.0;
    std::vector<SegmentRecord> per_segment;  // sorted by source, then offset
    std::vector<FileError> errors;
    std::optional<metrics::Confusion> confusion;  // stored == predicted Target

    bool operator==(const SessionReport& other) const;
};

struct RunOptions {
    unsigned jobs = 1;
};

/// Screens every segment of every input. A file that fails to load is
/// recorded in errors and skipped.
SessionReport run_pipeline(const std::vector<InputFile>& inputs, const ScreeningConfig& cfg,
                           const ModelBundle* model, Sink& sink, const RunOptions& options = {});

std::string report_json(const SessionReport& report, int indent = 2);

}  // namespace tinychirp::pipeline
