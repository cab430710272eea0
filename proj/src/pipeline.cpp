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
#include "tinychirp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "tinychirp/container.hpp"
#include "tinychirp/error.hpp"
#include "tinychirp/streaming.hpp"

namespace tinychirp::pipeline {
namespace {

using json = nlohmann::json;

bool has_model(Variant v) noexcept { return v != Variant::BaselineOnly; }

std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void ScreeningConfig::validate() const {
    if (!(t_low > 0.0) || !(t_low <= t_high))
        throw Error(Errc::InvalidConfig, "thresholds must satisfy 0 < t_low <= t_high");
    if (!(t_model >= 0.0 && t_model <= 1.0)) throw Error(Errc::InvalidConfig, "t_model must lie in [0, 1]");
    if (has_model(variant) && model == ModelChoice::None)
        throw Error(Errc::InvalidConfig, std::string(to_string(variant)) + " variant needs a model");
    if (!has_model(variant) && model != ModelChoice::None)
        throw Error(Errc::InvalidConfig, "baseline variant does not run a model");
    energy.validate();
}

ScreeningConfig make_config(Variant variant, ModelChoice model) {
    ScreeningConfig cfg;
    cfg.variant = variant;
    cfg.model = variant == Variant::BaselineOnly ? ModelChoice::None : model;
    cfg.t_model = default_model_threshold(cfg.model);
    return cfg;
}

nn::ModelGraph graph_for(ModelChoice choice) {
    switch (choice) {
        case ModelChoice::CnnTime: return nn::build_cnn_time();
        case ModelChoice::TransformerTime: return nn::build_transformer_time();
        case ModelChoice::CnnMel: return nn::build_cnn_mel();
        case ModelChoice::None: break;
    }
    throw Error(Errc::InvalidConfig, "no model selected");
}

ModelBundle::ModelBundle(ModelChoice choice, nn::WeightSet weights)
    : choice_(choice), graph_(graph_for(choice)), weights_(std::move(weights)) {
    nn::validate_weights(graph_, std::get<nn::WeightSet>(weights_));
}

ModelBundle::ModelBundle(ModelChoice choice, quant::QuantModel qmodel)
    : choice_(choice), graph_(graph_for(choice)), weights_(std::move(qmodel)) {
    if (std::get<quant::QuantModel>(weights_).graph().name() != graph_.name())
        throw Error(Errc::ShapeMismatch, "quantized model does not match " + graph_.name());
}

ModelBundle ModelBundle::seeded(ModelChoice choice, std::uint64_t seed) {
    return ModelBundle(choice, nn::seeded_init(graph_for(choice), seed));
}

ModelBundle ModelBundle::load(ModelChoice choice, const std::filesystem::path& path) {
    const nn::ModelGraph graph = graph_for(choice);
    const nn::Container c = nn::read_container(path);
    if (c.model != graph.name())
        throw Error(Errc::ShapeMismatch, path.string() + " holds " + c.model + " weights, expected " + graph.name());
    const bool int8 = !c.tensors.empty() && c.tensors.front().dtype == nn::DType::I8;
    if (int8) return ModelBundle(choice, quant::load_quant_model(graph, path));
    return ModelBundle(choice, nn::load_weights(graph, path));
}

nn::Tensor ModelBundle::input_for(const audio::AudioSegment& segment) const {
    if (choice_ == ModelChoice::CnnMel) {
        const dsp::MelSpectrogram mel = dsp::log_mel(segment);
        return nn::Tensor({1, mel.frames, mel.mels}, mel.values);
    }
    return nn::Tensor({1, segment.samples.size()}, segment.samples);
}

double ModelBundle::score(const audio::AudioSegment& segment) const {
    const nn::Tensor x = input_for(segment);
    std::array<float, 2> probs{};
    if (const auto* q = std::get_if<quant::QuantModel>(&weights_)) {
        probs = quant::quantized_forward(*q, x);
    } else {
        const auto& w = std::get<nn::WeightSet>(weights_);
        if (streaming_ && choice_ != ModelChoice::CnnMel) {
            if (x.shape != graph_.input_shape())
                throw Error(Errc::ShapeMismatch, graph_.name() + " expects " + nn::shape_string(graph_.input_shape()) +
                                                     " input, got " + nn::shape_string(x.shape));
            probs = stream::streaming_forward(graph_, w, x.data);
        } else {
            probs = nn::forward(graph_, w, x);
        }
    }
    return probs[nn::kTargetClass];
}

std::string stored_name(const audio::AudioSegment& segment) {
    const std::string stem = std::filesystem::path(segment.source_id).stem().string();
    const auto offset_ms = std::llround(segment.offset_s * 1000.0);
    return (stem.empty() ? std::string("segment") : stem) + "_" + std::to_string(offset_ms) + ".wav";
}

DirectorySink::DirectorySink(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(Errc::SinkFailure, "cannot create " + dir_.string() + ": " + ec.message());
}

void DirectorySink::store(const audio::AudioSegment& segment) {
    audio::AudioSignal sig{segment.samples, segment.sample_rate, 1};
    const auto path = dir_ / stored_name(segment);
    std::lock_guard lock(mutex_);
    try {
        audio::write_wav(sig, path);
    } catch (const Error& e) {
        throw Error(Errc::SinkFailure, e.what());
    }
}

void MemorySink::store(const audio::AudioSegment& segment) {
    std::lock_guard lock(mutex_);
    names_.push_back(stored_name(segment));
}

std::vector<std::string> MemorySink::names() const {
    std::lock_guard lock(mutex_);
    return names_;
}

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::Baseline: return "baseline";
        case Stage::Inference: return "inference";
        case Stage::Storage: return "storage";
    }
    return "?";
}

const dsp::FilterSOS& baseline_filter() {
    static const dsp::FilterSOS filter = dsp::design_butterworth_highpass(kFilterOrder, kFilterCutoffHz, kSampleRate);
    return filter;
}

dsp::PowerReading baseline_power(const audio::AudioSegment& segment, const dsp::FilterSOS& filter) {
    return dsp::signal_power(dsp::filter_apply(filter, dsp::minmax_normalize(segment)));
}

ScreeningOutcome screen_segment(const audio::AudioSegment& segment, const ScreeningConfig& cfg,
                                const ModelBundle* model, Sink& sink) {
    if (segment.sample_rate != kSampleRate)
        throw Error(Errc::SampleRateMismatch, "segment at " + std::to_string(segment.sample_rate) + " Hz, expected " +
                                                  std::to_string(kSampleRate) + " Hz");
    if (segment.samples.size() != nn::kSegmentSamples)
        throw Error(Errc::SegmentTooShort, "segment has " + std::to_string(segment.samples.size()) +
                                               " samples, expected " + std::to_string(nn::kSegmentSamples));
    if (has_model(cfg.variant) && model == nullptr)
        throw Error(Errc::ModelMissing, std::string(to_string(cfg.variant)) + " variant needs a loaded model");
    if (has_model(cfg.variant) && model->choice() != cfg.model)
        throw Error(Errc::ModelMissing, "loaded model is " + std::string(to_string(model->choice())) +
                                            ", configuration asks for " + std::string(to_string(cfg.model)));

    ScreeningOutcome out;
    const auto finish = [&](Verdict v) {
        out.verdict = v;
        if (v == Verdict::StoredDirect || v == Verdict::StoredAfterModel) {
            out.stage_trace.push_back(Stage::Storage);
            sink.store(segment);
        }
        out.energy_mj = budget::verdict_energy_mj(v, cfg.variant, cfg.model, cfg.energy);
        return out;
    };

    if (cfg.variant != Variant::SkipBaseline) {
        out.stage_trace.push_back(Stage::Baseline);
        out.power = baseline_power(segment, baseline_filter());
        if (out.power->p < cfg.t_low) return finish(Verdict::DiscardedIdle);
        if (cfg.variant == Variant::BaselineOnly) return finish(Verdict::StoredDirect);
        if (cfg.power_saving() && out.power->p >= cfg.t_high) return finish(Verdict::StoredDirect);
    }
    out.stage_trace.push_back(Stage::Inference);
    out.model_score = model->score(segment);
    return finish(*out.model_score < cfg.t_model ? Verdict::DiscardedByModel : Verdict::StoredAfterModel);
}

std::vector<InputFile> collect_inputs(const std::filesystem::path& src) {
    std::vector<InputFile> inputs;
    if (std::filesystem::is_directory(src)) {
        for (const auto& entry : std::filesystem::directory_iterator(src))
            if (entry.is_regular_file() && lower_extension(entry.path()) == ".wav")
                inputs.push_back({entry.path(), std::nullopt});
        std::sort(inputs.begin(), inputs.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    } else if (lower_extension(src) == ".csv") {
        for (const auto& e : audio::load_manifest(src).entries) inputs.push_back({e.path, e.label});
    } else if (std::filesystem::is_regular_file(src)) {
        inputs.push_back({src, std::nullopt});
    } else {
        throw Error(Errc::IoFailure, src.string() + " does not exist");
    }
    return inputs;
}

std::vector<audio::AudioSegment> load_segments(const InputFile& input) {
    audio::AudioSignal sig = audio::to_mono(audio::read_wav(input.path));
    if (sig.sample_rate != kSampleRate) sig = dsp::downsample_zoh(sig, kSampleRate);
    auto segments = audio::segment(sig, audio::kSegmentSeconds, input.path.string());
    for (auto& s : segments) s.label = input.label;
    return segments;
}

bool SessionReport::operator==(const SessionReport& o) const {
    return report_json(*this) == report_json(o);
}

SessionReport run_pipeline(const std::vector<InputFile>& inputs, const ScreeningConfig& cfg,
                           const ModelBundle* model, Sink& sink, const RunOptions& options) {
    cfg.validate();
    if (has_model(cfg.variant) && model == nullptr)
        throw Error(Errc::ModelMissing, std::string(to_string(cfg.variant)) + " variant needs a loaded model");

    struct FileResult {
        std::vector<SegmentRecord> records;
        std::optional<FileError> error;
    };
    std::vector<FileResult> results(inputs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
            const InputFile& in = inputs[i];
            FileResult& r = results[i];
            try {
                for (const auto& seg : load_segments(in)) {
                    const ScreeningOutcome o = screen_segment(seg, cfg, model, sink);
                    SegmentRecord rec;
                    rec.source = in.path.string();
                    rec.offset_s = seg.offset_s;
                    rec.verdict = o.verdict;
                    if (o.power) rec.power = o.power->p;
                    rec.score = o.model_score;
                    rec.label = in.label;
                    rec.energy_mj = o.energy_mj;
                    r.records.push_back(std::move(rec));
                }
            } catch (const Error& e) {
                r.error = FileError{in.path.string(), std::string(to_string(e.code())), e.what()};
            } catch (const std::exception& e) {
                r.error = FileError{in.path.string(), "Internal", e.what()};
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(inputs.size())));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    SessionReport report;
    report.config = cfg;
    if (model != nullptr && has_model(cfg.variant)) report.weights_dtype = model->dtype();
    for (auto& r : results) {
        for (auto& rec : r.records) report.per_segment.push_back(std::move(rec));
        if (r.error) report.errors.push_back(std::move(*r.error));
    }
    std::stable_sort(report.per_segment.begin(), report.per_segment.end(), [](const auto& a, const auto& b) {
        return a.source != b.source ? a.source < b.source : a.offset_s < b.offset_s;
    });
    std::sort(report.errors.begin(), report.errors.end(),
              [](const auto& a, const auto& b) { return a.source < b.source; });

    bool labelled = !report.per_segment.empty();
    metrics::Confusion c;
    for (const auto& rec : report.per_segment) {
        ++report.counts[rec.verdict];
        report.energy_mj_total += rec.energy_mj;
        if (!rec.label) {
            labelled = false;
            continue;
        }
        const bool stored = rec.verdict == Verdict::StoredDirect || rec.verdict == Verdict::StoredAfterModel;
        const bool target = *rec.label == audio::Label::Target;
        if (stored && target) ++c.tp;
        else if (stored) ++c.fp;
        else if (target) ++c.fn;
        else ++c.tn;
    }
    if (labelled) report.confusion = c;
    return report;
}

std::string report_json(const SessionReport& r, int indent) {
    json j;
    j["config"] = {{"t_low", r.config.t_low},
                   {"t_high", r.config.t_high},
                   {"t_model", r.config.t_model},
                   {"variant", to_string(r.config.variant)},
                   {"model", to_string(r.config.model)},
                   {"power_saving", r.config.power_saving()}};
    if (!r.weights_dtype.empty()) j["config"]["weights_dtype"] = r.weights_dtype;
    json counts = json::object();
    for (Verdict v : kAllVerdicts) counts[std::string(to_string(v))] = r.counts[v];
    j["counts"] = counts;
    j["segments"] = r.counts.total();
    j["energy_mj_total"] = r.energy_mj_total;
    json segs = json::array();
    for (const auto& s : r.per_segment) {
        json e = {{"source", s.source},
                  {"offset_s", s.offset_s},
                  {"verdict", to_string(s.verdict)},
                  {"power", optional_json(s.power)},
                  {"energy_mj", s.energy_mj}};
        if (s.score) e["score"] = *s.score;
        if (s.label) e["label"] = audio::to_string(*s.label);
        segs.push_back(std::move(e));
    }
    j["per_segment"] = std::move(segs);
    json errs = json::array();
    for (const auto& e : r.errors) errs.push_back({{"source", e.source}, {"code", e.code}, {"message", e.message}});
    j["errors"] = std::move(errs);
    if (r.confusion)
        j["confusion"] = {{"tp", r.confusion->tp}, {"fp", r.confusion->fp}, {"tn", r.confusion->tn},
                          {"fn", r.confusion->fn}};
    return j.dump(indent);
}

}  // namespace tinychirp::pipeline
