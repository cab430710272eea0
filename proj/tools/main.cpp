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
// tinychirp command-line front end.
//
// Exit codes: 0 success, 1 data errors (bad files, failed checks), 2 usage errors.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "tinychirp/audio_io.hpp"
#include "tinychirp/budget.hpp"
#include "tinychirp/container.hpp"
#include "tinychirp/dsp.hpp"
#include "tinychirp/error.hpp"
#include "tinychirp/kernels.hpp"
#include "tinychirp/metrics.hpp"
#include "tinychirp/nn.hpp"
#include "tinychirp/pipeline.hpp"
#include "tinychirp/quantization.hpp"
#include "tinychirp/streaming.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tinychirp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kVariantNames = {"baseline", "skip-baseline", "full", "power-saving"};
const std::vector<std::string> kModelNames = {"cnn_time", "transformer_time", "cnn_mel"};

ModelChoice model_from(const std::string& name) {
    const auto m = parse_model_choice(name);
    if (!m || *m == ModelChoice::None) throw UsageError("unknown model '" + name + "'");
    return *m;
}

pipeline::ModelBundle load_bundle(ModelChoice model, const std::string& weights, std::uint64_t seed) {
    if (weights.empty()) {
        std::cerr << "note: no --weights given, using seeded " << to_string(model) << " weights (seed " << seed
                  << ")\n";
        return pipeline::ModelBundle::seeded(model, seed);
    }
    return pipeline::ModelBundle::load(model, weights);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
    out << text << '\n';
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessOptions {
    std::string in_dir;
    std::string out_dir;
    bool mel = false;
    std::string mel_format = "csv";
    unsigned jobs = 1;
};

int cmd_preprocess(const PreprocessOptions& o) {
    if (!fs::is_directory(o.in_dir)) throw UsageError(o.in_dir + " is not a directory");
    const auto inputs = pipeline::collect_inputs(o.in_dir);
    if (inputs.empty()) {
        std::cerr << "warning: no .wav files in " << o.in_dir << '\n';
        return kExitOk;
    }
    fs::create_directories(o.out_dir);

    struct Result {
        std::size_t segments = 0;
        std::string error;
    };
    std::vector<Result> results(inputs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
            try {
                for (const auto& seg : pipeline::load_segments(inputs[i])) {
                    const fs::path wav = fs::path(o.out_dir) / pipeline::stored_name(seg);
                    audio::write_wav({seg.samples, seg.sample_rate, 1}, wav);
                    if (o.mel) {
                        const auto m = dsp::log_mel(seg);
                        fs::path out = wav;
                        if (o.mel_format == "tcsp") {
                            dsp::write_matrix_tcsp(out.replace_extension(".mel.tcsp"), m.frames, m.mels, m.values);
                        } else {
                            dsp::write_matrix_csv(out.replace_extension(".mel.csv"), m.frames, m.mels, m.values);
                        }
                    }
                    ++results[i].segments;
                }
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        }
    };
    const unsigned jobs = std::clamp<unsigned>(o.jobs, 1, static_cast<unsigned>(inputs.size()));
    {
        std::vector<std::jthread> pool;
        for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
        worker();
    }

    std::size_t segments = 0, failed = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        segments += results[i].segments;
        if (!results[i].error.empty()) {
            ++failed;
            std::cerr << "error: " << inputs[i].path.string() << ": " << results[i].error << '\n';
        }
    }
    std::cerr << "preprocessed " << inputs.size() - failed << " of " << inputs.size() << " files into " << segments
              << " segments\n";
    return failed == 0 ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

struct ScreenOptions {
    std::string input;
    std::string variant = "full";
    std::string model = "transformer_time";
    std::string weights;
    std::uint64_t seed = 1;
    double t_low = kDefaultTLow;
    double t_high = kDefaultTHigh;
    std::optional<double> t_model;
    std::string out;
    std::string report;
    unsigned jobs = 1;
    bool no_streaming = false;
};

int cmd_screen(const ScreenOptions& o) {
    const Variant variant = *parse_variant(o.variant);
    pipeline::ScreeningConfig cfg = pipeline::make_config(variant, model_from(o.model));
    cfg.t_low = o.t_low;
    cfg.t_high = o.t_high;
    if (o.t_model) cfg.t_model = *o.t_model;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    std::optional<pipeline::ModelBundle> bundle;
    if (variant != Variant::BaselineOnly) {
        bundle.emplace(load_bundle(cfg.model, o.weights, o.seed));
        bundle->set_streaming(!o.no_streaming);
    }
    std::unique_ptr<pipeline::Sink> sink;
    if (o.out.empty()) {
        sink = std::make_unique<pipeline::MemorySink>();
    } else {
        sink = std::make_unique<pipeline::DirectorySink>(o.out);
    }
    const auto inputs = pipeline::collect_inputs(o.input);
    if (inputs.empty()) std::cerr << "warning: no inputs found in " << o.input << '\n';
    const auto report =
        pipeline::run_pipeline(inputs, cfg, bundle ? &*bundle : nullptr, *sink, {std::max(1u, o.jobs)});
    write_text(o.report, pipeline::report_json(report));
    for (const auto& e : report.errors) std::cerr << "error: " << e.source << ": " << e.message << '\n';
    return report.errors.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string scores;
    std::string model;
    std::string weights;
    std::string manifest;
    std::uint64_t seed = 1;
    double beta = 2.0;
    std::string roc_csv;
    std::string out;
};

void read_scores_csv(const std::string& path, std::vector<double>& scores, std::vector<audio::Label>& labels) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "score,label") throw Error(Errc::MalformedHeader, path + ": header must be 'score,label'");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error(Errc::MalformedHeader, path + ":" + std::to_string(line_no) + ": expected 'score,label'");
        try {
            scores.push_back(std::stod(line.substr(0, comma)));
        } catch (const std::exception&) {
            throw Error(Errc::MalformedHeader, path + ":" + std::to_string(line_no) + ": bad score");
        }
        labels.push_back(audio::parse_label(line.substr(comma + 1)));
    }
}

int cmd_eval(const EvalOptions& o) {
    std::vector<double> scores;
    std::vector<audio::Label> labels;
    if (!o.scores.empty()) {
        read_scores_csv(o.scores, scores, labels);
    } else {
        if (o.model.empty() || o.manifest.empty())
            throw UsageError("eval needs --scores, or --model with --manifest");
        const auto bundle = load_bundle(model_from(o.model), o.weights, o.seed);
        for (const auto& in : pipeline::collect_inputs(o.manifest)) {
            if (!in.label) throw UsageError("eval needs a labelled manifest");
            for (const auto& seg : pipeline::load_segments(in)) {
                scores.push_back(bundle.score(seg));
                labels.push_back(*in.label);
            }
        }
    }

    const auto sweep = metrics::threshold_sweep(scores, labels, o.beta);
    const auto roc = metrics::roc_curve(scores, labels);
    const auto best = metrics::optimize_threshold(scores, labels, o.beta);
    const auto row_json = [](const metrics::ThresholdMetrics& r) {
        return json{{"threshold", r.threshold}, {"tp", r.confusion.tp},   {"fp", r.confusion.fp},
                    {"tn", r.confusion.tn},     {"fn", r.confusion.fn},   {"accuracy", r.accuracy},
                    {"precision", r.precision}, {"recall", r.recall},     {"fbeta", r.fbeta}};
    };
    json j;
    j["samples"] = scores.size();
    j["beta"] = o.beta;
    j["per_threshold"] = json::array();
    for (const auto& r : sweep) j["per_threshold"].push_back(row_json(r));
    j["roc"] = json::array();
    for (const auto& p : roc.points)
        j["roc"].push_back({{"fpr", p.fpr},
                            {"tpr", p.tpr},
                            {"threshold", std::isinf(p.threshold) ? json(nullptr) : json(p.threshold)}});
    j["auc"] = metrics::auc(roc);
    j["t_star"] = best.threshold;
    j["metrics"] = row_json(best);
    write_text(o.out, j.dump(2));

    if (!o.roc_csv.empty()) {
        std::ofstream csv(o.roc_csv);
        if (!csv) throw Error(Errc::IoFailure, "cannot write " + o.roc_csv);
        csv << "fpr,tpr,threshold\n" << std::setprecision(17);
        for (const auto& p : roc.points) csv << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyOptions {
    std::size_t trials = 200;
    std::uint64_t seed = 7;
};

int cmd_verify(const VerifyOptions& o) {
    nn::SplitMix64 seeds(o.seed);
    std::size_t failures = 0;
    for (std::size_t t = 0; t < o.trials; ++t) {
        const std::uint64_t trial_seed = seeds.next();
        const auto r = stream::random_trial(trial_seed);
        if (!r.pass) ++failures;
        std::cout << json{{"trial", t},
                          {"seed", trial_seed},
                          {"config", r.config},
                          {"n", r.input_length},
                          {"max_abs_err", r.max_abs_err},
                          {"max_rel_err", r.max_rel_err},
                          {"peak_values_stream", r.peak_values_stream},
                          {"peak_values_naive", r.peak_values_naive},
                          {"ratio", r.ratio},
                          {"pass", r.pass}}
                         .dump()
                  << '\n';
    }
    if (failures > 0) std::cerr << failures << " of " << o.trials << " trials exceeded tolerance\n";
    return failures == 0 ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// quantize
// ---------------------------------------------------------------------------

struct QuantizeOptions {
    std::string model = "cnn_time";
    std::string weights;
    std::uint64_t seed = 1;
    std::string calib;
    std::string out;
    std::size_t max_inputs = 64;
};

int cmd_quantize(const QuantizeOptions& o) {
    const ModelChoice choice = model_from(o.model);
    const auto bundle = load_bundle(choice, o.weights, o.seed);
    if (bundle.quantized()) throw UsageError("weights are already int8");

    std::vector<nn::Tensor> calib;
    for (const auto& in : pipeline::collect_inputs(o.calib)) {
        for (const auto& seg : pipeline::load_segments(in)) {
            if (calib.size() >= o.max_inputs) break;
            calib.push_back(bundle.input_for(seg));
        }
    }
    const auto qmodel = quant::calibrate(bundle.graph(), *bundle.float_weights(), calib);
    quant::save_quant_model(qmodel, o.out);

    std::size_t float_bytes = 0;
    for (const auto& [layer, tensors] : bundle.float_weights()->layers)
        for (const auto& t : tensors) float_bytes += t.data.size() * sizeof(float);
    std::size_t int8_bytes = 0;
    for (const auto& [layer, tensors] : qmodel.weights())
        for (const auto& t : tensors) int8_bytes += t.values.size();
    std::cout << json{{"model", bundle.graph().name()},
                      {"calibration_inputs", calib.size()},
                      {"activation_boundaries", qmodel.activations().size()},
                      {"float_weight_bytes", float_bytes},
                      {"int8_weight_bytes", int8_bytes},
                      {"out", o.out}}
                     .dump(2)
              << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// budget
// ---------------------------------------------------------------------------

struct BudgetOptions {
    budget::DeploymentProfile profile;
    std::string variant = "full";
    std::string model = "transformer_time";
    std::optional<double> idle_power_mw;
    bool json_output = false;
};

int cmd_budget(BudgetOptions o) {
    o.profile.variant = *parse_variant(o.variant);
    o.profile.model = model_from(o.model);
    if (o.idle_power_mw) o.profile.table.idle_power_mw = *o.idle_power_mw;
    budget::Lifetime life;
    try {
        life = budget::estimate_lifetime(o.profile);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const auto& p = o.profile;
    if (o.json_output) {
        std::cout << json{{"profile",
                           {{"battery_mwh", p.battery_mwh},
                            {"sd_bytes", p.sd_bytes},
                            {"record_rate_bytes_per_s", p.record_rate_bytes_per_s},
                            {"segment_s", p.segment_s},
                            {"active_fraction", p.active_fraction},
                            {"store_fraction", p.store_fraction},
                            {"direct_store_fraction", p.direct_store_fraction},
                            {"variant", to_string(p.variant)},
                            {"model", to_string(p.model)},
                            {"idle_power_mw", p.table.idle_power_mw}}},
                          {"segment_energy_mj", life.segment_energy_mj},
                          {"busy_fraction", life.busy_fraction},
                          {"daily_energy_mj", life.daily_energy_mj},
                          {"storage_days", life.storage_days},
                          {"battery_days", life.battery_days},
                          {"lifetime_days", life.lifetime_days()},
                          {"limiting_factor", to_string(life.limiting_factor)}}
                         .dump(2)
                  << '\n';
        return kExitOk;
    }
    std::cout << std::fixed << std::setprecision(3);
    std::cout << "variant            " << to_string(p.variant) << " / " << to_string(p.model) << '\n'
              << "segment energy     " << life.segment_energy_mj << " mJ\n"
              << "busy fraction      " << life.busy_fraction << '\n'
              << "daily energy       " << life.daily_energy_mj / 1000.0 << " J\n"
              << "storage lifetime   " << life.storage_days << " days (" << life.storage_days / 7.0 << " weeks)\n"
              << "battery lifetime   " << life.battery_days << " days (" << life.battery_days / 7.0 << " weeks)\n"
              << "limiting factor    " << to_string(life.limiting_factor) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// init
// ---------------------------------------------------------------------------

struct InitOptions {
    std::string model = "transformer_time";
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_init(const InitOptions& o) {
    const auto graph = pipeline::graph_for(model_from(o.model));
    nn::save_weights(graph, nn::seeded_init(graph, o.seed), o.out);
    std::cout << json{{"model", graph.name()}, {"seed", o.seed}, {"parameters", nn::param_count(graph)}, {"out", o.out}}
                     .dump(2)
              << '\n';
    return kExitOk;
}

bool is_usage_code(Errc c) {
    return c == Errc::InvalidConfig || c == Errc::UnknownLabel || c == Errc::UnknownSplit;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tinychirp: bird-song screening for low-power recorders"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a TOML or JSON file");
    app.config_formatter(std::make_shared<cli::JsonOrTomlConfig>());
    app.set_version_flag("--version", "tinychirp 1.0.0");
    const auto env = [](const std::string& name) { return "TINYCHIRP_" + name; };

    PreprocessOptions pre;
    auto* c_pre = app.add_subcommand("preprocess", "Cut recordings into 16 kHz, 3 s segments");
    c_pre->add_option("in_dir", pre.in_dir, "Directory of .wav recordings")->required();
    c_pre->add_option("out_dir", pre.out_dir, "Output directory")->required();
    c_pre->add_flag("--mel", pre.mel, "Also write 184x80 log-Mel matrices");
    c_pre->add_option("--mel-format", pre.mel_format, "Matrix format")
        ->check(CLI::IsMember({"csv", "tcsp"}))
        ->capture_default_str();
    c_pre->add_option("--jobs,-j", pre.jobs, "Parallel workers")->envname(env("JOBS"))->capture_default_str();

    ScreenOptions scr;
    auto* c_scr = app.add_subcommand("screen", "Run the screening pipeline over recordings");
    c_scr->add_option("input", scr.input, "Manifest CSV, directory or .wav file")->required();
    c_scr->add_option("--variant", scr.variant, "Decision strategy")
        ->check(CLI::IsMember(kVariantNames))
        ->envname(env("VARIANT"))
        ->capture_default_str();
    c_scr->add_option("--model", scr.model, "Classifier")
        ->check(CLI::IsMember(kModelNames))
        ->envname(env("MODEL"))
        ->capture_default_str();
    c_scr->add_option("--weights", scr.weights, "TCHW weight file (f32 or i8)")->envname(env("WEIGHTS"));
    c_scr->add_option("--seed", scr.seed, "Seed for generated weights when --weights is absent")
        ->envname(env("SEED"))
        ->capture_default_str();
    c_scr->add_option("--t-low", scr.t_low, "Idle power threshold")->envname(env("T_LOW"))->capture_default_str();
    c_scr->add_option("--t-high", scr.t_high, "Direct-store power threshold")
        ->envname(env("T_HIGH"))
        ->capture_default_str();
    c_scr->add_option("--t-model", scr.t_model, "Model score threshold (default: tuned per model)")
        ->envname(env("T_MODEL"));
    c_scr->add_option("--out", scr.out, "Directory for stored segments (omit for a dry run)");
    c_scr->add_option("--report", scr.report, "Report JSON path (default: stdout)");
    c_scr->add_option("--jobs,-j", scr.jobs, "Parallel workers")->envname(env("JOBS"))->capture_default_str();
    c_scr->add_flag("--no-streaming", scr.no_streaming, "Run time-series models without the streaming prefix");

    EvalOptions ev;
    auto* c_ev = app.add_subcommand("eval", "Threshold sweep, ROC and AUC");
    c_ev->add_option("--scores", ev.scores, "CSV with header score,label");
    c_ev->add_option("--model", ev.model, "Score a labelled manifest with this model")
        ->check(CLI::IsMember(kModelNames));
    c_ev->add_option("--weights", ev.weights, "TCHW weight file");
    c_ev->add_option("--manifest", ev.manifest, "Labelled manifest CSV");
    c_ev->add_option("--seed", ev.seed, "Seed for generated weights")->capture_default_str();
    c_ev->add_option("--beta", ev.beta, "F-beta weight")->capture_default_str();
    c_ev->add_option("--roc-csv", ev.roc_csv, "Also write ROC points as CSV");
    c_ev->add_option("--out", ev.out, "JSON output path (default: stdout)");

    VerifyOptions ver;
    auto* c_ver = app.add_subcommand("verify", "Check streaming against the materialised reference");
    c_ver->add_option("--trials", ver.trials, "Random configurations")->capture_default_str();
    c_ver->add_option("--seed", ver.seed, "Seed")->envname(env("SEED"))->capture_default_str();

    QuantizeOptions qz;
    auto* c_qz = app.add_subcommand("quantize", "Calibrate and write int8 weights");
    c_qz->add_option("--model", qz.model, "Classifier")->check(CLI::IsMember(kModelNames))->capture_default_str();
    c_qz->add_option("--weights", qz.weights, "Float TCHW weight file");
    c_qz->add_option("--seed", qz.seed, "Seed for generated weights")->capture_default_str();
    c_qz->add_option("--calib", qz.calib, "Calibration manifest, directory or .wav file")->required();
    c_qz->add_option("--out", qz.out, "Output TCHW file")->required();
    c_qz->add_option("--max-inputs", qz.max_inputs, "Calibration segments used")->capture_default_str();

    BudgetOptions bud;
    auto* c_bud = app.add_subcommand("budget", "Estimate storage and battery lifetime");
    c_bud->add_option("--battery-mwh", bud.profile.battery_mwh, "Battery capacity")->capture_default_str();
    c_bud->add_option("--sd-bytes", bud.profile.sd_bytes, "Storage capacity")->capture_default_str();
    c_bud->add_option("--record-rate", bud.profile.record_rate_bytes_per_s, "Stored bytes per second of audio")
        ->capture_default_str();
    c_bud->add_option("--segment-s", bud.profile.segment_s, "Segment length")->capture_default_str();
    c_bud->add_option("--active-fraction", bud.profile.active_fraction, "Segments passing the power gate")
        ->capture_default_str();
    c_bud->add_option("--store-fraction", bud.profile.store_fraction, "Segments stored")->capture_default_str();
    c_bud->add_option("--direct-store-fraction", bud.profile.direct_store_fraction,
                      "Segments stored without inference (power-saving)")
        ->capture_default_str();
    c_bud->add_option("--variant", bud.variant, "Decision strategy")
        ->check(CLI::IsMember(kVariantNames))
        ->capture_default_str();
    c_bud->add_option("--model", bud.model, "Classifier")->check(CLI::IsMember(kModelNames))->capture_default_str();
    c_bud->add_option("--idle-power", bud.idle_power_mw, "Idle power in mW (default 6.27)");
    c_bud->add_flag("--json", bud.json_output, "JSON output");

    InitOptions ini;
    auto* c_ini = app.add_subcommand("init", "Write seeded float weights");
    c_ini->add_option("--model", ini.model, "Classifier")->check(CLI::IsMember(kModelNames))->capture_default_str();
    c_ini->add_option("--seed", ini.seed, "Seed")->capture_default_str();
    c_ini->add_option("--out", ini.out, "Output TCHW file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (c_pre->parsed()) return cmd_preprocess(pre);
        if (c_scr->parsed()) return cmd_screen(scr);
        if (c_ev->parsed()) return cmd_eval(ev);
        if (c_ver->parsed()) return cmd_verify(ver);
        if (c_qz->parsed()) return cmd_quantize(qz);
        if (c_bud->parsed()) return cmd_budget(bud);
        if (c_ini->parsed()) return cmd_init(ini);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_usage_code(e.code()) ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
