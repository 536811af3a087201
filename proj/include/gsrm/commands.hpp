#pragma once

#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsrm/completion.hpp"
#include "gsrm/config.hpp"
#include "gsrm/cot_pipeline.hpp"
#include "gsrm/http_client.hpp"
#include "gsrm/pipeline.hpp"
#include "gsrm/prompts.hpp"

namespace gsrm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitItemFailures = 1;
inline constexpr int kExitConfigError = 2;

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot open for writing: " + path.string());
    os << content;
    os.flush();
    if (!os) fail("write failed: " + path.string());
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json opt_json(const std::optional<std::string>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

struct ItemOutcome {
    bool ok = true;
    std::string error;
};

// Bounded-parallel map over items; every item runs even if others fail, and
// failures come back per item instead of aborting the batch.
template <typename Fn>
inline std::vector<ItemOutcome> run_items(std::size_t n, int jobs, const Fn& fn) {
    std::vector<ItemOutcome> outcomes(n);
    if (jobs < 1) jobs = 1;
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (const std::exception& e) {
                outcomes[i] = {false, e.what()};
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < jobs && t < int(n); ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return outcomes;
}

inline void print_error_table(std::ostream& os, const std::string& what,
                              const std::vector<RecordingInputs>& recs,
                              const std::vector<ItemOutcome>& outcomes) {
    os << what << " failures:\n";
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (!outcomes[i].ok)
            os << "  " << recs[i].recording_id << ": " << outcomes[i].error << "\n";
}

inline std::unique_ptr<CompletionClient> make_client(const RunConfig& cfg) {
    if (cfg.mock) {
        MockOptions opts;
        opts.seed = cfg.seed;
        opts.oracle_overall_offset = cfg.mock_mismatch;
        return std::make_unique<MockCompletionClient>(opts);
    }
    return std::make_unique<HttpCompletionClient>(endpoint_from_env());
}

inline std::set<std::string> resolve_inventory(const RunConfig& cfg) {
    if (cfg.paths.vowel_inventory.empty()) return default_vowel_inventory();
    return load_vowel_inventory(cfg.paths.vowel_inventory);
}

inline nlohmann::json span_json(const Span& s) {
    return nlohmann::json::array({s.start_s, s.end_s});
}

inline nlohmann::json sidecar_json(const RunConfig& cfg, const RecordingFeatures& rec,
                                   const BinnedRecording& binned) {
    nlohmann::json j;
    j["recording_id"] = rec.recording_id;
    j["speaker_id"] = rec.speaker_id;
    j["seed"] = cfg.seed;
    j["config"] = config_to_json(cfg);
    j["pitch_bounds"] = {{"floor_hz", rec.adapted_pitch.floor_hz},
                         {"ceiling_hz", rec.adapted_pitch.ceiling_hz},
                         {"adapted", rec.pitch_adapted}};
    j["processed_duration_s"] = rec.processed_duration_s;

    std::map<std::pair<std::size_t, std::string>, const VowelFeaturesBinned*> bin_of;
    for (const LogUtterance& u : binned.log.utterances)
        for (const auto& [seg, bins] : u.vowels)
            bin_of[{seg.utterance_index, seg.word + "/" + seg.vowel + "@" +
                                             format_double(seg.full_span.start_s)}] = &bins;

    j["vowels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.segments.size(); ++i) {
        const VowelSegment& seg = rec.segments[i];
        nlohmann::json v;
        v["utterance_index"] = seg.utterance_index;
        v["vowel"] = seg.vowel;
        v["word"] = seg.word;
        v["n_states"] = seg.n_states;
        v["full_span"] = span_json(seg.full_span);
        v["core_span"] = span_json(seg.core_span);
        if (rec.raw[i]) {
            const VowelRawFeatures& raw = *rec.raw[i];
            v["raw"] = {{"pitch_level_hz", opt_json(raw.pitch_level_hz)},
                        {"pitch_var_hz", opt_json(raw.pitch_var_hz)},
                        {"pitch_slope_hz_per_s", opt_json(raw.pitch_slope_hz_per_s)},
                        {"intensity_db", opt_json(raw.intensity_db)},
                        {"intensity_var_db", opt_json(raw.intensity_var_db)},
                        {"duration_s", raw.duration_s},
                        {"core_fully_voiced", raw.core_fully_voiced}};
        } else {
            v["raw"] = nullptr;
        }
        const auto it = bin_of.find({seg.utterance_index, seg.word + "/" + seg.vowel + "@" +
                                                              format_double(seg.full_span.start_s)});
        if (it != bin_of.end()) {
            const VowelFeaturesBinned& b = *it->second;
            v["binned"] = {{"pitch", opt_json(b.pitch)},
                           {"pitch_variation", opt_json(b.pitch_variation)},
                           {"pitch_slope", opt_json(b.pitch_slope)},
                           {"intensity", opt_json(b.intensity)},
                           {"intensity_variation", opt_json(b.intensity_variation)},
                           {"duration", opt_json(b.duration)}};
        } else {
            v["binned"] = nullptr;
        }
        j["vowels"].push_back(std::move(v));
    }
    j["drops"] = nlohmann::json::array();
    for (const DroppedVowel& d : binned.drops)
        j["drops"].push_back({{"utterance_index", d.utterance_index},
                              {"vowel", d.vowel},
                              {"word", d.word},
                              {"start_s", d.start_s},
                              {"end_s", d.end_s},
                              {"reason", d.reason}});
    return j;
}

} // namespace detail

// Shared extraction front half: per-recording raw features, parallel over
// --jobs. Returns exit-relevant outcomes alongside the per-recording data.
struct ExtractionBatch {
    std::vector<RecordingInputs> recordings;
    std::vector<RecordingFeatures> features; // valid where outcome.ok
    std::vector<detail::ItemOutcome> outcomes;
    bool any_failed = false;
};

inline ExtractionBatch run_extraction(const RunConfig& cfg) {
    ExtractionBatch batch;
    batch.recordings = discover_recordings(cfg.paths.audio_dir, cfg.paths.alignment_dir);
    batch.features.resize(batch.recordings.size());
    const std::set<std::string> inventory = detail::resolve_inventory(cfg);
    batch.outcomes = detail::run_items(
        batch.recordings.size(), cfg.jobs, [&](std::size_t i) {
            batch.features[i] =
                extract_recording_features(batch.recordings[i].wav_path,
                                           batch.recordings[i].alignment_path, inventory,
                                           cfg.pitch, cfg.vad);
        });
    for (const auto& o : batch.outcomes) batch.any_failed = batch.any_failed || !o.ok;
    return batch;
}

inline CalibrationStats fit_calibration_from_batch(const ExtractionBatch& batch,
                                                   const BinningConfig& binning) {
    std::vector<CalObservation> observations;
    for (std::size_t i = 0; i < batch.features.size(); ++i) {
        if (!batch.outcomes[i].ok) continue;
        std::vector<CalObservation> obs = collect_observations(batch.features[i]);
        observations.insert(observations.end(), obs.begin(), obs.end());
    }
    return fit_calibration(observations, binning);
}

inline int cmd_fit_calibration(RunConfig cfg, std::ostream& out = std::cout,
                               std::ostream& err = std::cerr) {
    ExtractionBatch batch;
    try {
        batch = run_extraction(cfg);
    } catch (const Error& e) {
        err << "fit-calibration: " << e.what() << "\n";
        return kExitConfigError;
    }
    if (batch.any_failed && !cfg.keep_going) {
        detail::print_error_table(err, "fit-calibration", batch.recordings, batch.outcomes);
        return kExitItemFailures;
    }
    try {
        if (cfg.paths.calibration_file.empty())
            cfg.paths.calibration_file =
                (std::filesystem::path(cfg.paths.output_dir) / "calibration.json").string();
        std::filesystem::create_directories(
            std::filesystem::path(cfg.paths.calibration_file).parent_path());
        const CalibrationStats stats = fit_calibration_from_batch(batch, cfg.binning);
        save_calibration(stats, cfg.paths.calibration_file);
        out << "calibration written to " << cfg.paths.calibration_file << "\n";
    } catch (const Error& e) {
        err << "fit-calibration: " << e.what() << "\n";
        return kExitConfigError;
    }
    if (batch.any_failed) {
        detail::print_error_table(err, "fit-calibration", batch.recordings, batch.outcomes);
        return kExitItemFailures;
    }
    return kExitOk;
}

inline int cmd_extract(RunConfig cfg, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    ExtractionBatch batch;
    CalibrationStats stats;
    std::filesystem::path out_dir;
    try {
        cfg.ablation.validate();
        out_dir = cfg.paths.output_dir.empty() ? std::filesystem::path(".")
                                               : std::filesystem::path(cfg.paths.output_dir);
        if (!cfg.fit_calibration && cfg.paths.calibration_file.empty())
            fail("extract: no calibration file configured (or pass --fit-calibration)");
        if (!cfg.fit_calibration && !std::filesystem::exists(cfg.paths.calibration_file))
            fail("extract: calibration file not found: " + cfg.paths.calibration_file +
                 " (or pass --fit-calibration)");
        batch = run_extraction(cfg);
    } catch (const Error& e) {
        err << "extract: " << e.what() << "\n";
        return kExitConfigError;
    }

    if (batch.any_failed && !cfg.keep_going) {
        detail::print_error_table(err, "extract", batch.recordings, batch.outcomes);
        return kExitItemFailures;
    }

    try {
        if (cfg.fit_calibration) {
            if (cfg.paths.calibration_file.empty())
                cfg.paths.calibration_file = (out_dir / "calibration.json").string();
            stats = fit_calibration_from_batch(batch, cfg.binning);
            std::filesystem::create_directories(
                std::filesystem::path(cfg.paths.calibration_file).parent_path());
            save_calibration(stats, cfg.paths.calibration_file);
        } else {
            stats = load_calibration(cfg.paths.calibration_file);
        }

        std::filesystem::create_directories(out_dir / "logs");
        std::filesystem::create_directories(out_dir / "features");
        nlohmann::json drop_report;
        drop_report["seed"] = cfg.seed;
        drop_report["config"] = config_to_json(cfg);
        drop_report["recordings"] = nlohmann::json::object();

        std::size_t written = 0;
        for (std::size_t i = 0; i < batch.recordings.size(); ++i) {
            if (!batch.outcomes[i].ok) continue;
            const RecordingFeatures& rec = batch.features[i];
            const BinnedRecording binned = bin_recording(rec, stats, cfg.binning);
            const std::string text = render_feature_log(binned.log, cfg.ablation);
            detail::write_text_file(out_dir / "logs" / (rec.recording_id + ".log.txt"), text);
            detail::write_text_file(
                out_dir / "features" / (rec.recording_id + ".features.json"),
                detail::sidecar_json(cfg, rec, binned).dump(2) + "\n");
            nlohmann::json drops = nlohmann::json::array();
            for (const DroppedVowel& d : binned.drops)
                drops.push_back({{"utterance_index", d.utterance_index},
                                 {"vowel", d.vowel},
                                 {"word", d.word},
                                 {"start_s", d.start_s},
                                 {"end_s", d.end_s},
                                 {"reason", d.reason}});
            drop_report["recordings"][rec.recording_id] = std::move(drops);
            ++written;
        }
        detail::write_text_file(out_dir / "dropped_segments.json", drop_report.dump(2) + "\n");
        detail::write_text_file(out_dir / "extract.config.json",
                                config_to_json(cfg).dump(2) + "\n");
        out << "extract: wrote " << written << " feature logs to " << (out_dir / "logs").string()
            << "\n";
    } catch (const Error& e) {
        err << "extract: " << e.what() << "\n";
        return kExitConfigError;
    }

    if (batch.any_failed) {
        detail::print_error_table(err, "extract", batch.recordings, batch.outcomes);
        return kExitItemFailures;
    }
    return kExitOk;
}

namespace detail {

// Oracle ratings for a recording: rounded mean over annotators, so the values
// render as the clean one-decimal style the judgment prompt expects.
inline RatingSet oracle_for(const std::vector<AnnotatedSample>& samples, const std::string& id) {
    for (const AnnotatedSample& s : samples)
        if (s.sample_id == id) return aggregate_annotators(s, AggregateMode::RoundedMean);
    fail("no annotations for recording '" + id + "'");
}

} // namespace detail

inline int cmd_synthesize(RunConfig cfg, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
    ExtractionBatch batch;
    CalibrationStats stats;
    std::vector<AnnotatedSample> annotations;
    std::unique_ptr<CompletionClient> client;
    PromptLibrary lib;
    std::filesystem::path out_dir;
    try {
        cfg.ablation.validate();
        cfg.synthesis.validate();
        out_dir = std::filesystem::path(cfg.paths.output_dir);
        lib = PromptLibrary::load(cfg.paths.templates_dir);
        annotations = load_annotations_csv(cfg.paths.annotations_csv);
        client = detail::make_client(cfg);
        batch = run_extraction(cfg);
        if (cfg.fit_calibration || cfg.paths.calibration_file.empty())
            stats = fit_calibration_from_batch(batch, cfg.binning);
        else
            stats = load_calibration(cfg.paths.calibration_file);
    } catch (const Error& e) {
        err << "synthesize: " << e.what() << "\n";
        return kExitConfigError;
    }

    if (batch.any_failed && !cfg.keep_going) {
        detail::print_error_table(err, "synthesize", batch.recordings, batch.outcomes);
        return kExitItemFailures;
    }

    try {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path sft_path = out_dir / "sft.jsonl";

        // Resume support: keep lines already present, skip their recordings.
        std::vector<std::string> existing_lines;
        std::set<std::string> existing_ids;
        if (std::filesystem::exists(sft_path)) {
            std::ifstream in(sft_path, std::ios::binary);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                existing_lines.push_back(line);
                try {
                    existing_ids.insert(
                        nlohmann::json::parse(line).at("audio").get<std::string>());
                } catch (const nlohmann::json::exception& e) {
                    fail("existing " + sft_path.string() + " is malformed: " + e.what());
                }
            }
        }

        std::vector<Trajectory> fresh;
        nlohmann::json rejections = nlohmann::json::array();
        bool any_infra_failure = false;
        for (std::size_t i = 0; i < batch.recordings.size(); ++i) {
            if (!batch.outcomes[i].ok) continue;
            const RecordingFeatures& rec = batch.features[i];
            const std::string audio_ref = batch.recordings[i].wav_path.string();
            if (existing_ids.count(audio_ref)) continue;
            const BinnedRecording binned = bin_recording(rec, stats, cfg.binning);
            try {
                const RatingSet oracle = detail::oracle_for(annotations, rec.recording_id);
                fresh.push_back(synthesize_trajectory(binned.log, oracle, audio_ref, lib,
                                                      *client, cfg.synthesis, cfg.ablation));
            } catch (const RejectionError& e) {
                rejections.push_back(
                    {{"recording_id", rec.recording_id}, {"reason", e.what()}});
            } catch (const Error& e) {
                any_infra_failure = true;
                err << "synthesize: " << rec.recording_id << ": " << e.what() << "\n";
                if (!cfg.keep_going) break;
            }
        }

        // Rewrite: existing lines verbatim, then the fresh trajectories.
        std::string content;
        for (const std::string& line : existing_lines) content += line + "\n";
        {
            const std::filesystem::path tmp = out_dir / "sft.jsonl.tmp";
            emit_sft_examples(fresh, tmp, lib);
            std::ifstream in(tmp, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            content += buf.str();
            std::filesystem::remove(tmp);
        }
        detail::write_text_file(sft_path, content);

        nlohmann::json rejection_report;
        rejection_report["seed"] = cfg.seed;
        rejection_report["config"] = config_to_json(cfg);
        rejection_report["rejections"] = rejections;
        detail::write_text_file(out_dir / "rejections.json", rejection_report.dump(2) + "\n");
        detail::write_text_file(out_dir / "sft.config.json",
                                config_to_json(cfg).dump(2) + "\n");
        out << "synthesize: " << fresh.size() << " new trajectories, " << rejections.size()
            << " rejected, " << existing_ids.size() << " already present\n";
        if (any_infra_failure) return kExitItemFailures;
    } catch (const Error& e) {
        err << "synthesize: " << e.what() << "\n";
        return kExitConfigError;
    }

    if (batch.any_failed) {
        detail::print_error_table(err, "synthesize", batch.recordings, batch.outcomes);
        return kExitItemFailures;
    }
    return kExitOk;
}

inline int cmd_judge(RunConfig cfg, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    std::vector<RecordingInputs> recordings;
    std::unique_ptr<CompletionClient> client;
    PromptLibrary lib;
    std::filesystem::path out_dir;
    try {
        cfg.ttc.validate();
        out_dir = std::filesystem::path(cfg.paths.output_dir);
        lib = PromptLibrary::load(cfg.paths.templates_dir);
        client = detail::make_client(cfg);
        recordings = discover_recordings(cfg.paths.audio_dir,
                                         cfg.paths.alignment_dir.empty()
                                             ? cfg.paths.audio_dir
                                             : cfg.paths.alignment_dir);
    } catch (const Error& e) {
        err << "judge: " << e.what() << "\n";
        return kExitConfigError;
    }

    const int kMaxParseFailures = 3;
    std::vector<PredictionRecord> records;
    std::vector<std::string> skipped;
    for (const RecordingInputs& rec : recordings) {
        PredictionRecord record;
        record.recording_id = rec.recording_id;
        CompletionRequest req;
        req.model = cfg.model;
        req.prompt = build_sft_prompt(lib);
        req.temperature = cfg.ttc.temperature;
        req.top_p = cfg.ttc.top_p;
        req.audio_path = rec.wav_path.string();

        bool skip = false;
        try {
            for (int k = 0; k < cfg.ttc.k_samples; ++k) {
                const CompletionResult res = complete(req, *client);
                try {
                    record.samples.push_back(parse_ratings_block(res.text));
                } catch (const Error& e) {
                    ++record.parse_failures;
                    record.warnings.push_back("sample " + std::to_string(k) +
                                              " unparseable: " + e.what());
                    if (record.parse_failures > kMaxParseFailures) {
                        skip = true;
                        break;
                    }
                }
            }
        } catch (const Error& e) {
            err << "judge: " << rec.recording_id << ": " << e.what() << "\n";
            skipped.push_back(rec.recording_id);
            if (!cfg.keep_going) return kExitItemFailures;
            continue;
        }
        if (skip || record.samples.empty()) {
            skipped.push_back(rec.recording_id);
            err << "judge: skipping " << rec.recording_id << " after "
                << record.parse_failures << " unparseable samples\n";
            if (!cfg.keep_going) return kExitItemFailures;
            continue;
        }
        record.aggregate = aggregate_ttc(record.samples, cfg.ttc);
        try {
            RewardResult reward = aggregate_reward(record.samples, cfg.reward);
            record.warnings.insert(record.warnings.end(), reward.warnings.begin(),
                                   reward.warnings.end());
            record.aggregate.set("reward", reward.reward);
        } catch (const Error&) {
            // Reward is a convenience column; judges that omit a configured
            // metric simply don't get one.
        }
        records.push_back(std::move(record));
    }

    try {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path pred_path =
            cfg.paths.predictions_file.empty() ? out_dir / "predictions.jsonl"
                                               : std::filesystem::path(cfg.paths.predictions_file);
        write_predictions_jsonl(pred_path, records);
        detail::write_text_file(out_dir / "predictions.config.json",
                                config_to_json(cfg).dump(2) + "\n");
        out << "judge: wrote " << records.size() << " prediction records to "
            << pred_path.string() << "\n";
    } catch (const Error& e) {
        err << "judge: " << e.what() << "\n";
        return kExitConfigError;
    }
    return skipped.empty() ? kExitOk : kExitItemFailures;
}

inline int cmd_evaluate(RunConfig cfg, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    try {
        const std::filesystem::path out_dir(cfg.paths.output_dir);
        const std::filesystem::path pred_path =
            cfg.paths.predictions_file.empty() ? out_dir / "predictions.jsonl"
                                               : std::filesystem::path(cfg.paths.predictions_file);
        const std::vector<AnnotatedSample> samples =
            load_annotations_csv(cfg.paths.annotations_csv);
        const auto predictions = load_predictions_jsonl(pred_path);
        const EvalReport report = model_human_report(samples, predictions, cfg.ttc);

        nlohmann::json j;
        j["seed"] = cfg.seed;
        j["config"] = config_to_json(cfg);
        j["n_samples"] = report.n_samples;
        j["pearson"] = report.pearson;
        j["spearman"] = report.spearman;
        j["mse"] = report.mse;

        std::ostringstream table;
        table << "metric      value\n";
        table << "pearson     " << detail::format_double(report.pearson) << "\n";
        table << "spearman    " << detail::format_double(report.spearman) << "\n";
        table << "mse         " << detail::format_double(report.mse) << "\n";
        table << "n_samples   " << report.n_samples << "\n";

        if (cfg.inter_rater) {
            const InterRaterResult ir =
                inter_rater_consistency(samples, cfg.seed, cfg.inter_rater_trials);
            j["inter_rater"] = {{"pearson_mean", ir.pearson_mean},
                                {"n_used", ir.n_used},
                                {"n_excluded", ir.n_excluded},
                                {"low_n", ir.low_n},
                                {"trials", cfg.inter_rater_trials}};
            table << "inter_rater " << detail::format_double(ir.pearson_mean) << "\n";
            if (ir.low_n) table << "  (low-n: fewer than 10 usable samples)\n";
        }

        std::filesystem::create_directories(out_dir);
        detail::write_text_file(out_dir / "report.json", j.dump(2) + "\n");
        detail::write_text_file(out_dir / "report.txt", table.str());
        out << table.str();
        return kExitOk;
    } catch (const Error& e) {
        err << "evaluate: " << e.what() << "\n";
        return kExitConfigError;
    }
}

inline int cmd_simulate(RunConfig cfg, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    try {
        cfg.simulate.validate();
        cfg.grpo.validate();
        MockGenerator gen = cfg.simulate.generator;
        if (gen.seed == 0) gen.seed = cfg.seed;

        RewardShapingConfig shaping;
        shaping.mode = cfg.simulate.reward == "rbf" ? RewardShapingConfig::Mode::Rbf
                                                    : RewardShapingConfig::Mode::L2;
        shaping.sigma = cfg.simulate.sigma;
        const std::map<std::string, double> target = cfg.simulate.target;
        const auto judge = [&shaping, target](const RatingSet& r) {
            double acc = 0.0;
            for (const auto& [metric, goal] : target) {
                if (!r.has(metric)) fail("simulate: response missing metric '" + metric + "'");
                acc += shaping.mode == RewardShapingConfig::Mode::Rbf
                           ? shaped_reward_rbf(r.at(metric), goal, shaping)
                           : shaped_reward_l2(r.at(metric), goal);
            }
            return acc / double(target.size());
        };

        const SimTrajectory traj = run_sim_loop(gen, judge, cfg.grpo, cfg.simulate.steps);

        std::ostringstream csv;
        const std::string config_echo = config_to_json(cfg).dump();
        csv << "# config: " << config_echo << "\n";
        csv << "# seed: " << gen.seed << "\n";
        csv << "step,mean_reward,max_advantage,min_advantage\n";
        for (const SimStep& s : traj.steps)
            csv << s.step << ',' << detail::format_double(s.mean_reward) << ','
                << detail::format_double(s.max_advantage) << ','
                << detail::format_double(s.min_advantage) << "\n";

        const std::filesystem::path out_dir(cfg.paths.output_dir);
        std::filesystem::create_directories(out_dir);
        detail::write_text_file(out_dir / "sim.csv", csv.str());
        out << "simulate: " << traj.steps.size() << " steps -> "
            << (out_dir / "sim.csv").string() << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << "simulate: " << e.what() << "\n";
        return kExitConfigError;
    }
}

} // namespace gsrm
