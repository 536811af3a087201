#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsrm/audio.hpp"
#include "gsrm/calibration.hpp"
#include "gsrm/cot_pipeline.hpp"
#include "gsrm/error.hpp"
#include "gsrm/feature_log.hpp"
#include "gsrm/judge.hpp"
#include "gsrm/prosody.hpp"
#include "gsrm/rlhf.hpp"

namespace gsrm {

struct RunPaths {
    std::string audio_dir;
    std::string alignment_dir;
    std::string annotations_csv;
    std::string calibration_file;
    std::string templates_dir;
    std::string output_dir;
    std::string vowel_inventory;  // empty => built-in inventory
    std::string predictions_file; // empty => <output_dir>/predictions.jsonl
};

struct SimulateOptions {
    int steps = 200;
    std::string reward = "l2"; // "l2" | "rbf"
    double sigma = 1.0;
    std::map<std::string, double> target = {{"overall_score", 4.5}};
    MockGenerator generator = {
        {{"overall_score", 2.5}}, {{"overall_score", 0.5}}, 0.05, 0};

    void validate() const {
        if (steps < 1) fail("simulate: steps must be >= 1");
        if (reward != "l2" && reward != "rbf") fail("simulate: reward must be 'l2' or 'rbf'");
        if (!(sigma > 0.0)) fail("simulate: sigma must be positive");
        if (target.empty()) fail("simulate: empty target profile");
        for (const auto& [metric, value] : target) {
            if (!generator.quality_mean.count(metric))
                fail("simulate: target metric '" + metric + "' missing from generator");
            const auto [lo, hi] = rating_range(metric);
            if (!(value >= lo && value <= hi))
                fail("simulate: target " + metric + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
        }
    }
};

struct RunConfig {
    RunPaths paths;
    PitchConfig pitch;
    VadConfig vad;
    BinningConfig binning;
    TtcConfig ttc;
    RewardConfig reward;
    GrpoConfig grpo;
    AblationSpec ablation;
    SynthesisConfig synthesis;
    SimulateOptions simulate;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool keep_going = false;
    bool fit_calibration = false;
    bool mock = false;
    double mock_mismatch = 0.0; // offset forced onto the mock's echoed overall
    bool inter_rater = false;
    int inter_rater_trials = 100;
    std::string model = "default";
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) fail("config: unknown key '" + key + "' in " + where);
}

inline std::set<std::string> string_set(const nlohmann::json& j, const std::string& where) {
    std::set<std::string> out;
    if (!j.is_array()) fail("config: " + where + " must be an array of strings");
    for (const auto& v : j) out.insert(v.get<std::string>());
    return out;
}

inline std::map<std::string, double> double_map(const nlohmann::json& j,
                                                const std::string& where) {
    std::map<std::string, double> out;
    if (!j.is_object()) fail("config: " + where + " must be an object of numbers");
    for (const auto& [key, v] : j.items()) out[key] = v.get<double>();
    return out;
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        detail::check_keys(j,
                           {"paths", "pitch", "vad", "binning", "ttc", "reward", "grpo",
                            "ablation", "synthesis", "simulate", "seed", "jobs", "keep_going",
                            "fit_calibration", "mock", "mock_mismatch", "inter_rater",
                            "inter_rater_trials", "model"},
                           "top level");
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            detail::check_keys(p,
                               {"audio_dir", "alignment_dir", "annotations_csv",
                                "calibration_file", "templates_dir", "output_dir",
                                "vowel_inventory", "predictions_file"},
                               "paths");
            cfg.paths.audio_dir = p.value("audio_dir", cfg.paths.audio_dir);
            cfg.paths.alignment_dir = p.value("alignment_dir", cfg.paths.alignment_dir);
            cfg.paths.annotations_csv = p.value("annotations_csv", cfg.paths.annotations_csv);
            cfg.paths.calibration_file = p.value("calibration_file", cfg.paths.calibration_file);
            cfg.paths.templates_dir = p.value("templates_dir", cfg.paths.templates_dir);
            cfg.paths.output_dir = p.value("output_dir", cfg.paths.output_dir);
            cfg.paths.vowel_inventory = p.value("vowel_inventory", cfg.paths.vowel_inventory);
            cfg.paths.predictions_file = p.value("predictions_file", cfg.paths.predictions_file);
        }
        if (j.contains("pitch")) {
            const auto& p = j.at("pitch");
            detail::check_keys(
                p, {"floor_hz", "ceiling_hz", "voicing_threshold", "hop_s", "window_periods"},
                "pitch");
            cfg.pitch.floor_hz = p.value("floor_hz", cfg.pitch.floor_hz);
            cfg.pitch.ceiling_hz = p.value("ceiling_hz", cfg.pitch.ceiling_hz);
            cfg.pitch.voicing_threshold = p.value("voicing_threshold", cfg.pitch.voicing_threshold);
            cfg.pitch.hop_s = p.value("hop_s", cfg.pitch.hop_s);
            cfg.pitch.window_periods = p.value("window_periods", cfg.pitch.window_periods);
        }
        if (j.contains("vad")) {
            const auto& p = j.at("vad");
            detail::check_keys(p,
                               {"frame_s", "hop_s", "silence_floor_db", "merge_threshold_s",
                                "long_silence_cap_s", "absolute_floor_db"},
                               "vad");
            cfg.vad.frame_s = p.value("frame_s", cfg.vad.frame_s);
            cfg.vad.hop_s = p.value("hop_s", cfg.vad.hop_s);
            cfg.vad.silence_floor_db = p.value("silence_floor_db", cfg.vad.silence_floor_db);
            cfg.vad.merge_threshold_s = p.value("merge_threshold_s", cfg.vad.merge_threshold_s);
            cfg.vad.long_silence_cap_s =
                p.value("long_silence_cap_s", cfg.vad.long_silence_cap_s);
            cfg.vad.absolute_floor_db = p.value("absolute_floor_db", cfg.vad.absolute_floor_db);
        }
        if (j.contains("binning")) {
            const auto& p = j.at("binning");
            detail::check_keys(p, {"pitch_level_thresholds_hz", "min_cell_count"}, "binning");
            if (p.contains("pitch_level_thresholds_hz"))
                cfg.binning.pitch_level_thresholds_hz =
                    p.at("pitch_level_thresholds_hz").get<std::vector<double>>();
            cfg.binning.min_cell_count =
                p.value("min_cell_count", cfg.binning.min_cell_count);
        }
        if (j.contains("ttc")) {
            const auto& p = j.at("ttc");
            detail::check_keys(
                p, {"k_samples", "temperature", "top_p", "mispronunciation_majority_vote"},
                "ttc");
            cfg.ttc.k_samples = p.value("k_samples", cfg.ttc.k_samples);
            cfg.ttc.temperature = p.value("temperature", cfg.ttc.temperature);
            cfg.ttc.top_p = p.value("top_p", cfg.ttc.top_p);
            cfg.ttc.mispronunciation_majority_vote =
                p.value("mispronunciation_majority_vote", cfg.ttc.mispronunciation_majority_vote);
        }
        if (j.contains("reward")) {
            const auto& p = j.at("reward");
            detail::check_keys(p, {"included_metrics", "weights", "n_judge_runs"}, "reward");
            if (p.contains("included_metrics"))
                cfg.reward.included_metrics =
                    p.at("included_metrics").get<std::vector<std::string>>();
            if (p.contains("weights"))
                cfg.reward.weights = p.at("weights").get<std::vector<double>>();
            cfg.reward.n_judge_runs = p.value("n_judge_runs", cfg.reward.n_judge_runs);
        }
        if (j.contains("grpo")) {
            const auto& p = j.at("grpo");
            detail::check_keys(p, {"group_size", "normalize_by_std", "std_epsilon"}, "grpo");
            cfg.grpo.group_size = p.value("group_size", cfg.grpo.group_size);
            cfg.grpo.normalize_by_std = p.value("normalize_by_std", cfg.grpo.normalize_by_std);
            cfg.grpo.std_epsilon = p.value("std_epsilon", cfg.grpo.std_epsilon);
        }
        if (j.contains("ablation")) {
            const auto& p = j.at("ablation");
            detail::check_keys(p, {"dropped_feature_groups", "dropped_submetrics"}, "ablation");
            if (p.contains("dropped_feature_groups"))
                cfg.ablation.dropped_feature_groups =
                    detail::string_set(p.at("dropped_feature_groups"), "dropped_feature_groups");
            if (p.contains("dropped_submetrics"))
                cfg.ablation.dropped_submetrics =
                    detail::string_set(p.at("dropped_submetrics"), "dropped_submetrics");
        }
        if (j.contains("synthesis")) {
            const auto& p = j.at("synthesis");
            detail::check_keys(
                p, {"model", "temperature", "top_p", "max_tokens", "max_in_flight"}, "synthesis");
            cfg.synthesis.model = p.value("model", cfg.synthesis.model);
            cfg.synthesis.temperature = p.value("temperature", cfg.synthesis.temperature);
            cfg.synthesis.top_p = p.value("top_p", cfg.synthesis.top_p);
            cfg.synthesis.max_tokens = p.value("max_tokens", cfg.synthesis.max_tokens);
            cfg.synthesis.max_in_flight = p.value("max_in_flight", cfg.synthesis.max_in_flight);
        }
        if (j.contains("simulate")) {
            const auto& p = j.at("simulate");
            detail::check_keys(p, {"steps", "reward", "sigma", "target", "generator"},
                               "simulate");
            cfg.simulate.steps = p.value("steps", cfg.simulate.steps);
            cfg.simulate.reward = p.value("reward", cfg.simulate.reward);
            cfg.simulate.sigma = p.value("sigma", cfg.simulate.sigma);
            if (p.contains("target"))
                cfg.simulate.target = detail::double_map(p.at("target"), "simulate.target");
            if (p.contains("generator")) {
                const auto& g = p.at("generator");
                detail::check_keys(
                    g, {"quality_mean", "quality_noise_std", "drift_per_step", "seed"},
                    "simulate.generator");
                if (g.contains("quality_mean"))
                    cfg.simulate.generator.quality_mean =
                        detail::double_map(g.at("quality_mean"), "quality_mean");
                if (g.contains("quality_noise_std"))
                    cfg.simulate.generator.quality_noise_std =
                        detail::double_map(g.at("quality_noise_std"), "quality_noise_std");
                cfg.simulate.generator.drift_per_step =
                    g.value("drift_per_step", cfg.simulate.generator.drift_per_step);
                if (g.contains("seed"))
                    cfg.simulate.generator.seed = g.at("seed").get<std::uint64_t>();
            }
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.jobs = j.value("jobs", cfg.jobs);
        cfg.keep_going = j.value("keep_going", cfg.keep_going);
        cfg.fit_calibration = j.value("fit_calibration", cfg.fit_calibration);
        cfg.mock = j.value("mock", cfg.mock);
        cfg.mock_mismatch = j.value("mock_mismatch", cfg.mock_mismatch);
        cfg.inter_rater = j.value("inter_rater", cfg.inter_rater);
        cfg.inter_rater_trials = j.value("inter_rater_trials", cfg.inter_rater_trials);
        cfg.model = j.value("model", cfg.model);
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("config: malformed value: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("config: " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// Full resolved config, embedded in every output artifact as the audit trail.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["paths"] = {{"audio_dir", cfg.paths.audio_dir},
                  {"alignment_dir", cfg.paths.alignment_dir},
                  {"annotations_csv", cfg.paths.annotations_csv},
                  {"calibration_file", cfg.paths.calibration_file},
                  {"templates_dir", cfg.paths.templates_dir},
                  {"output_dir", cfg.paths.output_dir},
                  {"vowel_inventory", cfg.paths.vowel_inventory},
                  {"predictions_file", cfg.paths.predictions_file}};
    j["pitch"] = {{"floor_hz", cfg.pitch.floor_hz},
                  {"ceiling_hz", cfg.pitch.ceiling_hz},
                  {"voicing_threshold", cfg.pitch.voicing_threshold},
                  {"hop_s", cfg.pitch.hop_s},
                  {"window_periods", cfg.pitch.window_periods}};
    j["vad"] = {{"frame_s", cfg.vad.frame_s},
                {"hop_s", cfg.vad.hop_s},
                {"silence_floor_db", cfg.vad.silence_floor_db},
                {"merge_threshold_s", cfg.vad.merge_threshold_s},
                {"long_silence_cap_s", cfg.vad.long_silence_cap_s},
                {"absolute_floor_db", cfg.vad.absolute_floor_db}};
    j["binning"] = {{"pitch_level_thresholds_hz", cfg.binning.pitch_level_thresholds_hz},
                    {"min_cell_count", cfg.binning.min_cell_count}};
    j["ttc"] = {{"k_samples", cfg.ttc.k_samples},
                {"temperature", cfg.ttc.temperature},
                {"top_p", cfg.ttc.top_p},
                {"mispronunciation_majority_vote", cfg.ttc.mispronunciation_majority_vote}};
    j["reward"] = {{"included_metrics", cfg.reward.included_metrics},
                   {"weights", cfg.reward.weights},
                   {"n_judge_runs", cfg.reward.n_judge_runs}};
    j["grpo"] = {{"group_size", cfg.grpo.group_size},
                 {"normalize_by_std", cfg.grpo.normalize_by_std},
                 {"std_epsilon", cfg.grpo.std_epsilon}};
    j["ablation"] = {
        {"dropped_feature_groups",
         std::vector<std::string>(cfg.ablation.dropped_feature_groups.begin(),
                                  cfg.ablation.dropped_feature_groups.end())},
        {"dropped_submetrics",
         std::vector<std::string>(cfg.ablation.dropped_submetrics.begin(),
                                  cfg.ablation.dropped_submetrics.end())}};
    j["synthesis"] = {{"model", cfg.synthesis.model},
                      {"temperature", cfg.synthesis.temperature},
                      {"top_p", cfg.synthesis.top_p},
                      {"max_tokens", cfg.synthesis.max_tokens},
                      {"max_in_flight", cfg.synthesis.max_in_flight}};
    j["simulate"] = {{"steps", cfg.simulate.steps},
                     {"reward", cfg.simulate.reward},
                     {"sigma", cfg.simulate.sigma},
                     {"target", cfg.simulate.target},
                     {"generator",
                      {{"quality_mean", cfg.simulate.generator.quality_mean},
                       {"quality_noise_std", cfg.simulate.generator.quality_noise_std},
                       {"drift_per_step", cfg.simulate.generator.drift_per_step},
                       {"seed", cfg.simulate.generator.seed}}}};
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["keep_going"] = cfg.keep_going;
    j["fit_calibration"] = cfg.fit_calibration;
    j["mock"] = cfg.mock;
    j["mock_mismatch"] = cfg.mock_mismatch;
    j["inter_rater"] = cfg.inter_rater;
    j["inter_rater_trials"] = cfg.inter_rater_trials;
    j["model"] = cfg.model;
    return j;
}

} // namespace gsrm
