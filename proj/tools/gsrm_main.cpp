// gsrm: vowel-level prosody extraction, discretized feature logs, judge
// aggregation, and reward/advantage utilities for conversational speech.
//
// Exit codes: 0 success, 1 per-item failures, 2 configuration errors.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsrm/commands.hpp"

namespace {

struct CliOverrides {
    std::optional<std::string> audio_dir, alignment_dir, annotations, calibration, templates_dir,
        output_dir, inventory, predictions, model;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs, k_samples, trials, steps, group_size;
    std::optional<double> mock_mismatch, sigma, drift;
    std::optional<std::string> reward;
    bool keep_going = false;
    bool fit_calibration = false;
    bool mock = false;
    bool inter_rater = false;
    bool normalize_by_std = false;
    std::vector<std::string> ablate_features;
    std::vector<std::string> ablate_submetrics;
};

void add_common_flags(CLI::App* cmd, std::string& config_path, CliOverrides& ov) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its values");
    cmd->add_option("--seed", ov.seed, "base RNG seed");
    cmd->add_option("--jobs", ov.jobs, "worker threads for per-recording stages");
    cmd->add_flag("--keep-going", ov.keep_going,
                  "continue past per-item failures (default: fail fast)");
    cmd->add_option("--audio-dir", ov.audio_dir, "directory of .wav recordings");
    cmd->add_option("--alignment-dir", ov.alignment_dir, "directory of <id>.json alignments");
    cmd->add_option("--annotations", ov.annotations, "annotator ratings CSV");
    cmd->add_option("--calibration", ov.calibration, "calibration stats JSON");
    cmd->add_option("--templates-dir", ov.templates_dir, "prompt template directory");
    cmd->add_option("--inventory", ov.inventory, "vowel inventory file (default: built-in)");
    cmd->add_option("--output-dir", ov.output_dir, "output directory");
    cmd->add_option("--model", ov.model, "model name passed to the completion endpoint");
    cmd->add_flag("--mock", ov.mock, "use the deterministic offline completion client");
    cmd->add_option("--mock-mismatch", ov.mock_mismatch,
                    "offset forced onto the mock judge's echoed overall score")
        ->group(""); // test hook; hidden from --help
}

gsrm::RunConfig resolve_config(const std::string& config_path, const CliOverrides& ov,
                               const CLI::App* cmd) {
    gsrm::RunConfig cfg;
    if (!config_path.empty()) cfg = gsrm::load_config(config_path);
    const auto passed = [&](const std::string& name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (ov.audio_dir) cfg.paths.audio_dir = *ov.audio_dir;
    if (ov.alignment_dir) cfg.paths.alignment_dir = *ov.alignment_dir;
    if (ov.annotations) cfg.paths.annotations_csv = *ov.annotations;
    if (ov.calibration) cfg.paths.calibration_file = *ov.calibration;
    if (ov.templates_dir) cfg.paths.templates_dir = *ov.templates_dir;
    if (ov.output_dir) cfg.paths.output_dir = *ov.output_dir;
    if (ov.inventory) cfg.paths.vowel_inventory = *ov.inventory;
    if (ov.predictions) cfg.paths.predictions_file = *ov.predictions;
    if (ov.model) cfg.model = *ov.model;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.jobs) cfg.jobs = *ov.jobs;
    if (passed("--keep-going")) cfg.keep_going = true;
    if (passed("--fit-calibration")) cfg.fit_calibration = true;
    if (passed("--mock")) cfg.mock = true;
    if (ov.mock_mismatch) cfg.mock_mismatch = *ov.mock_mismatch;
    if (passed("--inter-rater")) cfg.inter_rater = true;
    if (ov.trials) cfg.inter_rater_trials = *ov.trials;
    if (ov.k_samples) cfg.ttc.k_samples = *ov.k_samples;
    if (ov.steps) cfg.simulate.steps = *ov.steps;
    if (ov.reward) cfg.simulate.reward = *ov.reward;
    if (ov.sigma) cfg.simulate.sigma = *ov.sigma;
    if (ov.drift) cfg.simulate.generator.drift_per_step = *ov.drift;
    if (ov.group_size) cfg.grpo.group_size = *ov.group_size;
    if (passed("--normalize-by-std")) cfg.grpo.normalize_by_std = true;
    for (const std::string& g : ov.ablate_features) cfg.ablation.dropped_feature_groups.insert(g);
    for (const std::string& m : ov.ablate_submetrics) cfg.ablation.dropped_submetrics.insert(m);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prosodic feature logs and generative judge tooling for conversational speech"};
    app.require_subcommand(1);

    struct SubState {
        std::string config_path;
        CliOverrides ov;
        CLI::App* cmd = nullptr;
    };
    std::map<std::string, SubState> subs;

    const auto make_sub = [&](const std::string& name, const std::string& desc) {
        SubState& st = subs[name];
        st.cmd = app.add_subcommand(name, desc);
        add_common_flags(st.cmd, st.config_path, st.ov);
        return st.cmd;
    };

    CLI::App* extract = make_sub("extract", "extract and discretize vowel prosody features");
    extract->add_flag("--fit-calibration", subs["extract"].ov.fit_calibration,
                      "fit normalization stats from this corpus instead of loading them");
    extract->add_option("--ablate-features", subs["extract"].ov.ablate_features,
                        "feature groups to null out (pitch, intensity, duration)");
    extract->add_option("--ablate-submetrics", subs["extract"].ov.ablate_submetrics,
                        "sub-metrics to drop from prompts");

    make_sub("fit-calibration", "fit two-stage normalization stats and save them");

    CLI::App* synth = make_sub("synthesize", "synthesize evidence/judgment training examples");
    synth->add_flag("--fit-calibration", subs["synthesize"].ov.fit_calibration,
                    "fit normalization stats from this corpus instead of loading them");
    synth->add_option("--ablate-features", subs["synthesize"].ov.ablate_features,
                      "feature groups to null out (pitch, intensity, duration)");
    synth->add_option("--ablate-submetrics", subs["synthesize"].ov.ablate_submetrics,
                      "sub-metrics to drop from prompts");

    CLI::App* judge = make_sub("judge", "score recordings with K sampled judgments");
    judge->add_option("--k", subs["judge"].ov.k_samples, "judgments sampled per recording");
    judge->add_option("--predictions", subs["judge"].ov.predictions, "output predictions path");

    CLI::App* eval = make_sub("evaluate", "compare predictions against human annotations");
    eval->add_option("--predictions", subs["evaluate"].ov.predictions,
                     "predictions JSONL produced by `judge`");
    eval->add_flag("--inter-rater", subs["evaluate"].ov.inter_rater,
                   "also estimate split-half inter-rater consistency");
    eval->add_option("--trials", subs["evaluate"].ov.trials, "split-half shuffle trials");

    CLI::App* sim = make_sub("simulate", "run the verifier-in-the-loop policy simulation");
    sim->add_option("--steps", subs["simulate"].ov.steps, "simulation steps");
    sim->add_option("--reward", subs["simulate"].ov.reward, "reward shaping: l2 or rbf");
    sim->add_option("--sigma", subs["simulate"].ov.sigma, "rbf bandwidth");
    sim->add_option("--drift", subs["simulate"].ov.drift, "generator drift per step");
    sim->add_option("--group-size", subs["simulate"].ov.group_size, "rollout group size");
    sim->add_flag("--normalize-by-std", subs["simulate"].ov.normalize_by_std,
                  "divide advantages by the group std");

    CLI11_PARSE(app, argc, argv);

    std::string name;
    for (const auto& [n, st] : subs)
        if (st.cmd->parsed()) name = n;
    const SubState& st = subs[name];

    gsrm::RunConfig cfg;
    try {
        cfg = resolve_config(st.config_path, st.ov, st.cmd);
    } catch (const gsrm::Error& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return gsrm::kExitConfigError;
    }

    if (name == "extract") return gsrm::cmd_extract(cfg);
    if (name == "fit-calibration") return gsrm::cmd_fit_calibration(cfg);
    if (name == "synthesize") return gsrm::cmd_synthesize(cfg);
    if (name == "judge") return gsrm::cmd_judge(cfg);
    if (name == "evaluate") return gsrm::cmd_evaluate(cfg);
    if (name == "simulate") return gsrm::cmd_simulate(cfg);
    std::cerr << "unknown command\n";
    return gsrm::kExitConfigError;
}
