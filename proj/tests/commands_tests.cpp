#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gsrm/commands.hpp"
#include "test_support.hpp"

namespace {

struct CmdRun {
    int exit_code = 0;
    std::string out;
    std::string err;
};

template <typename Fn>
CmdRun run(const Fn& fn, const gsrm::RunConfig& cfg) {
    std::ostringstream out, err;
    CmdRun r;
    r.exit_code = fn(cfg, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Fixture corpus + mock client, everything rooted in one temp dir.
gsrm::RunConfig fixture_config(const std::filesystem::path& root,
                               const testsup::FixturePaths& paths) {
    gsrm::RunConfig cfg;
    cfg.paths.audio_dir = paths.audio_dir.string();
    cfg.paths.alignment_dir = paths.alignment_dir.string();
    cfg.paths.annotations_csv = paths.annotations_csv.string();
    cfg.paths.templates_dir = (testsup::repo_root() / "data" / "templates").string();
    cfg.paths.output_dir = (root / "out").string();
    cfg.mock = true;
    cfg.seed = 42;
    cfg.synthesis.max_in_flight = 1;
    return cfg;
}

} // namespace

TEST_CASE("fit-calibration writes a loadable stats file", "[commands]") {
    testsup::TempDir tmp("cmd_fit");
    const auto paths = testsup::make_fixture_corpus(tmp.path);
    gsrm::RunConfig cfg = fixture_config(tmp.path, paths);

    const CmdRun r = run(gsrm::cmd_fit_calibration, cfg);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == gsrm::kExitOk);
    CHECK(r.out.find("calibration written to") != std::string::npos);
    const auto cal_path = tmp.path / "out" / "calibration.json";
    REQUIRE(std::filesystem::exists(cal_path));
    const gsrm::CalibrationStats stats = gsrm::load_calibration(cal_path.string());
    CHECK(stats.fitted());

    SECTION("missing audio dir is a config error") {
        cfg.paths.audio_dir = (tmp.path / "nope").string();
        const CmdRun bad = run(gsrm::cmd_fit_calibration, cfg);
        CHECK(bad.exit_code == gsrm::kExitConfigError);
        CHECK(bad.err.find("fit-calibration:") != std::string::npos);
    }
}

TEST_CASE("extract writes logs, sidecars, and the drop report", "[commands]") {
    testsup::TempDir tmp("cmd_extract");
    const auto paths = testsup::make_fixture_corpus(tmp.path);
    gsrm::RunConfig cfg = fixture_config(tmp.path, paths);
    cfg.fit_calibration = true;

    const CmdRun r = run(gsrm::cmd_extract, cfg);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == gsrm::kExitOk);
    CHECK(r.out.find("wrote 3 feature logs") != std::string::npos);

    const auto out_dir = tmp.path / "out";
    for (const char* id : {"rec_a", "rec_b", "rec_c"}) {
        REQUIRE(std::filesystem::exists(out_dir / "logs" / (std::string(id) + ".log.txt")));
        REQUIRE(std::filesystem::exists(out_dir / "features" /
                                        (std::string(id) + ".features.json")));
    }
    REQUIRE(std::filesystem::exists(out_dir / "calibration.json"));
    REQUIRE(std::filesystem::exists(out_dir / "dropped_segments.json"));
    REQUIRE(std::filesystem::exists(out_dir / "extract.config.json"));

    SECTION("the rendered log is parseable and structured") {
        const std::string text = testsup::read_file(out_dir / "logs" / "rec_a.log.txt");
        const gsrm::FeatureLog log = gsrm::parse_feature_log(text);
        REQUIRE(log.utterances.size() == 2);
        CHECK(log.utterances[0].transcript == "calm voices carry");
        CHECK(gsrm::render_feature_log(log) == text);
    }
    SECTION("the sidecar embeds config, seed, and per-vowel data") {
        const auto j = nlohmann::json::parse(
            testsup::read_file(out_dir / "features" / "rec_a.features.json"));
        CHECK(j.at("recording_id") == "rec_a");
        CHECK(j.at("speaker_id") == "spk1");
        CHECK(j.at("seed") == 42);
        CHECK(j.at("config").at("ttc").at("k_samples") == 16);
        REQUIRE(j.at("vowels").size() == 6);
        CHECK(j.at("vowels")[0].at("word") == "calm");
        CHECK(j.at("vowels")[0].at("binned").at("pitch") == "very low");
        CHECK(j.at("drops").is_array());
    }
    SECTION("the drop report echoes the resolved config") {
        const auto j =
            nlohmann::json::parse(testsup::read_file(out_dir / "dropped_segments.json"));
        CHECK(j.at("seed") == 42);
        REQUIRE(j.at("recordings").size() == 3);
    }
    SECTION("a missing calibration file is a config error") {
        gsrm::RunConfig bad = fixture_config(tmp.path, paths);
        const CmdRun none = run(gsrm::cmd_extract, bad);
        CHECK(none.exit_code == gsrm::kExitConfigError);
        CHECK(none.err.find("no calibration file configured") != std::string::npos);
        bad.paths.calibration_file = (tmp.path / "ghost.json").string();
        const CmdRun ghost = run(gsrm::cmd_extract, bad);
        CHECK(ghost.exit_code == gsrm::kExitConfigError);
        CHECK(ghost.err.find("calibration file not found") != std::string::npos);
    }
    SECTION("a saved calibration can be reused without refitting") {
        gsrm::RunConfig reuse = fixture_config(tmp.path, paths);
        reuse.paths.calibration_file = (out_dir / "calibration.json").string();
        reuse.paths.output_dir = (tmp.path / "out2").string();
        const CmdRun again = run(gsrm::cmd_extract, reuse);
        REQUIRE(again.exit_code == gsrm::kExitOk);
        CHECK(testsup::read_file(tmp.path / "out2" / "logs" / "rec_a.log.txt") ==
              testsup::read_file(out_dir / "logs" / "rec_a.log.txt"));
    }
}

TEST_CASE("synthesize produces sft data and resumes idempotently", "[commands]") {
    testsup::TempDir tmp("cmd_synth");
    const auto paths = testsup::make_fixture_corpus(tmp.path);
    gsrm::RunConfig cfg = fixture_config(tmp.path, paths);
    cfg.fit_calibration = true;

    const CmdRun first = run(gsrm::cmd_synthesize, cfg);
    CAPTURE(first.err);
    REQUIRE(first.exit_code == gsrm::kExitOk);
    CHECK(first.out.find("3 new trajectories, 0 rejected, 0 already present") !=
          std::string::npos);

    const auto sft_path = tmp.path / "out" / "sft.jsonl";
    REQUIRE(std::filesystem::exists(sft_path));
    const std::string sft = testsup::read_file(sft_path);
    std::size_t lines = 0;
    for (char c : sft) lines += c == '\n' ? 1 : 0;
    REQUIRE(lines == 3);
    const auto j = nlohmann::json::parse(sft.substr(0, sft.find('\n')));
    CHECK(j.at("audio").get<std::string>().find("rec_a.wav") != std::string::npos);
    CHECK(j.at("response").get<std::string>().rfind("[Evidence log]", 0) == 0);
    REQUIRE(std::filesystem::exists(tmp.path / "out" / "rejections.json"));
    REQUIRE(std::filesystem::exists(tmp.path / "out" / "sft.config.json"));

    SECTION("a second run adds nothing and keeps the file byte-identical") {
        const CmdRun second = run(gsrm::cmd_synthesize, cfg);
        REQUIRE(second.exit_code == gsrm::kExitOk);
        CHECK(second.out.find("0 new trajectories, 0 rejected, 3 already present") !=
              std::string::npos);
        CHECK(testsup::read_file(sft_path) == sft);
    }
    SECTION("an oracle mismatch turns into recorded rejections") {
        gsrm::RunConfig off = fixture_config(tmp.path, paths);
        off.fit_calibration = true;
        off.mock_mismatch = 1.0;
        off.paths.output_dir = (tmp.path / "out_mismatch").string();
        const CmdRun r = run(gsrm::cmd_synthesize, off);
        REQUIRE(r.exit_code == gsrm::kExitOk);
        CHECK(r.out.find("0 new trajectories, 3 rejected") != std::string::npos);
        const auto rej = nlohmann::json::parse(
            testsup::read_file(tmp.path / "out_mismatch" / "rejections.json"));
        REQUIRE(rej.at("rejections").size() == 3);
        CHECK(rej.at("rejections")[0].at("reason").get<std::string>().find(
                  "does not match oracle") != std::string::npos);
    }
    SECTION("a recording without annotations is an item failure") {
        gsrm::RunConfig missing = fixture_config(tmp.path, paths);
        missing.fit_calibration = true;
        missing.keep_going = true;
        missing.paths.output_dir = (tmp.path / "out_missing").string();
        const auto csv = tmp.path / "short.csv";
        testsup::write_file(csv,
                            "sample_id,annotator_id,overall_score\n"
                            "rec_a,ann1,2.0\nrec_b,ann1,4.0\n");
        missing.paths.annotations_csv = csv.string();
        const CmdRun r = run(gsrm::cmd_synthesize, missing);
        CHECK(r.exit_code == gsrm::kExitItemFailures);
        CHECK(r.err.find("no annotations for recording 'rec_c'") != std::string::npos);
    }
    SECTION("bad template dir is a config error") {
        gsrm::RunConfig bad = fixture_config(tmp.path, paths);
        bad.paths.templates_dir = (tmp.path / "no_templates").string();
        const CmdRun r = run(gsrm::cmd_synthesize, bad);
        CHECK(r.exit_code == gsrm::kExitConfigError);
        CHECK(r.err.find("synthesize:") != std::string::npos);
    }
}

TEST_CASE("judge scores recordings with deterministic mock sampling", "[commands]") {
    testsup::TempDir tmp("cmd_judge");
    const auto paths = testsup::make_fixture_corpus(tmp.path);
    gsrm::RunConfig cfg = fixture_config(tmp.path, paths);
    cfg.ttc.k_samples = 4;

    const CmdRun r = run(gsrm::cmd_judge, cfg);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == gsrm::kExitOk);
    CHECK(r.out.find("wrote 3 prediction records") != std::string::npos);

    const auto pred_path = tmp.path / "out" / "predictions.jsonl";
    REQUIRE(std::filesystem::exists(pred_path));
    REQUIRE(std::filesystem::exists(tmp.path / "out" / "predictions.config.json"));

    const auto preds = gsrm::load_predictions_jsonl(pred_path);
    REQUIRE(preds.size() == 3);
    for (const char* id : {"rec_a", "rec_b", "rec_c"}) {
        REQUIRE(preds.count(id) == 1);
        CHECK(preds.at(id).size() == 4);
        for (const auto& sample : preds.at(id)) CHECK(sample.complete());
    }

    SECTION("each line carries the aggregate with the reward column") {
        std::istringstream in(testsup::read_file(pred_path));
        std::string line;
        while (std::getline(in, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j.at("aggregate").contains("overall_score"));
            CHECK(j.at("aggregate").contains("reward"));
            CHECK(j.at("parse_failures") == 0);
        }
    }
    SECTION("the same seed reproduces predictions byte for byte") {
        gsrm::RunConfig again = cfg;
        again.paths.output_dir = (tmp.path / "out2").string();
        const CmdRun r2 = run(gsrm::cmd_judge, again);
        REQUIRE(r2.exit_code == gsrm::kExitOk);
        CHECK(testsup::read_file(tmp.path / "out2" / "predictions.jsonl") ==
              testsup::read_file(pred_path));
    }
    SECTION("a different seed changes the samples") {
        gsrm::RunConfig other = cfg;
        other.seed = 43;
        other.paths.output_dir = (tmp.path / "out3").string();
        const CmdRun r3 = run(gsrm::cmd_judge, other);
        REQUIRE(r3.exit_code == gsrm::kExitOk);
        CHECK(testsup::read_file(tmp.path / "out3" / "predictions.jsonl") !=
              testsup::read_file(pred_path));
    }
    SECTION("bad ttc settings are config errors") {
        gsrm::RunConfig bad = cfg;
        bad.ttc.k_samples = 0;
        const CmdRun r4 = run(gsrm::cmd_judge, bad);
        CHECK(r4.exit_code == gsrm::kExitConfigError);
        CHECK(r4.err.find("judge:") != std::string::npos);
    }
}

TEST_CASE("evaluate reports model-human agreement from artifacts", "[commands]") {
    testsup::TempDir tmp("cmd_eval");
    const auto paths = testsup::make_fixture_corpus(tmp.path);
    gsrm::RunConfig cfg = fixture_config(tmp.path, paths);
    cfg.ttc.k_samples = 4;
    REQUIRE(run(gsrm::cmd_judge, cfg).exit_code == gsrm::kExitOk);

    const CmdRun r = run(gsrm::cmd_evaluate, cfg);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == gsrm::kExitOk);
    CHECK(r.out.find("pearson") != std::string::npos);
    CHECK(r.out.find("n_samples   3") != std::string::npos);

    const auto report_path = tmp.path / "out" / "report.json";
    REQUIRE(std::filesystem::exists(report_path));
    REQUIRE(std::filesystem::exists(tmp.path / "out" / "report.txt"));
    const auto j = nlohmann::json::parse(testsup::read_file(report_path));
    CHECK(j.at("n_samples") == 3);
    CHECK(std::abs(j.at("pearson").get<double>()) <= 1.0);
    CHECK(j.at("mse").get<double>() >= 0.0);
    CHECK(j.at("config").at("ttc").at("k_samples") == 4);

    SECTION("inter-rater consistency joins the report on request") {
        gsrm::RunConfig ir = cfg;
        ir.inter_rater = true;
        ir.inter_rater_trials = 50;
        const CmdRun r2 = run(gsrm::cmd_evaluate, ir);
        REQUIRE(r2.exit_code == gsrm::kExitOk);
        const auto j2 = nlohmann::json::parse(testsup::read_file(report_path));
        REQUIRE(j2.contains("inter_rater"));
        CHECK(std::abs(j2.at("inter_rater").at("pearson_mean").get<double>()) <= 1.0);
        CHECK(j2.at("inter_rater").at("n_used") == 3);
        CHECK(j2.at("inter_rater").at("low_n") == true);
        CHECK(r2.out.find("inter_rater") != std::string::npos);
    }
    SECTION("missing predictions file is a config error") {
        gsrm::RunConfig bad = cfg;
        bad.paths.output_dir = (tmp.path / "empty").string();
        const CmdRun r3 = run(gsrm::cmd_evaluate, bad);
        CHECK(r3.exit_code == gsrm::kExitConfigError);
        CHECK(r3.err.find("evaluate:") != std::string::npos);
    }
}

TEST_CASE("simulate writes a deterministic training curve", "[commands]") {
    testsup::TempDir tmp("cmd_sim");
    gsrm::RunConfig cfg;
    cfg.paths.output_dir = (tmp.path / "out").string();
    cfg.seed = 11;
    cfg.simulate.steps = 60;
    cfg.simulate.generator.drift_per_step = 0.1;

    const CmdRun r = run(gsrm::cmd_simulate, cfg);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == gsrm::kExitOk);
    const auto csv_path = tmp.path / "out" / "sim.csv";
    REQUIRE(std::filesystem::exists(csv_path));
    const std::string csv = testsup::read_file(csv_path);
    CHECK(csv.find("step,mean_reward,max_advantage,min_advantage\n") != std::string::npos);
    CHECK(csv.find("# seed: 11") != std::string::npos);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 63); // 2 comment lines + header + 60 steps

    SECTION("same config, same bytes") {
        gsrm::RunConfig again = cfg;
        again.paths.output_dir = (tmp.path / "out2").string();
        REQUIRE(run(gsrm::cmd_simulate, again).exit_code == gsrm::kExitOk);
        const std::string a = testsup::read_file(csv_path);
        std::string b = testsup::read_file(tmp.path / "out2" / "sim.csv");
        // Only the output_dir path differs inside the config echo line.
        CHECK(a.substr(a.find('\n')) == b.substr(b.find('\n')));
    }
    SECTION("rbf shaping runs end to end") {
        gsrm::RunConfig rbf = cfg;
        rbf.simulate.reward = "rbf";
        rbf.simulate.sigma = 0.8;
        rbf.paths.output_dir = (tmp.path / "out_rbf").string();
        CHECK(run(gsrm::cmd_simulate, rbf).exit_code == gsrm::kExitOk);
    }
    SECTION("validation failures are config errors") {
        gsrm::RunConfig bad = cfg;
        bad.simulate.steps = 0;
        CHECK(run(gsrm::cmd_simulate, bad).exit_code == gsrm::kExitConfigError);
        gsrm::RunConfig bad2 = cfg;
        bad2.simulate.target = {{"pacing", 4.0}};
        const CmdRun r2 = run(gsrm::cmd_simulate, bad2);
        CHECK(r2.exit_code == gsrm::kExitConfigError);
        CHECK(r2.err.find("missing from generator") != std::string::npos);
    }
}
