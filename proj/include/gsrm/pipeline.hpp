#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsrm/alignment.hpp"
#include "gsrm/audio.hpp"
#include "gsrm/calibration.hpp"
#include "gsrm/error.hpp"
#include "gsrm/eval.hpp"
#include "gsrm/feature_log.hpp"
#include "gsrm/prosody.hpp"
#include "gsrm/ratings.hpp"

namespace gsrm {

struct RecordingInputs {
    std::string recording_id;
    std::filesystem::path wav_path;
    std::filesystem::path alignment_path;
};

// Every *.wav in audio_dir, paired with <id>.json in alignment_dir; sorted by
// id so batch runs are order-deterministic.
inline std::vector<RecordingInputs> discover_recordings(const std::filesystem::path& audio_dir,
                                                        const std::filesystem::path& alignment_dir) {
    if (!std::filesystem::is_directory(audio_dir))
        fail("audio dir does not exist: " + audio_dir.string());
    std::vector<RecordingInputs> out;
    for (const auto& entry : std::filesystem::directory_iterator(audio_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
        const std::string id = entry.path().stem().string();
        out.push_back({id, entry.path(), alignment_dir / (id + ".json")});
    }
    std::sort(out.begin(), out.end(),
              [](const RecordingInputs& a, const RecordingInputs& b) {
                  return a.recording_id < b.recording_id;
              });
    if (out.empty()) fail("no .wav recordings found in " + audio_dir.string());
    return out;
}

struct DroppedVowel {
    std::size_t utterance_index = 0;
    std::string vowel;
    std::string word;
    double start_s = 0.0;
    double end_s = 0.0;
    std::string reason;
};

struct RecordingFeatures {
    std::string recording_id;
    std::string speaker_id;
    AlignmentDoc doc;
    std::vector<VowelSegment> segments;
    std::vector<std::optional<VowelRawFeatures>> raw; // 1:1 with segments
    std::vector<std::string> raw_drop_reason;         // set where raw is absent
    PitchConfig adapted_pitch;
    bool pitch_adapted = false;
    double processed_duration_s = 0.0;
};

// Audio front end + alignment + two-pass prosody for one recording. The
// alignment timestamps are interpreted on the trimmed 24 kHz timeline.
inline RecordingFeatures extract_recording_features(const std::filesystem::path& wav_path,
                                                    const std::filesystem::path& alignment_path,
                                                    const std::set<std::string>& inventory,
                                                    const PitchConfig& pitch_cfg = {},
                                                    const VadConfig& vad_cfg = {}) {
    RecordingFeatures out;
    out.recording_id = wav_path.stem().string();
    out.doc = parse_alignment_file(alignment_path.string());
    out.speaker_id = out.doc.speaker_id;

    AudioClip clip = select_channel(load_wav_raw(wav_path.string()), 0);
    clip = resample_24k(clip);
    clip = trim_silence(clip, vad_cfg);
    out.processed_duration_s = clip.duration_s();

    const F0Track first_pass = extract_f0_track(clip, pitch_cfg);
    const AdaptedPitchBounds bounds = adapt_pitch_bounds(first_pass, pitch_cfg);
    out.adapted_pitch = bounds.config;
    out.pitch_adapted = bounds.adapted;
    const F0Track f0 = bounds.adapted ? extract_f0_track(clip, bounds.config) : first_pass;
    const IntensityTrack intensity = extract_intensity_track(clip, bounds.config);

    out.segments = extract_vowel_segments(out.doc, inventory);
    out.raw.resize(out.segments.size());
    out.raw_drop_reason.resize(out.segments.size());
    for (std::size_t i = 0; i < out.segments.size(); ++i) {
        try {
            out.raw[i] = vowel_raw_features(out.segments[i], f0, intensity);
        } catch (const Error& e) {
            out.raw_drop_reason[i] = e.what();
        }
    }
    return out;
}

inline std::vector<CalObservation> collect_observations(const RecordingFeatures& rec) {
    std::vector<CalObservation> out;
    for (std::size_t i = 0; i < rec.segments.size(); ++i)
        if (rec.raw[i]) out.push_back({rec.speaker_id, rec.segments[i].vowel, *rec.raw[i]});
    return out;
}

struct BinnedRecording {
    FeatureLog log; // one LogUtterance per alignment utterance, kept vowels only
    std::vector<DroppedVowel> drops;
};

inline BinnedRecording bin_recording(const RecordingFeatures& rec, const CalibrationStats& stats,
                                     const BinningConfig& cfg = {}) {
    BinnedRecording out;
    out.log.utterances.resize(rec.doc.utterances.size());
    for (std::size_t ui = 0; ui < rec.doc.utterances.size(); ++ui)
        out.log.utterances[ui].transcript = rec.doc.utterances[ui].transcript;

    for (std::size_t i = 0; i < rec.segments.size(); ++i) {
        const VowelSegment& seg = rec.segments[i];
        const auto dropped = [&](const std::string& reason) {
            out.drops.push_back({seg.utterance_index, seg.vowel, seg.word,
                                 seg.full_span.start_s, seg.full_span.end_s, reason});
        };
        if (!rec.raw[i]) {
            dropped(rec.raw_drop_reason[i]);
            continue;
        }
        std::string reason;
        const auto bins = bin_vowel(*rec.raw[i], rec.speaker_id, seg.vowel, stats, cfg, &reason);
        if (!bins) {
            dropped(reason);
            continue;
        }
        out.log.utterances[seg.utterance_index].vowels.emplace_back(seg, *bins);
    }
    return out;
}

// ---- annotations CSV ------------------------------------------------------
// Header: sample_id,annotator_id,<rating key>... — each key a rubric field or
// known semantic field. Empty cells skip the field for that annotator.

inline std::vector<AnnotatedSample> load_annotations_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("annotations: cannot open " + path.string());

    const auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cell);
                cell.clear();
            } else if (c != '\r') {
                cell += c;
            }
        }
        cells.push_back(cell);
        for (std::string& s : cells) {
            std::size_t a = 0, b = s.size();
            while (a < b && s[a] == ' ') ++a;
            while (b > a && s[b - 1] == ' ') --b;
            s = s.substr(a, b - a);
        }
        return cells;
    };

    std::string line;
    if (!std::getline(in, line)) fail("annotations: empty file " + path.string());
    const std::vector<std::string> header = split(line);
    if (header.size() < 3 || header[0] != "sample_id" || header[1] != "annotator_id")
        fail("annotations: header must start with sample_id,annotator_id in " + path.string());
    for (std::size_t c = 2; c < header.size(); ++c) {
        bool rubric = known_semantic_keys().count(header[c]) > 0;
        for (const char* rk : kRubricKeys) rubric = rubric || header[c] == rk;
        if (!rubric) fail("annotations: unknown rating column '" + header[c] + "'");
    }

    std::map<std::string, AnnotatedSample> by_id;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size())
            fail("annotations: line " + std::to_string(line_no) + " has " +
                 std::to_string(cells.size()) + " cells, header has " +
                 std::to_string(header.size()));
        RatingSet r;
        for (std::size_t c = 2; c < header.size(); ++c) {
            if (cells[c].empty()) continue;
            char* end = nullptr;
            const double v = std::strtod(cells[c].c_str(), &end);
            if (end != cells[c].c_str() + cells[c].size())
                fail("annotations: line " + std::to_string(line_no) + ": '" + cells[c] +
                     "' is not a number");
            r.set(header[c], v);
        }
        r.validate();
        AnnotatedSample& sample = by_id[cells[0]];
        sample.sample_id = cells[0];
        sample.annotators.emplace_back(cells[1], std::move(r));
    }
    std::vector<AnnotatedSample> out;
    out.reserve(by_id.size());
    for (auto& [_, sample] : by_id) out.push_back(std::move(sample));
    if (out.empty()) fail("annotations: no data rows in " + path.string());
    return out;
}

// ---- ratings / predictions JSON ------------------------------------------

inline nlohmann::json ratings_to_json(const RatingSet& r) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : r.values) j[key] = value;
    return j;
}

inline RatingSet ratings_from_json(const nlohmann::json& j) {
    RatingSet r;
    for (const auto& [key, value] : j.items()) r.set(key, value.get<double>());
    r.validate();
    return r;
}

struct PredictionRecord {
    std::string recording_id;
    std::vector<RatingSet> samples; // K raw judge parses
    RatingSet aggregate;            // test-time-scaled
    int parse_failures = 0;
    std::vector<std::string> warnings;
};

inline void write_predictions_jsonl(const std::filesystem::path& path,
                                    const std::vector<PredictionRecord>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("predictions: cannot open " + path.string());
    for (const PredictionRecord& rec : records) {
        nlohmann::json j;
        j["recording_id"] = rec.recording_id;
        j["samples"] = nlohmann::json::array();
        for (const RatingSet& r : rec.samples) j["samples"].push_back(ratings_to_json(r));
        j["aggregate"] = ratings_to_json(rec.aggregate);
        j["parse_failures"] = rec.parse_failures;
        j["warnings"] = rec.warnings;
        os << j.dump() << '\n';
    }
    os.flush();
    if (!os) fail("predictions: write failed for " + path.string());
}

inline std::map<std::string, std::vector<RatingSet>> load_predictions_jsonl(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("predictions: cannot open " + path.string());
    std::map<std::string, std::vector<RatingSet>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            std::vector<RatingSet> samples;
            for (const auto& s : j.at("samples")) samples.push_back(ratings_from_json(s));
            out[j.at("recording_id").get<std::string>()] = std::move(samples);
        } catch (const nlohmann::json::exception& e) {
            fail("predictions: " + path.string() + " line " + std::to_string(line_no) + ": " +
                 e.what());
        }
    }
    if (out.empty()) fail("predictions: no records in " + path.string());
    return out;
}

} // namespace gsrm
