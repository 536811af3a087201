// Renders a small feature log from hand-rolled audio: three synthetic vowels
// with different pitch targets, run through the full extract -> calibrate ->
// bin -> render path. No input files needed.

#include <cmath>
#include <cstddef>
#include <iostream>
#include <vector>

#include "gsrm/calibration.hpp"
#include "gsrm/feature_log.hpp"
#include "gsrm/pipeline.hpp"
#include "gsrm/prosody.hpp"

namespace {

std::vector<float> voiced_tone(double f0_hz, double seconds, int sr) {
    const std::size_t n = std::size_t(seconds * sr);
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / sr;
        out[i] = float(0.3 * std::sin(2.0 * M_PI * f0_hz * t) +
                       0.15 * std::sin(4.0 * M_PI * f0_hz * t) +
                       0.08 * std::sin(6.0 * M_PI * f0_hz * t));
    }
    return out;
}

gsrm::Phone make_phone(const char* label, const char* word, double start_s, double dur_s,
                       int n_states) {
    gsrm::Phone p;
    p.label = label;
    p.word = word;
    for (int s = 0; s < n_states; ++s)
        p.states.push_back({start_s + dur_s * s / n_states, start_s + dur_s * (s + 1) / n_states});
    return p;
}

} // namespace

int main() {
    const int sr = 24000;
    const double f0s[] = {110.0, 160.0, 220.0};
    const char* vowels[] = {"a", "ɛ", "iː"};
    const char* words[] = {"calm", "said", "see"};

    // One utterance, three 300 ms vowels separated by 100 ms of silence.
    gsrm::AudioClip clip;
    clip.sample_rate_hz = sr;
    clip.samples.assign(std::size_t(0.1 * sr), 0.0f);
    gsrm::Utterance utt;
    utt.transcript = "calm said see";
    double t = 0.1;
    for (int i = 0; i < 3; ++i) {
        const std::vector<float> tone = voiced_tone(f0s[i], 0.3, sr);
        clip.samples.insert(clip.samples.end(), tone.begin(), tone.end());
        utt.phones.push_back(make_phone(vowels[i], words[i], t, 0.3, 6));
        t += 0.3;
        clip.samples.insert(clip.samples.end(), std::size_t(0.1 * sr), 0.0f);
        t += 0.1;
    }

    gsrm::RecordingFeatures rec;
    rec.recording_id = "demo";
    rec.speaker_id = "demo";
    rec.doc.recording_id = "demo";
    rec.doc.speaker_id = "demo";
    rec.doc.utterances.push_back(utt);
    rec.segments = gsrm::extract_vowel_segments(rec.doc, gsrm::default_vowel_inventory());

    const gsrm::PitchConfig base;
    const gsrm::F0Track first_pass = gsrm::extract_f0_track(clip, base);
    const gsrm::AdaptedPitchBounds bounds = gsrm::adapt_pitch_bounds(first_pass, base);
    rec.adapted_pitch = bounds.config;
    rec.pitch_adapted = bounds.adapted;
    const gsrm::F0Track f0 =
        bounds.adapted ? gsrm::extract_f0_track(clip, bounds.config) : first_pass;
    const gsrm::IntensityTrack intensity = gsrm::extract_intensity_track(clip, bounds.config);
    for (const gsrm::VowelSegment& seg : rec.segments) {
        try {
            rec.raw.push_back(gsrm::vowel_raw_features(seg, f0, intensity));
            rec.raw_drop_reason.emplace_back();
        } catch (const gsrm::Error& e) {
            rec.raw.push_back(std::nullopt);
            rec.raw_drop_reason.push_back(e.what());
        }
    }
    rec.processed_duration_s = clip.duration_s();

    // Self-calibrate on the same three vowels; min_cell_count = 1 keeps every
    // vowel-class cell usable despite the tiny corpus.
    gsrm::BinningConfig binning;
    binning.min_cell_count = 1;
    const gsrm::CalibrationStats stats =
        gsrm::fit_calibration(gsrm::collect_observations(rec), binning);
    const gsrm::BinnedRecording binned = gsrm::bin_recording(rec, stats, binning);

    std::cout << gsrm::render_feature_log(binned.log);
    for (const auto& d : binned.drops)
        std::cout << "(dropped " << d.vowel << " in \"" << d.word << "\": " << d.reason << ")\n";
    return 0;
}
