#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "gsrm/alignment.hpp"
#include "gsrm/audio.hpp"
#include "gsrm/error.hpp"
#include "gsrm/stats.hpp"

namespace gsrm {

struct PitchConfig {
    double floor_hz = 60.0;
    double ceiling_hz = 500.0;
    double voicing_threshold = 0.45; // normalized-autocorrelation peak
    double hop_s = 0.010;
    int window_periods = 3; // analysis window = window_periods / floor_hz

    void validate() const {
        if (!(floor_hz > 0.0 && floor_hz < ceiling_hz))
            fail("PitchConfig: need 0 < floor_hz < ceiling_hz");
        if (!(voicing_threshold > 0.0 && voicing_threshold < 1.0))
            fail("PitchConfig: voicing_threshold outside (0, 1)");
    }
};

struct F0Track {
    std::vector<double> times_s; // frame centers
    std::vector<double> f0_hz;   // valid only where voicing[i]
    std::vector<bool> voicing;
};

struct IntensityTrack {
    std::vector<double> times_s;
    std::vector<double> level_db; // dBFS
};

struct VowelRawFeatures {
    std::optional<double> pitch_level_hz;      // mean F0 over voiced core frames
    std::optional<double> pitch_var_hz;        // population std of F0, voiced core frames
    std::optional<double> pitch_slope_hz_per_s;// OLS slope, needs >= 2 voiced core frames
    std::optional<double> intensity_db;        // mean dBFS over all core frames
    std::optional<double> intensity_var_db;    // population std of dBFS, all core frames
    double duration_s = 0.0;                   // full-span length
    bool core_fully_voiced = false;
};

namespace detail {

struct FrameGrid {
    std::size_t window_n = 0;
    std::size_t hop_n = 0;
    std::size_t n_frames = 0;
};

inline FrameGrid frame_grid(const AudioClip& clip, const PitchConfig& cfg) {
    cfg.validate();
    FrameGrid g;
    g.window_n = std::size_t(std::lround(double(cfg.window_periods) / cfg.floor_hz *
                                         double(clip.sample_rate_hz)));
    g.hop_n = std::max<std::size_t>(1, std::size_t(std::lround(cfg.hop_s * clip.sample_rate_hz)));
    if (g.window_n == 0 || clip.samples.size() < g.window_n)
        fail("prosody: clip shorter than one analysis window (" +
             std::to_string(g.window_n) + " samples)");
    g.n_frames = (clip.samples.size() - g.window_n) / g.hop_n + 1;
    return g;
}

} // namespace detail

// Praat-style autocorrelation pitch tracker. Per frame: subtract the frame
// mean, compute the normalized autocorrelation over the overlap
//   r(tau) = sum x[t] x[t+tau] / sqrt(sum x[t]^2 * sum x[t+tau]^2),
// pick the best local maximum with lag in [sr/ceiling, sr/floor] (a small
// octave cost prefers shorter lags among near-equal peaks), refine with
// parabolic interpolation, and call the frame voiced iff the raw peak clears
// voicing_threshold.
inline F0Track extract_f0_track(const AudioClip& clip, const PitchConfig& cfg) {
    const detail::FrameGrid grid = detail::frame_grid(clip, cfg);
    const int sr = clip.sample_rate_hz;
    const std::size_t W = grid.window_n;
    const auto lag_min =
        std::max<std::size_t>(2, std::size_t(std::floor(double(sr) / cfg.ceiling_hz)));
    const std::size_t lag_max =
        std::min(W - 1, std::size_t(std::ceil(double(sr) / cfg.floor_hz)));
    if (lag_min >= lag_max) fail("prosody: lag search range empty for this config");
    constexpr double kOctaveCost = 0.01;

    F0Track track;
    track.times_s.resize(grid.n_frames);
    track.f0_hz.assign(grid.n_frames, 0.0);
    track.voicing.assign(grid.n_frames, false);

    std::vector<double> x(W);
    std::vector<double> r(lag_max + 1, 0.0);
    std::vector<double> energy_prefix(W + 1, 0.0);

    for (std::size_t fi = 0; fi < grid.n_frames; ++fi) {
        const std::size_t start = fi * grid.hop_n;
        track.times_s[fi] = (double(start) + double(W) / 2.0) / double(sr);

        double mean_acc = 0.0;
        for (std::size_t t = 0; t < W; ++t) mean_acc += double(clip.samples[start + t]);
        const double m = mean_acc / double(W);
        for (std::size_t t = 0; t < W; ++t) x[t] = double(clip.samples[start + t]) - m;

        energy_prefix[0] = 0.0;
        for (std::size_t t = 0; t < W; ++t) energy_prefix[t + 1] = energy_prefix[t] + x[t] * x[t];
        const double total_energy = energy_prefix[W];
        if (total_energy < 1e-12) continue; // silent frame stays unvoiced

        for (std::size_t tau = lag_min; tau <= lag_max; ++tau) {
            const std::size_t len = W - tau;
            double num = 0.0;
            const double* a = x.data();
            const double* b = x.data() + tau;
            for (std::size_t t = 0; t < len; ++t) num += a[t] * b[t];
            const double e1 = energy_prefix[len];                        // sum x[0..len)
            const double e2 = energy_prefix[W] - energy_prefix[tau];     // sum x[tau..W)
            const double den = std::sqrt(e1 * e2);
            r[tau] = den > 0.0 ? num / den : 0.0;
        }

        // Best local maximum under the octave-cost score.
        double best_score = -2.0, best_peak = 0.0;
        std::size_t best_tau = 0;
        for (std::size_t tau = lag_min; tau <= lag_max; ++tau) {
            const bool left_ok = tau == lag_min || r[tau] >= r[tau - 1];
            const bool right_ok = tau == lag_max || r[tau] > r[tau + 1];
            if (!(left_ok && right_ok)) continue;
            const double score =
                r[tau] - kOctaveCost * std::log2(double(tau) / double(lag_min));
            if (score > best_score) {
                best_score = score;
                best_peak = r[tau];
                best_tau = tau;
            }
        }
        if (best_tau == 0 || best_peak < cfg.voicing_threshold) continue;

        double refined = double(best_tau);
        if (best_tau > lag_min && best_tau < lag_max) {
            const double ym = r[best_tau - 1], y0 = r[best_tau], yp = r[best_tau + 1];
            const double denom = ym - 2.0 * y0 + yp;
            if (std::abs(denom) > 1e-12) {
                const double delta = 0.5 * (ym - yp) / denom;
                if (std::abs(delta) <= 1.0) refined += delta;
            }
        }
        const double f0 = std::clamp(double(sr) / refined, cfg.floor_hz, cfg.ceiling_hz);
        track.f0_hz[fi] = f0;
        track.voicing[fi] = true;
    }
    return track;
}

struct AdaptedPitchBounds {
    PitchConfig config;
    bool adapted = false; // false when the voiced-frame guard fired
};

// Speaker-adaptive two-pass rule: floor' = max(60, 0.7 * P10 of voiced F0),
// ceiling' = min(600, 1.5 * P90). The caller re-runs extraction with the
// result. Fewer than 10 voiced frames returns cfg unchanged, flagged.
inline AdaptedPitchBounds adapt_pitch_bounds(const F0Track& track, const PitchConfig& cfg) {
    std::vector<double> voiced;
    for (std::size_t i = 0; i < track.f0_hz.size(); ++i)
        if (track.voicing[i]) voiced.push_back(track.f0_hz[i]);
    if (voiced.size() < 10) return {cfg, false};

    const double p10 = stats::quantile_type7(voiced, 0.10);
    const double p90 = stats::quantile_type7(voiced, 0.90);
    PitchConfig out = cfg;
    out.floor_hz = std::max(60.0, 0.7 * p10);
    out.ceiling_hz = std::min(600.0, 1.5 * p90);
    return {out, true};
}

// RMS level on the same frame grid as the pitch tracker:
// level_db = 20 log10(rms + 1e-10).
inline IntensityTrack extract_intensity_track(const AudioClip& clip, const PitchConfig& cfg) {
    const detail::FrameGrid grid = detail::frame_grid(clip, cfg);
    IntensityTrack track;
    track.times_s.resize(grid.n_frames);
    track.level_db.resize(grid.n_frames);
    for (std::size_t fi = 0; fi < grid.n_frames; ++fi) {
        const std::size_t start = fi * grid.hop_n;
        track.times_s[fi] = (double(start) + double(grid.window_n) / 2.0) / clip.sample_rate_hz;
        track.level_db[fi] = detail::rms_db(clip.samples.data() + start, grid.window_n);
    }
    return track;
}

// Per-vowel raw features (Table 3 statistics). Core frames are the frames
// whose centers fall in [core.start, core.end); pitch statistics use the
// voiced ones, intensity statistics use all of them, duration is the full
// span. Slope needs >= 2 voiced core frames, pitch stats >= 1.
inline VowelRawFeatures vowel_raw_features(const VowelSegment& seg, const F0Track& f0,
                                           const IntensityTrack& intensity) {
    if (f0.times_s.size() != f0.f0_hz.size() || f0.times_s.size() != f0.voicing.size())
        fail("vowel_raw_features: malformed F0 track");
    if (f0.times_s.empty() || intensity.times_s.empty())
        fail("vowel_raw_features: empty tracks");
    const double hop = f0.times_s.size() > 1 ? f0.times_s[1] - f0.times_s[0] : 0.010;
    if (f0.times_s.front() - hop > seg.full_span.start_s + 1e-9 ||
        f0.times_s.back() + hop < seg.full_span.end_s - 1e-9)
        fail("vowel_raw_features: tracks do not cover span [" +
             std::to_string(seg.full_span.start_s) + ", " +
             std::to_string(seg.full_span.end_s) + "]");

    std::vector<double> voiced_t, voiced_f0;
    std::size_t core_frames = 0, voiced_core_frames = 0;
    for (std::size_t i = 0; i < f0.times_s.size(); ++i) {
        const double t = f0.times_s[i];
        if (t < seg.core_span.start_s || t >= seg.core_span.end_s) continue;
        ++core_frames;
        if (f0.voicing[i]) {
            ++voiced_core_frames;
            voiced_t.push_back(t);
            voiced_f0.push_back(f0.f0_hz[i]);
        }
    }
    std::vector<double> core_db;
    for (std::size_t i = 0; i < intensity.times_s.size(); ++i) {
        const double t = intensity.times_s[i];
        if (t >= seg.core_span.start_s && t < seg.core_span.end_s)
            core_db.push_back(intensity.level_db[i]);
    }

    VowelRawFeatures raw;
    raw.duration_s = seg.full_span.length_s();
    raw.core_fully_voiced = core_frames > 0 && voiced_core_frames == core_frames;
    if (!voiced_f0.empty()) {
        raw.pitch_level_hz = stats::mean(voiced_f0);
        raw.pitch_var_hz = stats::population_std(voiced_f0);
        if (voiced_f0.size() >= 2)
            raw.pitch_slope_hz_per_s = stats::ols_slope(voiced_t, voiced_f0);
    }
    if (!core_db.empty()) {
        raw.intensity_db = stats::mean(core_db);
        raw.intensity_var_db = stats::population_std(core_db);
    }
    return raw;
}

} // namespace gsrm
