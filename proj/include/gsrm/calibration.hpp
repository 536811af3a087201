#pragma once

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsrm/error.hpp"
#include "gsrm/prosody.hpp"
#include "gsrm/stats.hpp"

namespace gsrm {

// Continuous features that flow through the two-stage normalizer and the
// quantile binner. Pitch level and slope are binned on raw scales instead.
enum class ContFeature : int { PitchVar = 0, Intensity = 1, IntensityVar = 2, Duration = 3 };
inline constexpr int kNumContFeatures = 4;
inline constexpr std::array<const char*, kNumContFeatures> kContFeatureNames = {
    "pitch_var", "intensity", "intensity_var", "duration"};

struct BinningConfig {
    std::vector<double> pitch_level_thresholds_hz = {85, 110, 160, 220, 280, 390};
    std::vector<std::string> pitch_level_labels = {
        "extremely low", "very low", "low", "mid", "high", "very high", "extremely high"};
    std::vector<std::string> quantile_labels = {"very low", "low", "mid", "high", "very high"};
    std::vector<std::string> slope_level_labels = {"low", "mid", "high"};
    std::size_t min_cell_count = 20;

    void validate() const {
        for (std::size_t i = 1; i < pitch_level_thresholds_hz.size(); ++i)
            if (pitch_level_thresholds_hz[i] <= pitch_level_thresholds_hz[i - 1])
                fail("BinningConfig: thresholds not strictly increasing");
        if (pitch_level_labels.size() != pitch_level_thresholds_hz.size() + 1)
            fail("BinningConfig: pitch label count must be boundary count + 1");
        if (quantile_labels.size() != 5) fail("BinningConfig: need 5 quantile labels");
        if (slope_level_labels.size() != 3) fail("BinningConfig: need 3 slope level labels");
    }
};

struct Moments {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

struct FeatureQuantiles {
    double p10 = 0.0, p25 = 0.0, p75 = 0.0, p90 = 0.0;
    std::size_t n = 0;
};

struct SlopeBranchStats {
    double p25 = 0.0, p75 = 0.0;
    std::size_t n = 0;
};

struct CalibrationStats {
    static constexpr int kSchemaVersion = 1;
    int schema_version = kSchemaVersion;
    std::size_t min_cell_count = 20; // echoed from the fitting config

    std::array<Moments, kNumContFeatures> global_raw;
    std::map<std::string, std::array<Moments, kNumContFeatures>> speaker_raw;
    std::array<Moments, kNumContFeatures> global_residual;
    std::map<std::string, std::array<Moments, kNumContFeatures>> vowel_residual;
    std::array<FeatureQuantiles, kNumContFeatures> quantiles;
    SlopeBranchStats slope_pos, slope_neg;

    bool fitted() const { return global_raw[0].n + global_raw[1].n + global_raw[2].n > 0; }
};

struct CalObservation {
    std::string speaker;
    std::string vowel;
    VowelRawFeatures raw;
};

struct NormalizedFeatures {
    std::array<std::optional<double>, kNumContFeatures> z;
};

struct VowelFeaturesBinned {
    std::optional<std::string> pitch;
    std::optional<std::string> pitch_variation;
    std::optional<std::string> pitch_slope;
    std::optional<std::string> intensity;
    std::optional<std::string> intensity_variation;
    std::optional<std::string> duration; // absent iff core not fully voiced
};

namespace detail {

// Duration only exists for fully-voiced cores; everything else is taken
// whenever the raw extractor produced it.
inline std::optional<double> feature_value(const VowelRawFeatures& raw, ContFeature f) {
    switch (f) {
        case ContFeature::PitchVar: return raw.pitch_var_hz;
        case ContFeature::Intensity: return raw.intensity_db;
        case ContFeature::IntensityVar: return raw.intensity_var_db;
        case ContFeature::Duration:
            if (!raw.core_fully_voiced) return std::nullopt;
            return raw.duration_s;
    }
    return std::nullopt;
}

inline Moments moments_of(const std::vector<double>& xs) {
    Moments m;
    m.n = xs.size();
    if (!xs.empty()) {
        m.mean = stats::mean(xs);
        m.std = stats::population_std(xs);
    }
    return m;
}

inline double zscore(double x, const Moments& m) {
    return m.std > 0.0 ? (x - m.mean) / m.std : 0.0;
}

// Cell selection with the small-cell fallback: a per-speaker or per-vowel
// cell is used only when it holds at least min_cell_count observations of
// the feature; otherwise the global cell stands in. Unknown ids fall back
// the same way.
template <typename Map>
inline const Moments& select_cell(const Map& cells, const std::string& key,
                                  const std::array<Moments, kNumContFeatures>& global,
                                  ContFeature f, std::size_t min_cell_count) {
    const auto it = cells.find(key);
    if (it != cells.end() && it->second[std::size_t(f)].n >= min_cell_count)
        return it->second[std::size_t(f)];
    return global[std::size_t(f)];
}

} // namespace detail

// Two-stage fit: per-speaker raw moments, then per-vowel-class moments of the
// stage-1 residuals, then corpus quantiles of the twice-normalized values.
// Slope percentiles are taken on raw Hz/s, split by sign (slope >= 0 counts
// as the positive branch, matching the binning convention).
inline CalibrationStats fit_calibration(const std::vector<CalObservation>& observations,
                                        const BinningConfig& cfg = {}) {
    cfg.validate();
    if (observations.empty()) fail("fit_calibration: empty input");

    CalibrationStats out;
    out.min_cell_count = cfg.min_cell_count;

    // Stage 1: raw moments per speaker and globally.
    std::map<std::string, std::array<std::vector<double>, kNumContFeatures>> by_speaker;
    std::array<std::vector<double>, kNumContFeatures> all_raw;
    for (const CalObservation& obs : observations) {
        auto& rows = by_speaker[obs.speaker];
        for (int f = 0; f < kNumContFeatures; ++f) {
            const auto v = detail::feature_value(obs.raw, ContFeature(f));
            if (!v) continue;
            rows[std::size_t(f)].push_back(*v);
            all_raw[std::size_t(f)].push_back(*v);
        }
    }
    for (int f = 0; f < kNumContFeatures; ++f)
        out.global_raw[std::size_t(f)] = detail::moments_of(all_raw[std::size_t(f)]);
    for (const auto& [speaker, rows] : by_speaker) {
        auto& cell = out.speaker_raw[speaker];
        for (int f = 0; f < kNumContFeatures; ++f)
            cell[std::size_t(f)] = detail::moments_of(rows[std::size_t(f)]);
    }

    // Stage 2: residual moments per vowel class and globally, using the same
    // fallback rule normalize() will apply later.
    std::map<std::string, std::array<std::vector<double>, kNumContFeatures>> by_vowel;
    std::array<std::vector<double>, kNumContFeatures> all_residuals;
    for (const CalObservation& obs : observations) {
        for (int f = 0; f < kNumContFeatures; ++f) {
            const auto v = detail::feature_value(obs.raw, ContFeature(f));
            if (!v) continue;
            const Moments& sm = detail::select_cell(out.speaker_raw, obs.speaker, out.global_raw,
                                                    ContFeature(f), cfg.min_cell_count);
            const double z1 = detail::zscore(*v, sm);
            by_vowel[obs.vowel][std::size_t(f)].push_back(z1);
            all_residuals[std::size_t(f)].push_back(z1);
        }
    }
    for (int f = 0; f < kNumContFeatures; ++f)
        out.global_residual[std::size_t(f)] = detail::moments_of(all_residuals[std::size_t(f)]);
    for (const auto& [vowel, rows] : by_vowel) {
        auto& cell = out.vowel_residual[vowel];
        for (int f = 0; f < kNumContFeatures; ++f)
            cell[std::size_t(f)] = detail::moments_of(rows[std::size_t(f)]);
    }

    // Corpus quantiles of the twice-normalized values.
    std::array<std::vector<double>, kNumContFeatures> z2_all;
    for (const CalObservation& obs : observations) {
        for (int f = 0; f < kNumContFeatures; ++f) {
            const auto v = detail::feature_value(obs.raw, ContFeature(f));
            if (!v) continue;
            const Moments& sm = detail::select_cell(out.speaker_raw, obs.speaker, out.global_raw,
                                                    ContFeature(f), cfg.min_cell_count);
            const Moments& vm = detail::select_cell(out.vowel_residual, obs.vowel,
                                                    out.global_residual, ContFeature(f),
                                                    cfg.min_cell_count);
            z2_all[std::size_t(f)].push_back(detail::zscore(detail::zscore(*v, sm), vm));
        }
    }
    for (int f = 0; f < kNumContFeatures; ++f) {
        const auto& xs = z2_all[std::size_t(f)];
        FeatureQuantiles& q = out.quantiles[std::size_t(f)];
        q.n = xs.size();
        if (!xs.empty()) {
            q.p10 = stats::quantile_type7(xs, 0.10);
            q.p25 = stats::quantile_type7(xs, 0.25);
            q.p75 = stats::quantile_type7(xs, 0.75);
            q.p90 = stats::quantile_type7(xs, 0.90);
        }
    }

    // Slope branches on raw Hz/s.
    std::vector<double> pos, neg;
    for (const CalObservation& obs : observations)
        if (obs.raw.pitch_slope_hz_per_s) {
            const double s = *obs.raw.pitch_slope_hz_per_s;
            (s >= 0.0 ? pos : neg).push_back(s);
        }
    if (!pos.empty()) {
        out.slope_pos = {stats::quantile_type7(pos, 0.25), stats::quantile_type7(pos, 0.75),
                         pos.size()};
    }
    if (!neg.empty()) {
        out.slope_neg = {stats::quantile_type7(neg, 0.25), stats::quantile_type7(neg, 0.75),
                         neg.size()};
    }
    return out;
}

// z = ((x - mu_speaker)/sigma_speaker - mu_class)/sigma_class per feature,
// sigma = 0 => z = 0. Unknown ids use the global cells.
inline NormalizedFeatures normalize(const VowelRawFeatures& raw, const CalibrationStats& stats,
                                    const std::string& speaker, const std::string& vowel) {
    if (!stats.fitted()) fail("normalize: calibration stats not fitted");
    NormalizedFeatures out;
    for (int f = 0; f < kNumContFeatures; ++f) {
        const auto v = detail::feature_value(raw, ContFeature(f));
        if (!v) continue;
        const Moments& sm = detail::select_cell(stats.speaker_raw, speaker, stats.global_raw,
                                                ContFeature(f), stats.min_cell_count);
        const Moments& vm = detail::select_cell(stats.vowel_residual, vowel,
                                                stats.global_residual, ContFeature(f),
                                                stats.min_cell_count);
        out.z[std::size_t(f)] = detail::zscore(detail::zscore(*v, sm), vm);
    }
    return out;
}

// Left-closed fixed-threshold pitch bins:
// [0,85) extremely low ... [390, inf) extremely high.
inline std::string bin_pitch_level(double mean_f0_hz, const BinningConfig& cfg = {}) {
    if (!(mean_f0_hz > 0.0)) fail("bin_pitch_level: non-positive F0");
    std::size_t idx = 0;
    while (idx < cfg.pitch_level_thresholds_hz.size() &&
           mean_f0_hz >= cfg.pitch_level_thresholds_hz[idx])
        ++idx;
    return cfg.pitch_level_labels[idx];
}

// Branch by sign (>= 0 rising), then place the magnitude against the branch's
// magnitude quartiles: below both -> low, between -> mid, at/above the larger
// -> high. For the negative branch the 25th percentile is the most negative
// quartile, so its magnitude is the upper threshold.
inline std::string bin_pitch_slope(double slope_hz_per_s, const CalibrationStats& stats,
                                   const BinningConfig& cfg = {}) {
    const bool rising = slope_hz_per_s >= 0.0;
    const SlopeBranchStats& branch = rising ? stats.slope_pos : stats.slope_neg;
    if (branch.n == 0)
        fail(std::string("bin_pitch_slope: no calibration data in the ") +
             (rising ? "positive" : "negative") + " branch");
    const double mag = std::abs(slope_hz_per_s);
    double t_lo, t_hi;
    if (rising) {
        t_lo = branch.p25;
        t_hi = branch.p75;
    } else {
        t_lo = std::abs(branch.p75);
        t_hi = std::abs(branch.p25);
    }
    std::size_t level = mag < t_lo ? 0 : (mag < t_hi ? 1 : 2);
    return cfg.slope_level_labels[level] + (rising ? " rising" : " falling");
}

// (-inf,P10) very low, [P10,P25) low, [P25,P75) mid, [P75,P90) high,
// [P90,inf) very high.
inline std::string bin_quantile_feature(double z, ContFeature feature,
                                        const CalibrationStats& stats,
                                        const BinningConfig& cfg = {}) {
    const FeatureQuantiles& q = stats.quantiles[std::size_t(feature)];
    if (q.n == 0)
        fail(std::string("bin_quantile_feature: no quantiles fitted for ") +
             kContFeatureNames[std::size_t(feature)]);
    std::size_t idx;
    if (z < q.p10)
        idx = 0;
    else if (z < q.p25)
        idx = 1;
    else if (z < q.p75)
        idx = 2;
    else if (z < q.p90)
        idx = 3;
    else
        idx = 4;
    return cfg.quantile_labels[idx];
}

// Full composition for one vowel. Segments without enough voiced core frames
// (pitch statistics or slope unavailable) are dropped: nullopt is returned
// and *drop_reason names why. Duration is omitted unless the core is fully
// voiced.
inline std::optional<VowelFeaturesBinned> bin_vowel(const VowelRawFeatures& raw,
                                                    const std::string& speaker,
                                                    const std::string& vowel,
                                                    const CalibrationStats& stats,
                                                    const BinningConfig& cfg = {},
                                                    std::string* drop_reason = nullptr) {
    const auto drop = [&](const char* why) -> std::optional<VowelFeaturesBinned> {
        if (drop_reason) *drop_reason = why;
        return std::nullopt;
    };
    if (!raw.pitch_level_hz || !raw.pitch_var_hz) return drop("no voiced core frames");
    if (!raw.pitch_slope_hz_per_s) return drop("fewer than 2 voiced core frames (no slope)");
    if (!raw.intensity_db || !raw.intensity_var_db) return drop("no core frames");

    const NormalizedFeatures z = normalize(raw, stats, speaker, vowel);
    VowelFeaturesBinned out;
    out.pitch = bin_pitch_level(*raw.pitch_level_hz, cfg);
    out.pitch_variation =
        bin_quantile_feature(*z.z[std::size_t(ContFeature::PitchVar)], ContFeature::PitchVar,
                             stats, cfg);
    out.pitch_slope = bin_pitch_slope(*raw.pitch_slope_hz_per_s, stats, cfg);
    out.intensity = bin_quantile_feature(*z.z[std::size_t(ContFeature::Intensity)],
                                         ContFeature::Intensity, stats, cfg);
    out.intensity_variation =
        bin_quantile_feature(*z.z[std::size_t(ContFeature::IntensityVar)],
                             ContFeature::IntensityVar, stats, cfg);
    if (raw.core_fully_voiced && z.z[std::size_t(ContFeature::Duration)])
        out.duration = bin_quantile_feature(*z.z[std::size_t(ContFeature::Duration)],
                                            ContFeature::Duration, stats, cfg);
    return out;
}

// --- JSON persistence (versioned; mismatched versions are refused) ---------

namespace detail {

inline nlohmann::json moments_to_json(const Moments& m) {
    return {{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
}

inline Moments moments_from_json(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("n").get<std::size_t>()};
}

inline nlohmann::json cell_to_json(const std::array<Moments, kNumContFeatures>& cell) {
    nlohmann::json j = nlohmann::json::object();
    for (int f = 0; f < kNumContFeatures; ++f)
        j[kContFeatureNames[std::size_t(f)]] = moments_to_json(cell[std::size_t(f)]);
    return j;
}

inline std::array<Moments, kNumContFeatures> cell_from_json(const nlohmann::json& j) {
    std::array<Moments, kNumContFeatures> cell;
    for (int f = 0; f < kNumContFeatures; ++f)
        cell[std::size_t(f)] = moments_from_json(j.at(kContFeatureNames[std::size_t(f)]));
    return cell;
}

} // namespace detail

inline nlohmann::json calibration_to_json(const CalibrationStats& s) {
    nlohmann::json j;
    j["schema_version"] = s.schema_version;
    j["min_cell_count"] = s.min_cell_count;
    j["global_raw"] = detail::cell_to_json(s.global_raw);
    j["global_residual"] = detail::cell_to_json(s.global_residual);
    nlohmann::json speakers = nlohmann::json::object();
    for (const auto& [k, v] : s.speaker_raw) speakers[k] = detail::cell_to_json(v);
    j["speaker_raw"] = std::move(speakers);
    nlohmann::json vowels = nlohmann::json::object();
    for (const auto& [k, v] : s.vowel_residual) vowels[k] = detail::cell_to_json(v);
    j["vowel_residual"] = std::move(vowels);
    nlohmann::json q = nlohmann::json::object();
    for (int f = 0; f < kNumContFeatures; ++f) {
        const FeatureQuantiles& fq = s.quantiles[std::size_t(f)];
        q[kContFeatureNames[std::size_t(f)]] = {
            {"p10", fq.p10}, {"p25", fq.p25}, {"p75", fq.p75}, {"p90", fq.p90}, {"n", fq.n}};
    }
    j["quantiles"] = std::move(q);
    j["slope_pos"] = {{"p25", s.slope_pos.p25}, {"p75", s.slope_pos.p75}, {"n", s.slope_pos.n}};
    j["slope_neg"] = {{"p25", s.slope_neg.p25}, {"p75", s.slope_neg.p75}, {"n", s.slope_neg.n}};
    return j;
}

inline CalibrationStats calibration_from_json(const nlohmann::json& j) {
    CalibrationStats s;
    const int version = j.at("schema_version").get<int>();
    if (version != CalibrationStats::kSchemaVersion)
        fail("calibration: schema_version " + std::to_string(version) + " unsupported (want " +
             std::to_string(CalibrationStats::kSchemaVersion) + ")");
    s.schema_version = version;
    s.min_cell_count = j.at("min_cell_count").get<std::size_t>();
    s.global_raw = detail::cell_from_json(j.at("global_raw"));
    s.global_residual = detail::cell_from_json(j.at("global_residual"));
    for (const auto& [k, v] : j.at("speaker_raw").items())
        s.speaker_raw[k] = detail::cell_from_json(v);
    for (const auto& [k, v] : j.at("vowel_residual").items())
        s.vowel_residual[k] = detail::cell_from_json(v);
    for (int f = 0; f < kNumContFeatures; ++f) {
        const nlohmann::json& fq = j.at("quantiles").at(kContFeatureNames[std::size_t(f)]);
        s.quantiles[std::size_t(f)] = {fq.at("p10").get<double>(), fq.at("p25").get<double>(),
                                       fq.at("p75").get<double>(), fq.at("p90").get<double>(),
                                       fq.at("n").get<std::size_t>()};
    }
    s.slope_pos = {j.at("slope_pos").at("p25").get<double>(),
                   j.at("slope_pos").at("p75").get<double>(),
                   j.at("slope_pos").at("n").get<std::size_t>()};
    s.slope_neg = {j.at("slope_neg").at("p25").get<double>(),
                   j.at("slope_neg").at("p75").get<double>(),
                   j.at("slope_neg").at("n").get<std::size_t>()};
    return s;
}

inline void save_calibration(const CalibrationStats& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("save_calibration: cannot write '" + path + "'");
    out << calibration_to_json(s).dump(2) << "\n";
}

inline CalibrationStats load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("load_calibration: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("load_calibration: invalid JSON in '" + path + "': " + e.what());
    }
    return calibration_from_json(j);
}

} // namespace gsrm
