#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gsrm/calibration.hpp"
#include "gsrm/error.hpp"

namespace gsrm {

struct LogUtterance {
    std::string transcript;
    std::vector<std::pair<VowelSegment, VowelFeaturesBinned>> vowels;
};

struct FeatureLog {
    std::vector<LogUtterance> utterances;
};

inline const std::set<std::string>& submetric_universe() {
    static const std::set<std::string> u = {"expressive_intensity", "expressive_correctness",
                                            "intonation",           "nsvs_and_fillers",
                                            "mispronunciation",     "pacing"};
    return u;
}

struct AblationSpec {
    std::set<std::string> dropped_feature_groups; // subset of {pitch, intensity, duration}
    std::set<std::string> dropped_submetrics;     // forwarded to prompt construction

    bool drops_group(const std::string& g) const { return dropped_feature_groups.count(g) > 0; }

    void validate() const {
        for (const std::string& g : dropped_feature_groups)
            if (g != "pitch" && g != "intensity" && g != "duration")
                fail("AblationSpec: unknown feature group '" + g + "'");
        for (const std::string& m : dropped_submetrics)
            if (!submetric_universe().count(m))
                fail("AblationSpec: unknown sub-metric '" + m + "'");
    }
};

// Copy of the log with the dropped feature groups nulled. Sub-metric drops do
// not alter the log; they only reach prompt construction.
inline FeatureLog apply_feature_ablation(const FeatureLog& log, const AblationSpec& ablation) {
    ablation.validate();
    FeatureLog out = log;
    for (LogUtterance& u : out.utterances)
        for (auto& [seg, bins] : u.vowels) {
            if (ablation.drops_group("pitch")) {
                bins.pitch.reset();
                bins.pitch_variation.reset();
                bins.pitch_slope.reset();
            }
            if (ablation.drops_group("intensity")) {
                bins.intensity.reset();
                bins.intensity_variation.reset();
            }
            if (ablation.drops_group("duration")) bins.duration.reset();
        }
    return out;
}

// Exact appendix grammar, one line per utterance plus one per vowel, LF
// endings. Note the asymmetric header casing: "[Pitch Variation]" but
// "[Intensity variation]" — downstream models saw exactly this. A vowel line
// with every clause ablated is omitted entirely.
inline std::string render_feature_log(const FeatureLog& log, const AblationSpec& ablation = {}) {
    const FeatureLog filtered = apply_feature_ablation(log, ablation);
    std::string out;
    for (const LogUtterance& u : filtered.utterances) {
        out += "## Transcript: \"" + u.transcript + "\"\n";
        for (const auto& [seg, bins] : u.vowels) {
            std::vector<std::string> clauses;
            const auto add = [&](const char* header, const std::optional<std::string>& c) {
                if (c) clauses.push_back(std::string("[") + header + "] " + *c);
            };
            add("Pitch", bins.pitch);
            add("Pitch Variation", bins.pitch_variation);
            add("Pitch Slope", bins.pitch_slope);
            add("Intensity", bins.intensity);
            add("Intensity variation", bins.intensity_variation);
            add("Duration", bins.duration);
            if (clauses.empty()) continue;
            out += "### The vowel /" + seg.vowel + "/ in \"" + seg.word + "\": ";
            for (std::size_t i = 0; i < clauses.size(); ++i) {
                if (i) out += ", ";
                out += clauses[i];
            }
            out += ".\n";
        }
    }
    return out;
}

namespace detail {

inline std::string take_quoted(const std::string& line, std::size_t from, const char* what) {
    const std::size_t open = line.find('"', from);
    const std::size_t close = line.rfind('"');
    if (open == std::string::npos || close == std::string::npos || close <= open)
        fail(std::string("parse_feature_log: unterminated quoted ") + what + " in: " + line);
    return line.substr(open + 1, close - open - 1);
}

} // namespace detail

// Companion parser for golden round-trip tests: accepts exactly what
// render_feature_log emits. Only the vowel, word, and categories are
// recoverable from text; spans are left default.
inline FeatureLog parse_feature_log(const std::string& text,
                                    const BinningConfig& cfg = {}) {
    const auto known_label = [&](const std::string& header,
                                 const std::string& value) -> bool {
        const auto in = [&](const std::vector<std::string>& set) {
            for (const std::string& s : set)
                if (s == value) return true;
            return false;
        };
        if (header == "Pitch") return in(cfg.pitch_level_labels);
        if (header == "Pitch Variation" || header == "Intensity" ||
            header == "Intensity variation" || header == "Duration")
            return in(cfg.quantile_labels);
        if (header == "Pitch Slope") {
            for (const std::string& lvl : cfg.slope_level_labels)
                if (value == lvl + " rising" || value == lvl + " falling") return true;
            return false;
        }
        return false;
    };

    FeatureLog log;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;

        if (line.rfind("## Transcript: ", 0) == 0) {
            LogUtterance u;
            u.transcript = detail::take_quoted(line, 14, "transcript");
            log.utterances.push_back(std::move(u));
            continue;
        }
        if (line.rfind("### The vowel /", 0) == 0) {
            if (log.utterances.empty())
                fail("parse_feature_log: vowel line before any transcript at line " +
                     std::to_string(line_no));
            const std::size_t slash2 = line.find('/', 15);
            if (slash2 == std::string::npos)
                fail("parse_feature_log: malformed vowel marker at line " +
                     std::to_string(line_no));
            VowelSegment seg;
            seg.vowel = line.substr(15, slash2 - 15);
            seg.utterance_index = log.utterances.size() - 1;
            const std::size_t colon = line.find("\": ", slash2);
            if (colon == std::string::npos)
                fail("parse_feature_log: missing clause separator at line " +
                     std::to_string(line_no));
            seg.word = detail::take_quoted(line.substr(0, colon + 1), slash2, "word");

            std::string rest = line.substr(colon + 3);
            if (rest.empty() || rest.back() != '.')
                fail("parse_feature_log: vowel line missing final period at line " +
                     std::to_string(line_no));
            rest.pop_back();

            VowelFeaturesBinned bins;
            std::size_t cpos = 0;
            while (cpos < rest.size()) {
                if (rest[cpos] != '[')
                    fail("parse_feature_log: expected clause header at line " +
                         std::to_string(line_no));
                const std::size_t hend = rest.find("] ", cpos);
                if (hend == std::string::npos)
                    fail("parse_feature_log: unterminated clause header at line " +
                         std::to_string(line_no));
                const std::string header = rest.substr(cpos + 1, hend - cpos - 1);
                std::size_t vend = rest.find(", [", hend);
                if (vend == std::string::npos) vend = rest.size();
                const std::string value = rest.substr(hend + 2, vend - hend - 2);
                if (!known_label(header, value))
                    fail("parse_feature_log: unknown category '" + value + "' for [" + header +
                         "] at line " + std::to_string(line_no));
                if (header == "Pitch")
                    bins.pitch = value;
                else if (header == "Pitch Variation")
                    bins.pitch_variation = value;
                else if (header == "Pitch Slope")
                    bins.pitch_slope = value;
                else if (header == "Intensity")
                    bins.intensity = value;
                else if (header == "Intensity variation")
                    bins.intensity_variation = value;
                else if (header == "Duration")
                    bins.duration = value;
                else
                    fail("parse_feature_log: unknown clause header [" + header + "] at line " +
                         std::to_string(line_no));
                cpos = vend == rest.size() ? vend : vend + 2;
            }
            log.utterances.back().vowels.emplace_back(std::move(seg), std::move(bins));
            continue;
        }
        fail("parse_feature_log: unrecognized line " + std::to_string(line_no) + ": " + line);
    }
    return log;
}

} // namespace gsrm
