#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gsrm/error.hpp"
#include "gsrm/feature_log.hpp"
#include "gsrm/ratings.hpp"

namespace gsrm {

struct PromptTemplate {
    std::string name;
    std::string body;

    // Replaces every occurrence of {key} for each map entry. A key with no
    // occurrence in the body is an error.
    std::string fill(const std::map<std::string, std::string>& values) const {
        std::string out = body;
        for (const auto& [key, value] : values) {
            const std::string token = "{" + key + "}";
            std::size_t pos = out.find(token);
            if (pos == std::string::npos)
                fail("template '" + name + "': unknown placeholder {" + key + "}");
            while (pos != std::string::npos) {
                out.replace(pos, token.size(), value);
                pos = out.find(token, pos + value.size());
            }
        }
        return out;
    }
};

// Replaces successive occurrences of {key} with successive values; the count
// must match the number of occurrences exactly.
inline std::string fill_sequence(const PromptTemplate& tpl, std::string text,
                                 const std::string& key,
                                 const std::vector<std::string>& values) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    for (const std::string& value : values) {
        pos = text.find(token, pos);
        if (pos == std::string::npos)
            fail("template '" + tpl.name + "': unknown placeholder {" + key + "} (needed " +
                 std::to_string(values.size()) + " occurrences)");
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    if (text.find(token, pos) != std::string::npos)
        fail("template '" + tpl.name + "': unfilled occurrence of {" + key + "}");
    return text;
}

inline const std::vector<std::string>& prompt_template_names() {
    static const std::vector<std::string> names = {
        "evidence_log", "global_judgment", "gsrm_sft", "direct_score",
        "acoustic_feature_prompting"};
    return names;
}

inline PromptTemplate load_prompt_template(const std::filesystem::path& path,
                                           const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open template file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (buf.str().empty()) fail("template file is empty: " + path.string());
    return {name, buf.str()};
}

class PromptLibrary {
public:
    static PromptLibrary load(const std::filesystem::path& dir) {
        PromptLibrary lib;
        for (const std::string& name : prompt_template_names())
            lib.templates_.emplace(name, load_prompt_template(dir / (name + ".txt"), name));
        return lib;
    }

    const PromptTemplate& get(const std::string& name) const {
        const auto it = templates_.find(name);
        if (it == templates_.end()) fail("unknown prompt template: " + name);
        return it->second;
    }

private:
    std::map<std::string, PromptTemplate> templates_;
};

namespace detail {

// Bullet prefixes to strip from prompt bodies when a sub-metric is ablated:
// the "- <key>: …" line in # Evaluation Metrics and the matching expert
// guidance bullet in # Instructions.
inline std::vector<std::string> ablation_line_prefixes(const std::string& submetric) {
    static const std::map<std::string, std::string> instruction_prefix = {
        {"expressive_intensity", "- Expressive Intensity:"},
        {"expressive_correctness", "- Expressive Correctness:"},
        {"intonation", "- Intonation Quality:"},
        {"nsvs_and_fillers", "- NSVs and Fillers"},
        {"mispronunciation", "- Mispronunciation:"},
        {"pacing", "- Pacing:"},
    };
    std::vector<std::string> prefixes = {"- " + submetric + ":"};
    const auto it = instruction_prefix.find(submetric);
    if (it != instruction_prefix.end()) prefixes.push_back(it->second);
    return prefixes;
}

// Removes every line starting with one of the prefixes, along with the blank
// line that follows it, keeping the paragraph rhythm intact.
inline std::string drop_prefixed_lines(const std::string& body,
                                       const std::vector<std::string>& prefixes) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= body.size()) {
        const std::size_t eol = body.find('\n', start);
        if (eol == std::string::npos) {
            if (start < body.size()) lines.push_back(body.substr(start));
            break;
        }
        lines.push_back(body.substr(start, eol - start));
        start = eol + 1;
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        bool drop = false;
        for (const std::string& p : prefixes)
            if (lines[i].rfind(p, 0) == 0) drop = true;
        if (drop) {
            if (i + 1 < lines.size() && lines[i + 1].empty()) ++i;
            continue;
        }
        out += lines[i];
        out += '\n';
    }
    if (!body.empty() && body.back() != '\n' && !out.empty()) out.pop_back();
    return out;
}

inline std::string apply_submetric_ablation(std::string body, const AblationSpec& ablation) {
    for (const std::string& m : ablation.dropped_submetrics)
        body = drop_prefixed_lines(body, ablation_line_prefixes(m));
    return body;
}

} // namespace detail

inline std::string build_evidence_prompt(const std::string& utterance_log_text,
                                         const PromptLibrary& lib,
                                         const AblationSpec& ablation = {}) {
    if (utterance_log_text.empty()) fail("build_evidence_prompt: empty utterance text");
    ablation.validate();
    PromptTemplate tpl = lib.get("evidence_log");
    tpl.body = detail::apply_submetric_ablation(tpl.body, ablation);
    return tpl.fill({{"Acoustic features", utterance_log_text}});
}

inline std::string build_judgment_prompt(const std::string& evidence_log_text,
                                         const RatingSet& oracle, const PromptLibrary& lib,
                                         const AblationSpec& ablation = {}) {
    for (const char* key : kRubricKeys)
        if (!oracle.has(key))
            fail(std::string("build_judgment_prompt: oracle is missing '") + key + "'");
    oracle.validate();
    ablation.validate();

    PromptTemplate tpl = lib.get("global_judgment");
    tpl.body = detail::apply_submetric_ablation(tpl.body, ablation);
    for (const std::string& m : ablation.dropped_submetrics)
        tpl.body = detail::drop_prefixed_lines(tpl.body, {m + ": {", m + ": <your rating>"});

    std::map<std::string, std::string> values;
    for (const char* key : kRubricKeys) {
        if (ablation.dropped_submetrics.count(key)) continue;
        if (std::string(key) == "overall_score")
            values["human_likeness_speaker_2"] = format_rating_value(key, *oracle.get(key));
        else
            values[key] = format_rating_value(key, *oracle.get(key));
    }
    values["Evidence Log"] = evidence_log_text;
    return tpl.fill(values);
}

// The SFT / inference prompt has no placeholders; it is the template body.
inline std::string build_sft_prompt(const PromptLibrary& lib) { return lib.get("gsrm_sft").body; }

inline std::string build_direct_score_prompt(const PromptLibrary& lib) {
    return lib.get("direct_score").body;
}

// Few-shot baseline: five (feature log, oracle ratings) exemplars + the test
// sample's feature log.
inline std::string build_acoustic_feature_prompt(
    const std::vector<std::pair<std::string, RatingSet>>& few_shot,
    const std::string& test_log_text, const PromptLibrary& lib) {
    if (few_shot.size() != 5)
        fail("build_acoustic_feature_prompt: need exactly 5 few-shot examples, got " +
             std::to_string(few_shot.size()));
    if (test_log_text.empty()) fail("build_acoustic_feature_prompt: empty test feature text");
    const PromptTemplate& tpl = lib.get("acoustic_feature_prompting");

    std::map<std::string, std::string> values;
    for (std::size_t i = 0; i < few_shot.size(); ++i)
        values["acoustic feature of sample-" + std::to_string(i + 1)] = few_shot[i].first;
    values["acoustic feature of test sample"] = test_log_text;
    std::string text = tpl.fill(values);

    std::vector<std::string> ratings;
    for (const auto& [log_text, r] : few_shot) {
        std::string lines = render_ratings_lines(r);
        if (!lines.empty() && lines.back() == '\n') lines.pop_back();
        ratings.push_back(lines);
    }
    return fill_sequence(tpl, std::move(text), "Ground-truth Human Ratings", ratings);
}

} // namespace gsrm
