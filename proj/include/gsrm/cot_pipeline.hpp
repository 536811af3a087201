#pragma once

#include <cctype>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsrm/completion.hpp"
#include "gsrm/error.hpp"
#include "gsrm/feature_log.hpp"
#include "gsrm/prompts.hpp"
#include "gsrm/ratings.hpp"

namespace gsrm {

// A trajectory the pipeline discards (malformed teacher output or ratings
// that disagree with the oracle). Distinct from infrastructure errors so
// batch runs can report rejections and keep going.
class RejectionError : public Error {
public:
    explicit RejectionError(const std::string& msg) : Error(msg) {}
};

struct EvidenceEntry {
    std::string inferred_context;
    std::string nsvs_fillers;
    std::string positive;
    std::string potential_issue;
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace detail

// Splits a completion into the four bracketed sections. Strict on presence
// and order, tolerant of surrounding whitespace and a ':' after the header.
inline EvidenceEntry parse_evidence_entry(const std::string& text) {
    static const char* kSections[] = {"[Inferred context]", "[NSVs/fillers]", "[Positive]",
                                      "[Potential Issue]"};
    std::string* fields[4];
    EvidenceEntry entry;
    fields[0] = &entry.inferred_context;
    fields[1] = &entry.nsvs_fillers;
    fields[2] = &entry.positive;
    fields[3] = &entry.potential_issue;

    std::size_t starts[4];
    std::size_t from = 0;
    for (int i = 0; i < 4; ++i) {
        starts[i] = text.find(kSections[i], from);
        if (starts[i] == std::string::npos)
            fail(std::string("parse_evidence_entry: missing section ") + kSections[i]);
        from = starts[i] + std::strlen(kSections[i]);
    }
    for (int i = 0; i < 4; ++i) {
        std::size_t body_start = starts[i] + std::strlen(kSections[i]);
        if (body_start < text.size() && text[body_start] == ':') ++body_start;
        const std::size_t body_end = i + 1 < 4 ? starts[i + 1] : text.size();
        *fields[i] = detail::trim_ws(text.substr(body_start, body_end - body_start));
        if (fields[i]->empty())
            fail(std::string("parse_evidence_entry: empty section ") + kSections[i]);
    }
    return entry;
}

inline std::string render_evidence_block(const std::string& transcript,
                                         const EvidenceEntry& entry) {
    std::string out;
    out += "## Transcript: \"" + transcript + "\"\n\n";
    out += "[Inferred context]\n\n" + entry.inferred_context + "\n\n";
    out += "[NSVs/fillers]\n\n" + entry.nsvs_fillers + "\n\n";
    out += "[Positive]\n\n" + entry.positive + "\n\n";
    out += "[Potential Issue]\n\n" + entry.potential_issue + "\n";
    return out;
}

struct Trajectory {
    std::vector<EvidenceEntry> evidence; // one per utterance, in order
    std::string evidence_log_text;       // concatenated rendered blocks
    std::string judgment_cot;            // teacher output incl. [Final Ratings]
    RatingSet ratings;                   // parsed from judgment_cot
    std::string audio_ref;
};

struct SynthesisConfig {
    std::string model = "teacher";
    double temperature = 0.7;
    double top_p = 1.0;
    int max_tokens = 2048;
    int max_in_flight = 4; // per-recording concurrent evidence completions
    RetryPolicy retry;

    void validate() const {
        if (max_in_flight < 1) fail("SynthesisConfig: max_in_flight must be >= 1");
        if (temperature < 0) fail("SynthesisConfig: temperature must be >= 0");
    }
};

namespace detail {

// Runs job(i) for i in [0, n) with at most max_in_flight running at once;
// rethrows the lowest-index failure after all threads join.
inline void run_bounded(std::size_t n, int max_in_flight,
                        const std::function<void(std::size_t)>& job) {
    std::vector<std::exception_ptr> errors(n);
    for (std::size_t base = 0; base < n; base += std::size_t(max_in_flight)) {
        const std::size_t end = std::min(n, base + std::size_t(max_in_flight));
        std::vector<std::thread> threads;
        for (std::size_t i = base; i < end; ++i)
            threads.emplace_back([&, i] {
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        for (auto& t : threads) t.join();
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

} // namespace detail

// Per-utterance evidence synthesis, then a global judgment whose final
// ratings must equal the oracle; a mismatching or unparseable judgment is
// retried once and then rejected.
inline Trajectory synthesize_trajectory(const FeatureLog& log, const RatingSet& oracle,
                                        const std::string& audio_ref, const PromptLibrary& lib,
                                        CompletionClient& client, const SynthesisConfig& cfg,
                                        const AblationSpec& ablation = {}) {
    cfg.validate();
    ablation.validate();
    if (log.utterances.empty())
        fail("synthesize_trajectory: feature log for '" + audio_ref + "' has no utterances");

    Trajectory traj;
    traj.audio_ref = audio_ref;
    traj.evidence.resize(log.utterances.size());

    detail::run_bounded(log.utterances.size(), cfg.max_in_flight, [&](std::size_t i) {
        FeatureLog single;
        single.utterances.push_back(log.utterances[i]);
        const std::string utterance_text = render_feature_log(single, ablation);
        CompletionRequest req;
        req.model = cfg.model;
        req.prompt = build_evidence_prompt(utterance_text, lib, ablation);
        req.temperature = cfg.temperature;
        req.top_p = cfg.top_p;
        req.max_tokens = cfg.max_tokens;
        req.audio_path = audio_ref;
        const CompletionResult res = complete(req, client, cfg.retry);
        try {
            traj.evidence[i] = parse_evidence_entry(res.text);
        } catch (const Error& e) {
            throw RejectionError("utterance " + std::to_string(i) + ": " + e.what());
        }
    });

    for (std::size_t i = 0; i < log.utterances.size(); ++i)
        traj.evidence_log_text +=
            (i ? "\n" : "") +
            render_evidence_block(log.utterances[i].transcript, traj.evidence[i]);

    std::set<std::string> required;
    for (const char* k : kRubricKeys)
        if (!ablation.dropped_submetrics.count(k)) required.insert(k);

    CompletionRequest req;
    req.model = cfg.model;
    req.prompt = build_judgment_prompt(traj.evidence_log_text, oracle, lib, ablation);
    req.temperature = cfg.temperature;
    req.top_p = cfg.top_p;
    req.max_tokens = cfg.max_tokens;
    req.audio_path = audio_ref;

    std::string last_reason;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const CompletionResult res = complete(req, client, cfg.retry);
        try {
            const RatingSet parsed = parse_ratings_block(res.text, nullptr, &required);
            for (const std::string& k : required) {
                if (*parsed.get(k) != *oracle.get(k))
                    fail("rating '" + k + "' = " + format_rating_value(k, *parsed.get(k)) +
                         " does not match oracle " + format_rating_value(k, *oracle.get(k)));
            }
            traj.judgment_cot = detail::trim_ws(res.text) + "\n";
            traj.ratings = parsed;
            return traj;
        } catch (const Error& e) {
            last_reason = e.what();
        }
    }
    throw RejectionError("synthesize_trajectory: '" + audio_ref +
                         "' rejected, oracle mismatch after retry: " + last_reason);
}

// The SFT response string: evidence log, then the judgment CoT (which itself
// ends with the [Final Ratings] block).
inline std::string sft_response_text(const Trajectory& traj) {
    return "[Evidence log]\n\n" + traj.evidence_log_text + "\n" + traj.judgment_cot;
}

inline std::size_t emit_sft_examples(const std::vector<Trajectory>& trajectories,
                                     const std::filesystem::path& out,
                                     const PromptLibrary& lib) {
    std::ofstream os(out, std::ios::binary | std::ios::trunc);
    if (!os) fail("emit_sft_examples: cannot open " + out.string());
    const std::string prompt = build_sft_prompt(lib);
    for (const Trajectory& traj : trajectories) {
        const std::string response = sft_response_text(traj);
        nlohmann::json obj;
        obj["audio"] = traj.audio_ref;
        obj["prompt"] = prompt;
        obj["response"] = response;
        os << obj.dump() << '\n';
    }
    os.flush();
    if (!os) fail("emit_sft_examples: write failed for " + out.string());
    return trajectories.size();
}

} // namespace gsrm
