#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gsrm/error.hpp"
#include "gsrm/ratings.hpp"
#include "gsrm/rng.hpp"

namespace gsrm {

// Retryable failure (timeout, connection refused, 5xx). Anything else thrown
// by a client is permanent and propagates immediately.
class TransientError : public Error {
public:
    explicit TransientError(const std::string& msg) : Error(msg) {}
};

struct CompletionRequest {
    std::string model = "default";
    std::string prompt;
    double temperature = 0.7;
    double top_p = 1.0;
    int max_tokens = 2048;
    std::optional<std::uint64_t> seed; // forwarded when the endpoint supports it
    // The judged model is speech-in: judge prompts are textually identical
    // across recordings, so the audio reference rides along both for real
    // endpoints and to key the deterministic mock.
    std::string audio_path;
};

struct CompletionResult {
    std::string text;
    std::string finish_reason = "stop";
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int attempts = 1;
};

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    // Single attempt; throws TransientError for retryable failures. The
    // returned `attempts` field is overwritten by complete().
    virtual CompletionResult complete_once(const CompletionRequest& req) = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    double base_delay_s = 1.0; // doubles per retry
    std::function<void(double)> sleeper; // injectable for tests

    void sleep(double seconds) const {
        if (sleeper) {
            sleeper(seconds);
        } else {
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        }
    }
};

// Exponential-backoff wrapper around any client.
inline CompletionResult complete(const CompletionRequest& req, CompletionClient& client,
                                 const RetryPolicy& policy = {}) {
    if (policy.max_attempts < 1) fail("complete: max_attempts must be >= 1");
    if (req.temperature < 0) fail("complete: temperature must be >= 0");
    std::string last_error;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        try {
            CompletionResult res = client.complete_once(req);
            res.attempts = attempt;
            return res;
        } catch (const TransientError& e) {
            last_error = e.what();
            if (attempt < policy.max_attempts)
                policy.sleep(policy.base_delay_s * std::pow(2.0, double(attempt - 1)));
        }
    }
    fail("complete: exhausted " + std::to_string(policy.max_attempts) + " attempts; last error: " +
         last_error);
}

// Scripted test double: a queue of bodies and injected failures.
class CannedClient : public CompletionClient {
public:
    void push_body(std::string body) { script_.push_back({std::move(body), false}); }
    void push_transient_failure(std::string what = "injected timeout") {
        script_.push_back({std::move(what), true});
    }

    CompletionResult complete_once(const CompletionRequest&) override {
        std::lock_guard<std::mutex> lock(mu_);
        if (script_.empty()) throw Error("CannedClient: script exhausted");
        const auto [text, is_failure] = script_.front();
        script_.pop_front();
        if (is_failure) throw TransientError(text);
        return {.text = text};
    }

private:
    std::mutex mu_;
    std::deque<std::pair<std::string, bool>> script_;
};

struct MockOptions {
    std::uint64_t seed = 0;
    // Added to the echoed overall_score in judgment-synthesis mode; used by
    // tests to force an oracle mismatch.
    double oracle_overall_offset = 0.0;
};

// Deterministic template-driven mock endpoint. It recognizes which template
// produced the prompt and fabricates a response of the right shape. Streams
// are keyed on (seed, prompt, audio, occurrence-within-key), so results do
// not depend on scheduling across recordings.
class MockCompletionClient : public CompletionClient {
public:
    explicit MockCompletionClient(MockOptions opts = {}) : opts_(opts) {}

    CompletionResult complete_once(const CompletionRequest& req) override {
        const std::uint64_t key =
            Rng::hash_bytes(req.prompt, Rng::hash_bytes(req.audio_path, opts_.seed));
        std::uint64_t occurrence;
        {
            std::lock_guard<std::mutex> lock(mu_);
            occurrence = occurrence_[key]++;
        }
        Rng rng(Rng::mix(key, occurrence));

        CompletionResult res;
        if (req.prompt.find("# Oracle Ratings") != std::string::npos)
            res.text = judgment_response(req.prompt, rng);
        else if (req.prompt.find("Your goal is to produce an analysis") != std::string::npos)
            res.text = evidence_response(req.prompt, rng);
        else if (req.prompt.find("[Evidence log]") != std::string::npos)
            res.text = trajectory_response(req, rng);
        else
            res.text = "[Final Ratings]\n" + render_ratings_lines(sample_ratings(req, rng));
        res.prompt_tokens = int(req.prompt.size() / 4);
        res.completion_tokens = int(res.text.size() / 4);
        return res;
    }

private:
    static std::string take_quoted_after(const std::string& text, const std::string& marker) {
        const std::size_t at = text.find(marker);
        if (at == std::string::npos) return "";
        const std::size_t open = text.find('"', at);
        if (open == std::string::npos) return "";
        const std::size_t close = text.find('"', open + 1);
        if (close == std::string::npos) return "";
        return text.substr(open + 1, close - open - 1);
    }

    std::string evidence_response(const std::string& prompt, Rng& rng) const {
        const std::string transcript = take_quoted_after(prompt, "## Transcript: ");
        static const char* contexts[] = {"a neutral statement", "an empathetic response",
                                         "an instruction", "a celebratory remark"};
        static const char* positives[] = {
            "Pitch variation stays in the mid range across the stressed vowels, giving a "
            "steady, natural contour",
            "Intensity is consistent from vowel to vowel, supporting an even delivery",
            "Rising slopes on the final vowels give the phrase a lively forward motion"};
        static const char* issues[] = {
            "No notable issues detected.",
            "The low pitch variation on the final vowel leans toward flatness",
            "A high falling slope mid-phrase is slightly abrupt against the rest"};
        std::string out;
        out += "[Inferred context]\n\n";
        out += "The transcript \"" + transcript + "\" reads as " +
               contexts[rng.next_below(4)] + ".\n\n";
        out += "[NSVs/fillers]\n\nNo NSVs/fillers detected.\n\n";
        out += "[Positive]\n\n";
        out += std::string(positives[rng.next_below(3)]) + ".\n\n";
        out += "[Potential Issue]\n\n";
        out += std::string(issues[rng.next_below(3)]) + "\n";
        return out;
    }

    std::string judgment_response(const std::string& prompt, Rng&) const {
        // Echo the oracle block verbatim so parsed ratings match it exactly.
        const std::size_t at = prompt.find("# Oracle Ratings");
        std::vector<std::pair<std::string, std::string>> oracle_lines;
        std::size_t pos = prompt.find('\n', at);
        while (pos != std::string::npos && pos + 1 < prompt.size()) {
            std::size_t eol = prompt.find('\n', pos + 1);
            if (eol == std::string::npos) eol = prompt.size();
            std::string line = prompt.substr(pos + 1, eol - pos - 1);
            pos = eol == prompt.size() ? std::string::npos : eol;
            if (line.rfind("# ", 0) == 0) break; // next heading ends the block
            const std::size_t colon = line.find(": ");
            if (colon == std::string::npos) continue;
            const std::string key = line.substr(0, colon);
            bool known = known_semantic_keys().count(key) > 0;
            for (const char* rk : kRubricKeys) known = known || key == rk;
            if (known) oracle_lines.emplace_back(key, line.substr(colon + 2));
        }
        std::string out;
        out += "[Summary Explaining the Ratings]\n\n";
        out += "The evidence log is consistent across utterances. Expressiveness tracks the "
               "pitch variation categories, intonation follows the slope evidence, and pacing "
               "matches the duration picture, so each rating below follows directly from the "
               "logged features.\n\n";
        out += "[Final Ratings]\n";
        for (auto& [key, value] : oracle_lines) {
            if (key == "overall_score" && opts_.oracle_overall_offset != 0.0) {
                const double v = std::strtod(value.c_str(), nullptr) + opts_.oracle_overall_offset;
                out += key + ": " + format_rating_value(key, v) + "\n";
            } else {
                out += key + ": " + value + "\n";
            }
        }
        return out;
    }

    RatingSet sample_ratings(const CompletionRequest& req, Rng& rng) const {
        // Latent quality per audio, noise per occurrence.
        RatingSet r;
        for (const char* key : kRubricKeys) {
            const std::uint64_t h =
                Rng::hash_bytes(std::string(key), Rng::hash_bytes(req.audio_path, opts_.seed));
            Rng latent_rng(h);
            const auto [lo, hi] = rating_range(key);
            const double latent = lo + (hi - lo) * (0.25 + 0.5 * latent_rng.next_double());
            double v = latent + 0.6 * rng.gaussian();
            v = std::min(hi, std::max(lo, v));
            r.set(key, std::round(v * 10.0) / 10.0);
        }
        const std::uint64_t h =
            Rng::hash_bytes("language_complexity", Rng::hash_bytes(req.audio_path, opts_.seed));
        Rng latent_rng(h);
        double v = 1.0 + 4.0 * (0.25 + 0.5 * latent_rng.next_double()) + 0.4 * rng.gaussian();
        v = std::min(5.0, std::max(1.0, v));
        r.set("language_complexity", std::round(v * 10.0) / 10.0);
        return r;
    }

    std::string trajectory_response(const CompletionRequest& req, Rng& rng) const {
        std::string out;
        out += "[Evidence log]\n\n";
        out += "Across the turns the pitch categories stay mid with occasional high peaks, "
               "intensity is steady, and durations sit mid-range.\n\n";
        out += "[Summary Explaining the Ratings]\n\n";
        out += "Delivery is even with mild expressive range; no disfluencies stand out.\n\n";
        out += "[Final Ratings]\n";
        out += render_ratings_lines(sample_ratings(req, rng));
        return out;
    }

    MockOptions opts_;
    std::mutex mu_;
    std::map<std::uint64_t, std::uint64_t> occurrence_;
};

} // namespace gsrm
