#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gsrm/completion.hpp"
#include "gsrm/error.hpp"

namespace gsrm {

struct HttpEndpoint {
    std::string url;   // e.g. http://10.0.0.5:8080/v1/complete
    std::string token; // optional bearer token
    double timeout_s = 120.0;
    bool chat_style = false; // send messages=[...] instead of prompt
};

inline HttpEndpoint endpoint_from_env() {
    HttpEndpoint ep;
    const char* url = std::getenv("GSRM_LLM_URL");
    if (!url || !*url) fail("GSRM_LLM_URL is not set; use --mock or export an endpoint URL");
    ep.url = url;
    if (const char* token = std::getenv("GSRM_LLM_TOKEN")) ep.token = token;
    return ep;
}

// POSTs {model, prompt|messages, temperature, top_p, max_tokens} as JSON and
// reads {text} back (OpenAI-style bodies are accepted as a fallback).
class HttpCompletionClient : public CompletionClient {
public:
    explicit HttpCompletionClient(HttpEndpoint ep) : ep_(std::move(ep)) {
        const std::size_t scheme_end = ep_.url.find("://");
        if (scheme_end == std::string::npos) fail("endpoint URL missing scheme: " + ep_.url);
        if (ep_.url.substr(0, scheme_end) != "http")
            fail("only http:// endpoints are supported: " + ep_.url);
        const std::size_t path_start = ep_.url.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? ep_.url : ep_.url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : ep_.url.substr(path_start);
    }

    CompletionResult complete_once(const CompletionRequest& req) override {
        nlohmann::json body;
        body["model"] = req.model;
        if (ep_.chat_style) {
            body["messages"] = nlohmann::json::array(
                {nlohmann::json{{"role", "user"}, {"content", req.prompt}}});
        } else {
            body["prompt"] = req.prompt;
        }
        body["temperature"] = req.temperature;
        body["top_p"] = req.top_p;
        body["max_tokens"] = req.max_tokens;
        if (req.seed) body["seed"] = *req.seed;
        if (!req.audio_path.empty()) body["audio"] = req.audio_path;

        httplib::Client cli(base_);
        cli.set_connection_timeout(std::chrono::duration<double>(ep_.timeout_s));
        cli.set_read_timeout(std::chrono::duration<double>(ep_.timeout_s));
        httplib::Headers headers;
        if (!ep_.token.empty()) headers.emplace("Authorization", "Bearer " + ep_.token);

        const auto res = cli.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw TransientError("endpoint unreachable: " + httplib::to_string(res.error()));
        if (res->status >= 500 || res->status == 408 || res->status == 429)
            throw TransientError("endpoint returned status " + std::to_string(res->status));
        if (res->status < 200 || res->status >= 300)
            fail("endpoint returned status " + std::to_string(res->status) + ": " + res->body);

        try {
            const auto parsed = nlohmann::json::parse(res->body);
            CompletionResult out;
            if (parsed.contains("usage")) {
                out.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
                out.completion_tokens = parsed["usage"].value("completion_tokens", 0);
            }
            if (parsed.contains("text")) {
                out.text = parsed.at("text").get<std::string>();
                out.finish_reason = parsed.value("finish_reason", "stop");
                return out;
            }
            if (parsed.contains("choices") && !parsed.at("choices").empty()) {
                const auto& choice = parsed.at("choices").at(0);
                out.finish_reason = choice.value("finish_reason", "stop");
                if (choice.contains("message")) {
                    out.text = choice.at("message").at("content").get<std::string>();
                    return out;
                }
                if (choice.contains("text")) {
                    out.text = choice.at("text").get<std::string>();
                    return out;
                }
            }
        } catch (const nlohmann::json::exception& e) {
            fail(std::string("endpoint response is not valid JSON: ") + e.what());
        }
        fail("endpoint response has neither 'text' nor 'choices': " + res->body);
    }

private:
    HttpEndpoint ep_;
    std::string base_;
    std::string path_;
};

} // namespace gsrm
