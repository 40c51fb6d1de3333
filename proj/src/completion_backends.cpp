#include "toptrain/completion_backends.hpp"

#include <httplib.h>

#include <cstdio>

#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

json completion_request_json(const CompletionRequest& r) {
    return {{"prompt", r.prompt},
            {"seed", r.seed},
            {"temperature", r.temperature},
            {"top_p", r.top_p},
            {"max_total_tokens", r.max_total_tokens},
            {"renormalize_logits", r.renormalize_logits}};
}

CompletionResult parse_completion_response(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("completion response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
        throw ProtocolError("completion response lacks a string \"text\" field");
    CompletionResult res;
    res.text = j.at("text").get<std::string>();
    if (j.contains("token_count") && j.at("token_count").is_number_unsigned())
        res.token_count = j.at("token_count").get<std::size_t>();
    return res;
}

namespace {

constexpr const char* kMockVocabulary[] = {
    "patients",   "presented", "with",      "bilateral",  "opacities", "infection", "protein",  "binding",
    "receptor",   "clinical",  "findings",  "suggest",    "acute",     "chronic",   "evidence", "imaging",
    "treatment",  "response",  "observed",  "significant", "cohort",   "analysis",  "viral",    "replication",
    "expression", "increased", "mucosal",   "transmission", "study",   "reported",  "domain",   "lesion",
};

}  // namespace

std::string EchoMockBackend::continuation(const std::string& prompt, std::uint64_t seed, std::size_t max_total_tokens) {
    const std::size_t prompt_tokens = text::count_whitespace_tokens(prompt);
    if (prompt_tokens + 2 > max_total_tokens) return {};
    std::uint64_t h = splitmix64(seed ^ fnv1a64(prompt));
    std::size_t words = 12 + h % 24;
    words = std::min(words, max_total_tokens - prompt_tokens - 1);
    char tag[17];
    std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(h));
    std::string out = std::string("mock-") + tag;
    constexpr std::size_t vocab = std::size(kMockVocabulary);
    for (std::size_t i = 0; i < words; ++i) {
        h = splitmix64(h);
        out += ' ';
        out += kMockVocabulary[h % vocab];
    }
    out += '.';
    return out;
}

CompletionResult EchoMockBackend::complete(const CompletionRequest& request) {
    CompletionResult res;
    res.text = continuation(request.prompt, request.seed, request.max_total_tokens);
    res.token_count = text::count_whitespace_tokens(res.text);
    return res;
}

HttpCompletionBackend::HttpCompletionBackend(std::string base_url, std::string model_id, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), model_id_(std::move(model_id)), timeout_(timeout) {}

CompletionResult HttpCompletionBackend::complete(const CompletionRequest& request) {
    httplib::Client client(base_url_);
    client.set_read_timeout(timeout_);
    client.set_connection_timeout(std::chrono::seconds(10));
    auto res = client.Post("/generate", completion_request_json(request).dump(), "application/json");
    if (!res) throw TransportError("POST " + base_url_ + "/generate failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("POST " + base_url_ + "/generate returned HTTP " + std::to_string(res->status));
    return parse_completion_response(res->body);
}

SubprocessCompletionBackend::SubprocessCompletionBackend(std::string command, std::string model_id)
    : command_(std::move(command)), model_id_(std::move(model_id)) {}

CompletionResult SubprocessCompletionBackend::complete(const CompletionRequest& request) {
    if (!process_) process_ = std::make_unique<LineProcess>(command_);
    try {
        return parse_completion_response(process_->exchange(completion_request_json(request).dump()));
    } catch (const TransportError&) {
        process_.reset();
        throw;
    }
}

}  // namespace toptrain
