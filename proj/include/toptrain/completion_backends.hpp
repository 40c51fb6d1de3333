#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "toptrain/promptgen.hpp"
#include "toptrain/subprocess.hpp"

namespace toptrain {

// Wire format shared by the HTTP and subprocess transports:
//   request  {"prompt", "seed", "temperature", "top_p", "max_total_tokens", "renormalize_logits"}
//   response {"text", "token_count"}
nlohmann::json completion_request_json(const CompletionRequest& request);
CompletionResult parse_completion_response(const std::string& body);

// Deterministic stand-in for a language model: the continuation is a closed
// function of (seed, prompt) and respects the max_total_tokens budget.
class EchoMockBackend final : public CompletionBackend {
public:
    std::string id() const override { return "echo-mock"; }
    bool concurrent() const override { return true; }
    CompletionResult complete(const CompletionRequest& request) override;

    static std::string continuation(const std::string& prompt, std::uint64_t seed, std::size_t max_total_tokens);
};

// POST {base_url}/generate.
class HttpCompletionBackend final : public CompletionBackend {
public:
    HttpCompletionBackend(std::string base_url, std::string model_id = "http",
                          std::chrono::seconds timeout = std::chrono::seconds(600));
    std::string id() const override { return model_id_; }
    bool concurrent() const override { return true; }
    CompletionResult complete(const CompletionRequest& request) override;

private:
    std::string base_url_;
    std::string model_id_;
    std::chrono::seconds timeout_;
};

// One request line in, one response line out, over a child's stdin/stdout.
class SubprocessCompletionBackend final : public CompletionBackend {
public:
    SubprocessCompletionBackend(std::string command, std::string model_id = "subprocess");
    std::string id() const override { return model_id_; }
    CompletionResult complete(const CompletionRequest& request) override;

private:
    std::string command_;
    std::string model_id_;
    std::unique_ptr<LineProcess> process_;
};

}  // namespace toptrain
