#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "toptrain/entities.hpp"
#include "toptrain/subprocess.hpp"

namespace toptrain {

// Wire format, one JSON object per line:
//   request  {"doc_id": "...", "text": "..."}
//   response {"doc_id": "...", "mentions": [{"start": s, "end": e}, ...]}
// Offsets are code points, end exclusive.
std::string ner_request_line(const SourceDocument& doc);
std::vector<MentionSpan> parse_ner_response(const std::string& line, const std::string& expected_doc_id);

class FallbackNerBackend final : public NerBackend {
public:
    std::string id() const override { return kFallbackExtractorId; }
    bool concurrent() const override { return true; }
    std::vector<MentionSpan> recognize(const SourceDocument& doc) override { return fallback_mentions(doc.text); }
};

// Talks to a child process speaking the line protocol on stdin/stdout.
class SubprocessNerBackend final : public NerBackend {
public:
    SubprocessNerBackend(std::string command, std::string model_id = "subprocess");
    std::string id() const override { return model_id_; }
    std::vector<MentionSpan> recognize(const SourceDocument& doc) override;

private:
    std::string command_;
    std::string model_id_;
    std::unique_ptr<LineProcess> process_;
};

// POST {base_url}/ner with one request line per call.
class HttpNerBackend final : public NerBackend {
public:
    HttpNerBackend(std::string base_url, std::string model_id = "http",
                   std::chrono::seconds timeout = std::chrono::seconds(120));
    std::string id() const override { return model_id_; }
    bool concurrent() const override { return true; }
    std::vector<MentionSpan> recognize(const SourceDocument& doc) override;

private:
    std::string base_url_;
    std::string model_id_;
    std::chrono::seconds timeout_;
};

}  // namespace toptrain
