#include "toptrain/ner_backends.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "toptrain/error.hpp"

namespace toptrain {

using nlohmann::json;

std::string ner_request_line(const SourceDocument& doc) {
    return json{{"doc_id", doc.doc_id}, {"text", doc.text}}.dump();
}

std::vector<MentionSpan> parse_ner_response(const std::string& line, const std::string& expected_doc_id) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError("NER response for " + expected_doc_id + " is not JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("doc_id") || !j.contains("mentions") || !j.at("mentions").is_array())
        throw ProtocolError("NER response for " + expected_doc_id + " lacks doc_id/mentions");
    if (j.at("doc_id") != expected_doc_id)
        throw ProtocolError("NER response doc_id " + j.at("doc_id").dump() + " does not match " + expected_doc_id);
    std::vector<MentionSpan> out;
    for (const auto& m : j.at("mentions")) {
        if (!m.contains("start") || !m.contains("end") || !m.at("start").is_number_unsigned() ||
            !m.at("end").is_number_unsigned())
            throw ProtocolError("NER mention for " + expected_doc_id + " needs non-negative integer start/end");
        out.push_back({m.at("start").get<std::size_t>(), m.at("end").get<std::size_t>()});
    }
    return out;
}

SubprocessNerBackend::SubprocessNerBackend(std::string command, std::string model_id)
    : command_(std::move(command)), model_id_(std::move(model_id)) {}

std::vector<MentionSpan> SubprocessNerBackend::recognize(const SourceDocument& doc) {
    if (!process_) process_ = std::make_unique<LineProcess>(command_);
    try {
        return parse_ner_response(process_->exchange(ner_request_line(doc)), doc.doc_id);
    } catch (const TransportError& e) {
        process_.reset();
        throw TransportError(e.what(), doc.doc_id);
    }
}

HttpNerBackend::HttpNerBackend(std::string base_url, std::string model_id, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), model_id_(std::move(model_id)), timeout_(timeout) {}

std::vector<MentionSpan> HttpNerBackend::recognize(const SourceDocument& doc) {
    httplib::Client client(base_url_);
    client.set_read_timeout(timeout_);
    client.set_connection_timeout(std::chrono::seconds(10));
    auto res = client.Post("/ner", ner_request_line(doc) + "\n", "application/x-ndjson");
    if (!res) throw TransportError("POST " + base_url_ + "/ner failed: " + httplib::to_string(res.error()), doc.doc_id);
    if (res->status != 200)
        throw TransportError("POST " + base_url_ + "/ner returned HTTP " + std::to_string(res->status), doc.doc_id);
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return parse_ner_response(body, doc.doc_id);
}

}  // namespace toptrain
