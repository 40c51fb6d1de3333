#include "toptrain/encyclopedia.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <thread>

#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

MediaWikiClient::MediaWikiClient(std::string base_url, std::string api_path)
    : base_url_(std::move(base_url)), api_path_(std::move(api_path)) {}

std::string MediaWikiClient::get(const std::vector<std::pair<std::string, std::string>>& params) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(std::chrono::seconds(60));
    client.set_follow_location(true);
    httplib::Params query;
    for (const auto& [k, v] : params) query.emplace(k, v);
    const httplib::Headers headers = {{"User-Agent", "toptrain-corpus-builder/0.1 (research tooling)"}};
    auto res = client.Get(api_path_, query, headers);
    if (!res) throw TransportError("GET " + base_url_ + api_path_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("GET " + base_url_ + api_path_ + " returned HTTP " + std::to_string(res->status));
    return res->body;
}

std::vector<SearchHit> MediaWikiClient::search(const std::string& query) {
    const std::string body = get({{"action", "query"},
                                  {"format", "json"},
                                  {"formatversion", "2"},
                                  {"generator", "search"},
                                  {"gsrsearch", query},
                                  {"gsrlimit", "5"},
                                  {"prop", "pageprops"},
                                  {"ppprop", "disambiguation"}});
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("search response is not JSON: ") + e.what());
    }
    std::vector<std::pair<int, SearchHit>> ranked;
    if (j.contains("query") && j.at("query").contains("pages")) {
        for (const auto& p : j.at("query").at("pages")) {
            SearchHit hit;
            hit.title = p.value("title", "");
            hit.disambiguation = p.contains("pageprops") && p.at("pageprops").contains("disambiguation");
            ranked.emplace_back(p.value("index", 0), std::move(hit));
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<SearchHit> hits;
    for (auto& [_, h] : ranked) hits.push_back(std::move(h));
    return hits;
}

std::optional<std::string> MediaWikiClient::page_text(const std::string& title) {
    const std::string body = get({{"action", "query"},
                                  {"format", "json"},
                                  {"formatversion", "2"},
                                  {"prop", "extracts"},
                                  {"explaintext", "1"},
                                  {"redirects", "1"},
                                  {"titles", title}});
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("page response is not JSON: ") + e.what());
    }
    if (!j.contains("query") || !j.at("query").contains("pages") || j.at("query").at("pages").empty())
        throw ProtocolError("page response for \"" + title + "\" has no pages");
    const auto& page = j.at("query").at("pages").at(0);
    if (page.value("missing", false)) return std::nullopt;
    if (!page.contains("extract") || !page.at("extract").is_string())
        throw ProtocolError("page \"" + title + "\" has no plain-text extract");
    return page.at("extract").get<std::string>();
}

CachingEncyclopediaClient::CachingEncyclopediaClient(EncyclopediaClient& upstream, std::filesystem::path cache_dir,
                                                     std::chrono::milliseconds politeness_delay)
    : upstream_(upstream), cache_dir_(std::move(cache_dir)), delay_(politeness_delay) {}

void CachingEncyclopediaClient::pace() {
    if (last_call_) {
        const auto ready = *last_call_ + delay_;
        const auto now = std::chrono::steady_clock::now();
        if (now < ready) std::this_thread::sleep_for(ready - now);
    }
    last_call_ = std::chrono::steady_clock::now();
    ++upstream_calls_;
}

std::vector<SearchHit> CachingEncyclopediaClient::search(const std::string& query) {
    std::lock_guard lock(mutex_);
    const auto path = cache_dir_ / "search" / (sha256_hex(query) + ".json");
    if (std::filesystem::exists(path)) {
        std::vector<SearchHit> hits;
        const json cached = json::parse(io::read_file(path));
        for (const auto& h : cached.at("hits"))
            hits.push_back({h.at("title").get<std::string>(), h.at("disambiguation").get<bool>()});
        return hits;
    }
    pace();
    auto hits = upstream_.search(query);
    json arr = json::array();
    for (const auto& h : hits) arr.push_back({{"title", h.title}, {"disambiguation", h.disambiguation}});
    io::write_file(path, io::dump({{"query", query}, {"hits", arr}}));
    return hits;
}

std::optional<std::string> CachingEncyclopediaClient::page_text(const std::string& title) {
    std::lock_guard lock(mutex_);
    const auto path = cache_dir_ / "page" / (sha256_hex(title) + ".json");
    if (std::filesystem::exists(path)) {
        const json j = json::parse(io::read_file(path));
        if (j.at("text").is_null()) return std::nullopt;
        return j.at("text").get<std::string>();
    }
    pace();
    auto page = upstream_.page_text(title);
    io::write_file(path, io::dump({{"title", title}, {"text", page ? json(*page) : json(nullptr)}}));
    return page;
}

WikiFetchResult fetch_wikipedia_corpus(const EntitySet& set, EncyclopediaClient& client, Provenance provenance) {
    WikiFetchResult out;
    provenance.source = "wikipedia";
    provenance.generation.reset();
    out.corpus.provenance = std::move(provenance);
    for (const auto& e : set.entities) {
        const auto hits = client.search(e.surface);
        if (hits.empty()) {
            out.misses.push_back({e.surface, "no-search-result"});
            continue;
        }
        auto hit = std::find_if(hits.begin(), hits.end(), [](const SearchHit& h) { return !h.disambiguation; });
        if (hit == hits.end()) {
            out.misses.push_back({e.surface, "only-disambiguation"});
            continue;
        }
        std::optional<std::string> page;
        try {
            page = client.page_text(hit->title);
        } catch (const ProtocolError& err) {
            out.misses.push_back({e.surface, std::string("malformed-page: ") + err.what()});
            continue;
        }
        if (!page) {
            out.misses.push_back({e.surface, "missing-page"});
            continue;
        }
        const std::size_t tokens = text::count_whitespace_tokens(*page);
        if (tokens == 0) {
            out.misses.push_back({e.surface, "empty-page"});
            continue;
        }
        SyntheticDoc doc;
        doc.doc_id = make_doc_id(e.surface, PromptStyle::Bare, 0, *page);
        doc.entity_surface = e.surface;
        doc.style = PromptStyle::Bare;
        doc.prompt = e.surface;
        doc.text = std::move(*page);
        doc.token_count = tokens;
        doc.backend_id = client.id() + ":" + hit->title;
        out.corpus.docs.push_back(std::move(doc));
    }
    out.corpus.stats = corpus_stats(out.corpus);
    return out;
}

void save_misses(const std::vector<WikiMiss>& misses, const std::filesystem::path& path) {
    json arr = json::array();
    for (const auto& m : misses) arr.push_back({{"entity", m.entity}, {"reason", m.reason}});
    io::write_file(path, json{{"miss_count", misses.size()}, {"misses", arr}}.dump(2) + "\n");
}

}  // namespace toptrain
