#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "toptrain/promptgen.hpp"

namespace toptrain {

struct SearchHit {
    std::string title;
    bool disambiguation = false;
};

class EncyclopediaClient {
public:
    virtual ~EncyclopediaClient() = default;
    virtual std::string id() const = 0;
    // Ranked search results. Throws TransportError on network failure.
    virtual std::vector<SearchHit> search(const std::string& query) = 0;
    // Plain-text page body, nullopt if the page does not exist.
    // Throws ProtocolError for a response that cannot be interpreted.
    virtual std::optional<std::string> page_text(const std::string& title) = 0;
};

// MediaWiki action API (search with disambiguation flags, TextExtracts for
// plain text).
class MediaWikiClient final : public EncyclopediaClient {
public:
    explicit MediaWikiClient(std::string base_url = "https://en.wikipedia.org", std::string api_path = "/w/api.php");
    std::string id() const override { return "wikipedia"; }
    std::vector<SearchHit> search(const std::string& query) override;
    std::optional<std::string> page_text(const std::string& title) override;

private:
    std::string get(const std::vector<std::pair<std::string, std::string>>& params);
    std::string base_url_;
    std::string api_path_;
};

// Disk cache in front of another client. Cached answers never touch the
// upstream, so a rerun over the same entities works offline. Upstream calls
// are serialized with `politeness_delay` between them.
class CachingEncyclopediaClient final : public EncyclopediaClient {
public:
    CachingEncyclopediaClient(EncyclopediaClient& upstream, std::filesystem::path cache_dir,
                              std::chrono::milliseconds politeness_delay = std::chrono::milliseconds(200));
    std::string id() const override { return upstream_.id(); }
    std::vector<SearchHit> search(const std::string& query) override;
    std::optional<std::string> page_text(const std::string& title) override;

    std::size_t upstream_calls() const { return upstream_calls_; }

private:
    void pace();
    EncyclopediaClient& upstream_;
    std::filesystem::path cache_dir_;
    std::chrono::milliseconds delay_;
    std::mutex mutex_;
    std::optional<std::chrono::steady_clock::time_point> last_call_;
    std::size_t upstream_calls_ = 0;
};

struct WikiMiss {
    std::string entity;
    std::string reason;  // no-search-result | only-disambiguation | missing-page | empty-page | malformed-page: ...
};

struct WikiFetchResult {
    Corpus corpus;
    std::vector<WikiMiss> misses;
};

// For each entity: search, take the first non-disambiguation hit, store its
// full plain text as one doc. Entities without a usable page become misses.
WikiFetchResult fetch_wikipedia_corpus(const EntitySet& set, EncyclopediaClient& client, Provenance provenance = {});

void save_misses(const std::vector<WikiMiss>& misses, const std::filesystem::path& path);

}  // namespace toptrain
