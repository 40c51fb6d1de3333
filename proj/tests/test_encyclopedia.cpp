#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "mock_server.hpp"
#include "test_util.hpp"
#include "toptrain/encyclopedia.hpp"
#include "toptrain/io.hpp"
#include "toptrain/error.hpp"

using namespace toptrain;
using nlohmann::json;

namespace {

// A tiny MediaWiki: search results and extracts keyed by exact query/title.
struct FakeWiki {
    std::map<std::string, json> search;  // query -> pages array
    std::map<std::string, json> pages;   // title -> page object
    std::atomic<int> requests{0};
    testutil::MockServer srv;

    void start() {
        srv.server.Get("/w/api.php", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            json body;
            if (req.get_param_value("generator") == "search") {
                auto it = search.find(req.get_param_value("gsrsearch"));
                body = it == search.end() ? json{{"batchcomplete", true}} : json{{"query", {{"pages", it->second}}}};
            } else {
                const auto title = req.get_param_value("titles");
                auto it = pages.find(title);
                if (title == "Broken") {
                    res.set_content("<html>oops</html>", "text/html");
                    return;
                }
                body = {{"query", {{"pages", json::array({it == pages.end() ? json{{"title", title}, {"missing", true}} : it->second})}}}};
            }
            res.set_content(body.dump(), "application/json");
        });
        srv.start();
    }
};

EntitySet set_of(const std::vector<std::string>& surfaces) {
    EntitySet s;
    s.source_dataset = "mini";
    for (const auto& x : surfaces) s.entities.push_back({x, 1, 1});
    return s;
}

void populate(FakeWiki& w) {
    w.search["Remdesivir"] = json::array({{{"title", "Remdesivir"}, {"index", 1}}, {{"title", "Antiviral drug"}, {"index", 2}}});
    w.pages["Remdesivir"] = {{"title", "Remdesivir"}, {"extract", "Remdesivir is a broad-spectrum antiviral medication."}};
    // Returned out of rank order: index decides.
    w.search["Mercury"] = json::array({{{"title", "Mercury (planet)"}, {"index", 2}},
                                       {{"title", "Mercury"}, {"index", 1}, {"pageprops", {{"disambiguation", ""}}}}});
    w.pages["Mercury (planet)"] = {{"title", "Mercury (planet)"}, {"extract", "Mercury is the smallest planet."}};
    w.search["Apple"] = json::array({{{"title", "Apple"}, {"index", 1}, {"pageprops", {{"disambiguation", ""}}}}});
    w.search["Ghost"] = json::array({{{"title", "Ghost page"}, {"index", 1}}});
    w.search["Blank"] = json::array({{{"title", "Blank"}, {"index", 1}}});
    w.pages["Blank"] = {{"title", "Blank"}, {"extract", "  \n"}};
    w.search["Broken"] = json::array({{{"title", "Broken"}, {"index", 1}}});
}

}  // namespace

TEST(MediaWiki, SearchRanksAndFlagsDisambiguation) {
    FakeWiki w;
    populate(w);
    w.start();
    MediaWikiClient c(w.srv.url());
    const auto hits = c.search("Mercury");
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].title, "Mercury");
    EXPECT_TRUE(hits[0].disambiguation);
    EXPECT_EQ(hits[1].title, "Mercury (planet)");
    EXPECT_FALSE(hits[1].disambiguation);
    EXPECT_TRUE(c.search("pulmonary parenchymal infiltrate").empty());
    EXPECT_EQ(c.page_text("Remdesivir"), "Remdesivir is a broad-spectrum antiviral medication.");
    EXPECT_EQ(c.page_text("Nope"), std::nullopt);
    EXPECT_THROW(c.page_text("Broken"), ProtocolError);
}

TEST(MediaWiki, UnreachableIsTransportError) {
    MediaWikiClient c(testutil::dead_url());
    EXPECT_THROW(c.search("x"), TransportError);
}

TEST(WikiCorpus, HitsAndMissesAccountForInput) {
    FakeWiki w;
    populate(w);
    w.start();
    MediaWikiClient c(w.srv.url());
    const std::vector<std::string> input = {"Remdesivir", "pulmonary parenchymal infiltrate", "Mercury", "Apple",
                                            "Ghost",      "Blank",                            "Broken"};
    Provenance prov;
    prov.dataset = "mini";
    const auto out = fetch_wikipedia_corpus(set_of(input), c, prov);
    ASSERT_EQ(out.corpus.docs.size(), 2u);
    EXPECT_EQ(out.corpus.docs[0].text, "Remdesivir is a broad-spectrum antiviral medication.");
    EXPECT_EQ(out.corpus.docs[0].backend_id, "wikipedia:Remdesivir");
    EXPECT_EQ(out.corpus.docs[1].backend_id, "wikipedia:Mercury (planet)");
    EXPECT_EQ(out.corpus.provenance.source, "wikipedia");
    EXPECT_EQ(out.corpus.stats, corpus_stats(out.corpus));

    std::map<std::string, std::string> reason;
    for (const auto& m : out.misses) reason[m.entity] = m.reason;
    EXPECT_EQ(reason.at("pulmonary parenchymal infiltrate"), "no-search-result");
    EXPECT_EQ(reason.at("Apple"), "only-disambiguation");
    EXPECT_EQ(reason.at("Ghost"), "missing-page");
    EXPECT_EQ(reason.at("Blank"), "empty-page");
    EXPECT_EQ(reason.at("Broken").rfind("malformed-page: ", 0), 0u);

    std::set<std::string> covered;
    for (const auto& d : out.corpus.docs) covered.insert(d.entity_surface);
    for (const auto& m : out.misses) EXPECT_TRUE(covered.insert(m.entity).second);
    EXPECT_EQ(covered, std::set<std::string>(input.begin(), input.end()));
}

TEST(WikiCorpus, CacheMakesRerunOffline) {
    testutil::TempDir cache;
    WikiFetchResult first;
    {
        FakeWiki w;
        populate(w);
        w.start();
        MediaWikiClient upstream(w.srv.url());
        CachingEncyclopediaClient cached(upstream, cache.path(), std::chrono::milliseconds(1));
        first = fetch_wikipedia_corpus(set_of({"Remdesivir", "Ghost", "pulmonary parenchymal infiltrate"}), cached);
        EXPECT_EQ(cached.upstream_calls(), 5u);  // 3 searches + 2 page reads
        EXPECT_EQ(w.requests.load(), 5);
    }
    // Server gone: every answer must come from disk.
    MediaWikiClient offline(testutil::dead_url());
    CachingEncyclopediaClient cached(offline, cache.path(), std::chrono::milliseconds(1));
    const auto second = fetch_wikipedia_corpus(set_of({"Remdesivir", "Ghost", "pulmonary parenchymal infiltrate"}), cached);
    EXPECT_EQ(cached.upstream_calls(), 0u);
    EXPECT_EQ(second.corpus, first.corpus);
    ASSERT_EQ(second.misses.size(), first.misses.size());
    for (std::size_t i = 0; i < first.misses.size(); ++i) EXPECT_EQ(second.misses[i].reason, first.misses[i].reason);
    // A new entity needs the network, which is down.
    EXPECT_THROW(fetch_wikipedia_corpus(set_of({"Mercury"}), cached), TransportError);
}

TEST(WikiCorpus, PolitenessDelaySpacesUpstreamCalls) {
    FakeWiki w;
    populate(w);
    w.start();
    testutil::TempDir cache;
    MediaWikiClient upstream(w.srv.url());
    CachingEncyclopediaClient cached(upstream, cache.path(), std::chrono::milliseconds(60));
    const auto t0 = std::chrono::steady_clock::now();
    fetch_wikipedia_corpus(set_of({"Remdesivir", "Mercury"}), cached);  // 4 upstream calls
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    EXPECT_GE(elapsed, std::chrono::milliseconds(180));
}
