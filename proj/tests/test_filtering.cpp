#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "toptrain/error.hpp"
#include "toptrain/filtering.hpp"
#include "toptrain/text.hpp"

using namespace toptrain;

namespace {

EntitySet set_of(const std::vector<std::string>& surfaces) {
    EntitySet s;
    s.source_dataset = "t";
    for (const auto& x : surfaces) s.entities.push_back({x, 1, 1});
    return s;
}

std::vector<SourceDocument> docs_of(const std::vector<std::string>& texts) {
    std::vector<SourceDocument> out;
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({"d" + std::to_string(i), texts[i], DocKind::Context});
    return out;
}

}  // namespace

TEST(SurfaceFilters, DefaultRulesOnMixedSet) {
    const auto [kept, report] = apply_surface_filters(set_of({"Bao &", "MTCT", "https://x.y"}), FilterConfig::defaults());
    EXPECT_EQ(kept.surfaces(), std::vector<std::string>{"MTCT"});
    EXPECT_EQ(report.input_count, 3u);
    EXPECT_EQ(report.kept_count, 1u);
    EXPECT_EQ(report.removed.at("regex:0"), std::vector<std::string>{"Bao &"});
    EXPECT_EQ(report.removed.at("pattern:prefix:http"), std::vector<std::string>{"https://x.y"});
}

TEST(SurfaceFilters, EmptySet) {
    const auto [kept, report] = apply_surface_filters(set_of({}), FilterConfig::defaults());
    EXPECT_TRUE(kept.entities.empty());
    EXPECT_EQ(report.input_count, 0u);
    EXPECT_EQ(report.kept_count, 0u);
    EXPECT_TRUE(report.removed.empty());
}

TEST(SurfaceFilters, LengthFloor) {
    FilterConfig cfg;
    cfg.min_chars = 3;
    const auto [kept, report] = apply_surface_filters(set_of({"ab", "RNA", "βγ"}), cfg);
    EXPECT_EQ(kept.surfaces(), std::vector<std::string>{"RNA"});
    EXPECT_EQ(report.removed.at("min_chars"), (std::vector<std::string>{"ab", "βγ"}));
}

TEST(SurfaceFilters, BlocklistTermsAndCase) {
    const auto [kept, report] =
        apply_surface_filters(set_of({"Baby formula", "babysitter", "WWW.site", "HTTP server", "babies"}), FilterConfig::defaults());
    EXPECT_EQ(kept.surfaces(), (std::vector<std::string>{"babysitter", "babies"}));
    EXPECT_EQ(report.removed.at("pattern:term:baby"), std::vector<std::string>{"Baby formula"});
    EXPECT_EQ(report.removed.at("pattern:prefix:www"), std::vector<std::string>{"WWW.site"});
}

TEST(SurfaceFilters, KeepsAllowedPunctuation) {
    const auto [kept, report] =
        apply_surface_filters(set_of({"C-terminal domain", "Crohn's disease", "N/A value", "2.0 Å", "a*b", "Why!"}),
                              FilterConfig::defaults());
    EXPECT_EQ(kept.surfaces(), (std::vector<std::string>{"C-terminal domain", "Crohn's disease", "N/A value", "2.0 Å"}));
    EXPECT_EQ(report.removed.at("regex:0"), (std::vector<std::string>{"a*b", "Why!"}));
}

TEST(SurfaceFilters, AccountingIdempotenceOrder) {
    const std::vector<std::string> input = {"wwwx", "x", "Bao &", "babyish", "Zika virus", "https", "ok", "term baby", "ACE2"};
    const auto cfg = FilterConfig::defaults();
    const auto [kept, report] = apply_surface_filters(set_of(input), cfg);
    std::size_t removed = 0;
    for (const auto& [rule, list] : report.removed) removed += list.size();
    EXPECT_EQ(report.input_count, report.kept_count + removed);
    const auto [again, report2] = apply_surface_filters(kept, cfg);
    EXPECT_EQ(again, kept);
    EXPECT_TRUE(report2.removed.empty());
    // Order preserved and a subset.
    std::size_t pos = 0;
    for (const auto& s : kept.surfaces()) {
        while (pos < input.size() && input[pos] != s) ++pos;
        EXPECT_LT(pos, input.size()) << s;
    }
}

TEST(SurfaceFilters, RulesAreIndependentPredicates) {
    // Applying each rule alone, in any order, reaches the same final set.
    const auto cfg = FilterConfig::defaults();
    const SurfaceFilter filter(cfg);
    const std::vector<std::string> input = {"wwwx", "x", "Bao &", "babyish", "baby", "Zika virus", "http://", "ACE2", "R&D"};
    auto ids = filter.rule_ids();
    std::sort(ids.begin(), ids.end());
    std::set<std::vector<std::string>> outcomes;
    do {
        std::vector<std::string> cur = input;
        for (const auto& id : ids) std::erase_if(cur, [&](const std::string& s) { return filter.rejects(id, s); });
        outcomes.insert(cur);
    } while (std::next_permutation(ids.begin(), ids.end()));
    ASSERT_EQ(outcomes.size(), 1u);
    EXPECT_EQ(*outcomes.begin(), apply_surface_filters(set_of(input), cfg).first.surfaces());
}

TEST(FilterConfig, Validation) {
    FilterConfig bad_regex = FilterConfig::defaults();
    bad_regex.regex_rules.push_back("([unclosed");
    try {
        bad_regex.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "regex_rules[1]");
    }
    FilterConfig zero;
    zero.min_chars = 0;
    EXPECT_THROW(zero.validate(), ConfigError);
    FilterConfig k0;
    k0.idf_top_k = 0;
    EXPECT_THROW(k0.validate(), ConfigError);
    EXPECT_THROW(BlockPattern::parse("http"), ConfigError);
    EXPECT_THROW(BlockPattern::parse("suffix:x"), ConfigError);
    EXPECT_THROW(BlockPattern::parse("term:"), ConfigError);
}

TEST(FilterConfig, JsonRoundTripAndHash) {
    auto cfg = FilterConfig::defaults();
    cfg.idf_top_k = 25000;
    EXPECT_EQ(FilterConfig::from_json(cfg.to_json()), cfg);
    auto other = cfg;
    other.min_chars = 4;
    EXPECT_NE(cfg.hash(), other.hash());
    EXPECT_EQ(cfg.hash(), FilterConfig::from_json(cfg.to_json()).hash());
}

TEST(Idf, HandComputedExample) {
    // N=4, df(e1)=1, df(e2)=2: ln 4 > ln 2.
    const auto docs = docs_of({"e1 alpha", "e2 beta", "e2 gamma", "delta"});
    const auto top = idf_rank(set_of({"e2", "e1"}), docs, 1);
    EXPECT_EQ(top.surfaces(), std::vector<std::string>{"e1"});
    EXPECT_NEAR(std::log(4.0 / 1.0), 1.386, 1e-3);
    EXPECT_NEAR(std::log(4.0 / 2.0), 0.693, 1e-3);
}

TEST(Idf, EverywhereRanksLast) {
    const auto docs = docs_of({"common a", "common b", "common c rare"});
    const auto ranked = idf_rank(set_of({"common", "rare"}), docs, 5);
    EXPECT_EQ(ranked.surfaces(), (std::vector<std::string>{"rare", "common"}));
}

TEST(Idf, TiesBreakOnSurface) {
    const auto docs = docs_of({"zeta beta", "alpha"});
    EXPECT_EQ(idf_rank(set_of({"zeta", "beta", "alpha"}), docs, 3).surfaces(),
              (std::vector<std::string>{"alpha", "beta", "zeta"}));
}

TEST(Idf, Errors) {
    EXPECT_THROW(idf_rank(set_of({"a"}), {}, 1), ArgumentError);
    EXPECT_THROW(idf_rank(set_of({"abc"}), docs_of({"abc"}), 0), ArgumentError);
    EXPECT_THROW(idf_rank(set_of({"missing"}), docs_of({"abc"}), 1), ArgumentError);
}

TEST(Idf, MatchesOracleOnRandomInstances) {
    std::mt19937_64 rng(99);
    const std::vector<std::string> alphabet = {"a", "b", "ab", "ba", "é", "-", " ", " ", " "};
    for (int round = 0; round < 30; ++round) {
        std::vector<std::string> texts;
        const std::size_t n_docs = 1 + rng() % 20;
        for (std::size_t d = 0; d < n_docs; ++d) {
            std::string t;
            for (std::size_t i = 0, n = rng() % 40; i < n; ++i) t += alphabet[rng() % alphabet.size()];
            texts.push_back(t);
        }
        std::set<std::string> pool;
        for (int tries = 0; tries < 200 && pool.size() < 30; ++tries) {
            const auto& t = texts[rng() % texts.size()];
            if (t.empty()) continue;
            const std::size_t b = rng() % t.size(), len = 1 + rng() % 5;
            std::string cand = t.substr(b, len);
            if (!text::is_valid_utf8(cand) || text::trim(cand) != cand || cand.empty()) continue;
            if (oracle::doc_frequency(cand, texts) == 0) continue;
            pool.insert(cand);
        }
        if (pool.empty()) continue;
        const std::vector<std::string> surfaces(pool.begin(), pool.end());
        const std::size_t k = 1 + rng() % (surfaces.size() + 2);
        EXPECT_EQ(idf_rank(set_of(surfaces), docs_of(texts), k).surfaces(), oracle::idf_top_k(surfaces, texts, k))
            << "round " << round;
        EXPECT_EQ(idf_rank(set_of(surfaces), docs_of(texts), k).entities.size(), std::min(k, surfaces.size()));
    }
}
