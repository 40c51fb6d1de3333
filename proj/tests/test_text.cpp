#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "toptrain/hashing.hpp"
#include "toptrain/match_counter.hpp"
#include "toptrain/rng.hpp"
#include "toptrain/text.hpp"

using namespace toptrain;

TEST(Text, CodepointOffsets) {
    const std::string s = "Müller β-sheet";
    EXPECT_EQ(text::codepoint_length(s), 14u);
    EXPECT_EQ(text::byte_offset_of(s, 2), 3u);  // after "Mü"
    EXPECT_EQ(text::codepoint_index_of(s, 3), 2u);
    EXPECT_EQ(text::byte_offset_of(s, 14), s.size());
    EXPECT_EQ(text::byte_offset_of(s, 15), std::string::npos);
    for (std::size_t cp = 0; cp <= 14; ++cp) EXPECT_EQ(text::codepoint_index_of(s, text::byte_offset_of(s, cp)), cp);
}

TEST(Text, Utf8Validity) {
    EXPECT_TRUE(text::is_valid_utf8("Å résumé 中文"));
    EXPECT_FALSE(text::is_valid_utf8(std::string("\xC3\x28", 2)));
    EXPECT_FALSE(text::is_valid_utf8(std::string("\xED\xA0\x80", 3)));  // surrogate
}

TEST(Text, NfcComposes) {
    EXPECT_EQ(text::nfc("e\xCC\x81"), "\xC3\xA9");
    EXPECT_EQ(text::nfc("plain"), "plain");
}

TEST(Text, WhitespaceTokensUseUnicodeSpaces) {
    // NBSP and ideographic space both separate tokens.
    const std::string s = "  a\xC2\xA0" "bb\xE3\x80\x80" "ccc\n";
    const auto spans = text::whitespace_token_spans(s);
    ASSERT_EQ(spans.size(), 3u);
    EXPECT_EQ(s.substr(spans[0].begin, spans[0].size()), "a");
    EXPECT_EQ(s.substr(spans[1].begin, spans[1].size()), "bb");
    EXPECT_EQ(s.substr(spans[2].begin, spans[2].size()), "ccc");
    EXPECT_EQ(text::count_whitespace_tokens(s), 3u);
    EXPECT_EQ(text::count_whitespace_tokens(""), 0u);
    EXPECT_EQ(text::trim("  x y \t"), "x y");
}

TEST(Text, CaseMapping) {
    EXPECT_EQ(text::to_lower("ÄRZTE Straße"), "ärzte straße");
    EXPECT_EQ(text::fold_case("Straße"), text::fold_case("STRASSE"));
}

TEST(Text, TokenBoundary) {
    const std::string s = "influenza flu-like MTCT";
    EXPECT_FALSE(text::at_token_boundary(s, 6, 9));   // "nza" inside influenza
    EXPECT_TRUE(text::at_token_boundary(s, 10, 13));  // "flu" before '-'
    EXPECT_FALSE(text::at_token_boundary(s, 19, 22));  // "MTC" inside MTCT
    EXPECT_TRUE(text::at_token_boundary(s, 19, 23));
    const std::string greek = "αβγ";
    EXPECT_FALSE(text::at_token_boundary(greek, 2, 4));
}

TEST(Hashing, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, Fnv1aKnownVector) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, ShuffleIsSeededPermutation) {
    std::vector<int> a(50), b(50), c(50);
    std::iota(a.begin(), a.end(), 0);
    b = a;
    c = a;
    seeded_shuffle(std::span<int>(a), 7);
    seeded_shuffle(std::span<int>(b), 7);
    seeded_shuffle(std::span<int>(c), 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    std::sort(c.begin(), c.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(c[static_cast<std::size_t>(i)], i);
}

TEST(MatchCounter, CountsBoundaryMatchesOnly) {
    const BoundaryMatchCounter counter({"MTC", "MTCT", "rate", "MTCT rate", "rate"});
    const std::vector<std::string_view> docs = {"MTCT rate and MTCT", "the MTC rate rate", "accurate"};
    const auto counts = counter.count(docs);
    EXPECT_EQ(counts.doc_frequency[0], 1u);  // MTC only standalone in doc 2
    EXPECT_EQ(counts.occurrences[0], 1u);
    EXPECT_EQ(counts.doc_frequency[1], 1u);
    EXPECT_EQ(counts.occurrences[1], 2u);
    EXPECT_EQ(counts.doc_frequency[2], 2u);  // "accurate" does not count
    EXPECT_EQ(counts.occurrences[2], 3u);
    EXPECT_EQ(counts.occurrences[3], 1u);
    EXPECT_EQ(counts.occurrences[4], counts.occurrences[2]);  // duplicate pattern
}
