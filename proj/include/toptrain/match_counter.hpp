#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace toptrain {

// Multi-pattern counter over UTF-8 text (Aho-Corasick on bytes). Counts only
// matches that sit on token boundaries, see text::at_token_boundary.
class BoundaryMatchCounter {
public:
    explicit BoundaryMatchCounter(const std::vector<std::string>& patterns);

    struct Counts {
        std::vector<std::uint64_t> doc_frequency;  // documents with >= 1 match
        std::vector<std::uint64_t> occurrences;    // total matches
    };

    // Per-pattern counts over `docs`, indexed like the constructor's patterns.
    Counts count(const std::vector<std::string_view>& docs) const;

    // Calls `hit(pattern_index)` once per boundary match in `doc`.
    template <typename F>
    void scan(std::string_view doc, F&& hit) const;

    std::size_t pattern_count() const { return lengths_.size(); }

private:
    struct Node {
        std::vector<std::pair<unsigned char, std::int32_t>> next;  // sorted by byte
        std::int32_t fail = 0;
        std::int32_t output_link = -1;  // nearest suffix node that ends a pattern
        std::int32_t pattern = -1;
    };

    std::int32_t child(std::int32_t node, unsigned char c) const;
    std::int32_t step(std::int32_t node, unsigned char c) const;
    void report(std::string_view doc, std::size_t end, std::int32_t node, std::vector<std::int32_t>& hits) const;

    std::vector<Node> nodes_;
    std::vector<std::size_t> lengths_;
    std::unordered_map<std::int32_t, std::vector<std::int32_t>> aliases_;
};

template <typename F>
void BoundaryMatchCounter::scan(std::string_view doc, F&& hit) const {
    std::vector<std::int32_t> hits;
    std::int32_t state = 0;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        state = step(state, static_cast<unsigned char>(doc[i]));
        hits.clear();
        report(doc, i + 1, state, hits);
        for (auto p : hits) hit(static_cast<std::size_t>(p));
    }
}

}  // namespace toptrain
