#include "toptrain/match_counter.hpp"

#include <algorithm>
#include <queue>
#include <unordered_map>

#include "toptrain/text.hpp"

namespace toptrain {

BoundaryMatchCounter::BoundaryMatchCounter(const std::vector<std::string>& patterns) {
    nodes_.emplace_back();
    lengths_.reserve(patterns.size());
    // Identical patterns share a trie node; keep the extra indices here.
    std::unordered_map<std::int32_t, std::vector<std::int32_t>> aliases;
    for (std::size_t p = 0; p < patterns.size(); ++p) {
        lengths_.push_back(patterns[p].size());
        if (patterns[p].empty()) continue;
        std::int32_t node = 0;
        for (unsigned char c : patterns[p]) {
            std::int32_t nx = child(node, c);
            if (nx < 0) {
                nx = static_cast<std::int32_t>(nodes_.size());
                auto& edges = nodes_[static_cast<std::size_t>(node)].next;
                edges.insert(std::lower_bound(edges.begin(), edges.end(), std::make_pair(c, std::int32_t{0}),
                                              [](const auto& a, const auto& b) { return a.first < b.first; }),
                             {c, nx});
                nodes_.emplace_back();
            }
            node = nx;
        }
        auto& n = nodes_[static_cast<std::size_t>(node)];
        if (n.pattern < 0) {
            n.pattern = static_cast<std::int32_t>(p);
        } else {
            aliases[n.pattern].push_back(static_cast<std::int32_t>(p));
        }
    }
    // Aliased duplicates would otherwise never be counted.
    aliases_ = std::move(aliases);

    std::queue<std::int32_t> queue;
    for (const auto& [c, nx] : nodes_[0].next) {
        nodes_[static_cast<std::size_t>(nx)].fail = 0;
        queue.push(nx);
    }
    while (!queue.empty()) {
        const std::int32_t u = queue.front();
        queue.pop();
        for (const auto& [c, v] : nodes_[static_cast<std::size_t>(u)].next) {
            std::int32_t f = nodes_[static_cast<std::size_t>(u)].fail;
            while (f > 0 && child(f, c) < 0) f = nodes_[static_cast<std::size_t>(f)].fail;
            const std::int32_t fc = child(f, c);
            auto& vn = nodes_[static_cast<std::size_t>(v)];
            vn.fail = (fc >= 0 && fc != v) ? fc : 0;
            const auto& fn = nodes_[static_cast<std::size_t>(vn.fail)];
            vn.output_link = fn.pattern >= 0 ? vn.fail : fn.output_link;
            queue.push(v);
        }
    }
}

std::int32_t BoundaryMatchCounter::child(std::int32_t node, unsigned char c) const {
    const auto& edges = nodes_[static_cast<std::size_t>(node)].next;
    auto it = std::lower_bound(edges.begin(), edges.end(), c,
                               [](const auto& e, unsigned char v) { return e.first < v; });
    return (it != edges.end() && it->first == c) ? it->second : -1;
}

std::int32_t BoundaryMatchCounter::step(std::int32_t node, unsigned char c) const {
    while (true) {
        const std::int32_t nx = child(node, c);
        if (nx >= 0) return nx;
        if (node == 0) return 0;
        node = nodes_[static_cast<std::size_t>(node)].fail;
    }
}

void BoundaryMatchCounter::report(std::string_view doc, std::size_t end, std::int32_t node,
                                  std::vector<std::int32_t>& hits) const {
    std::int32_t n = nodes_[static_cast<std::size_t>(node)].pattern >= 0 ? node
                                                                         : nodes_[static_cast<std::size_t>(node)].output_link;
    while (n > 0) {
        const auto& nd = nodes_[static_cast<std::size_t>(n)];
        const std::size_t len = lengths_[static_cast<std::size_t>(nd.pattern)];
        if (text::at_token_boundary(doc, end - len, end)) {
            hits.push_back(nd.pattern);
            if (auto it = aliases_.find(nd.pattern); it != aliases_.end())
                hits.insert(hits.end(), it->second.begin(), it->second.end());
        }
        n = nd.output_link;
    }
}

BoundaryMatchCounter::Counts BoundaryMatchCounter::count(const std::vector<std::string_view>& docs) const {
    Counts counts;
    counts.doc_frequency.assign(lengths_.size(), 0);
    counts.occurrences.assign(lengths_.size(), 0);
    std::vector<std::size_t> last_doc(lengths_.size(), static_cast<std::size_t>(-1));
    for (std::size_t d = 0; d < docs.size(); ++d) {
        scan(docs[d], [&](std::size_t p) {
            ++counts.occurrences[p];
            if (last_doc[p] != d) {
                last_doc[p] = d;
                ++counts.doc_frequency[p];
            }
        });
    }
    return counts;
}

}  // namespace toptrain
