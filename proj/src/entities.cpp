#include "toptrain/entities.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <unordered_set>

#include "toptrain/error.hpp"
#include "toptrain/io.hpp"
#include "toptrain/match_counter.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

std::vector<std::string> EntitySet::surfaces() const {
    std::vector<std::string> out;
    out.reserve(entities.size());
    for (const auto& e : entities) out.push_back(e.surface);
    return out;
}

std::vector<SourceDocument> collect_source_text(const EqaDataset& dataset, const std::string& split) {
    const auto ids = dataset.split_ids(split);
    const std::unordered_set<std::string> wanted(ids.begin(), ids.end());

    std::map<std::string, const std::string*> contexts;
    std::map<std::string, const std::string*> questions;
    for (const auto& r : dataset.records) {
        if (!wanted.count(r.question_id)) continue;
        contexts.emplace(r.context_id, &r.context);
        questions.emplace(r.question_id, &r.question);
    }
    std::vector<SourceDocument> docs;
    docs.reserve(contexts.size() + questions.size());
    for (const auto& [cid, ctx] : contexts) docs.push_back({"ctx:" + cid, *ctx, DocKind::Context});
    for (const auto& [qid, q] : questions) docs.push_back({"q:" + qid, *q, DocKind::Question});
    return docs;
}

void sort_canonical(std::vector<Entity>& entities) {
    std::sort(entities.begin(), entities.end(), [](const Entity& a, const Entity& b) {
        if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
        return a.surface < b.surface;
    });
}

std::vector<Entity> count_entities(const std::vector<std::string>& surfaces, const std::vector<SourceDocument>& docs) {
    const BoundaryMatchCounter counter(surfaces);
    std::vector<std::string_view> views;
    views.reserve(docs.size());
    for (const auto& d : docs) views.emplace_back(d.text);
    const auto counts = counter.count(views);
    std::vector<Entity> out;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        if (counts.doc_frequency[i] == 0) continue;
        out.push_back({surfaces[i], counts.doc_frequency[i], counts.occurrences[i]});
    }
    sort_canonical(out);
    return out;
}

namespace {

// Byte offset of every code point boundary, so spans convert in O(1).
std::vector<std::size_t> codepoint_offsets(const std::string& s) {
    std::vector<std::size_t> offsets;
    offsets.reserve(s.size() + 1);
    std::size_t pos = 0;
    while (pos < s.size()) {
        offsets.push_back(pos);
        text::decode_next(s, pos);
    }
    offsets.push_back(s.size());
    return offsets;
}

}  // namespace

EntitySet extract_entities(const std::vector<SourceDocument>& docs, NerBackend& backend, const ExtractOptions& options) {
    std::vector<std::vector<MentionSpan>> mentions(docs.size());
    std::vector<std::exception_ptr> errors(docs.size());

    auto work = [&](std::size_t i) {
        try {
            mentions[i] = backend.recognize(docs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = backend.concurrent() ? std::max<std::size_t>(1, options.max_in_flight) : 1;
    if (workers == 1 || docs.size() < 2) {
        for (std::size_t i = 0; i < docs.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, docs.size()); ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < docs.size(); i = next++) work(i);
            });
    }

    std::vector<std::string> surfaces;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const TransportError& e) {
                if (!e.doc_id().empty()) throw;
                throw TransportError(e.what(), docs[i].doc_id);
            } catch (const Error&) {
                throw;
            } catch (const std::exception& e) {
                throw TransportError(e.what(), docs[i].doc_id);
            }
        }
        const auto offsets = codepoint_offsets(docs[i].text);
        const std::size_t cp_len = offsets.size() - 1;
        for (const auto& m : mentions[i]) {
            if (m.start >= m.end || m.end > cp_len)
                throw ProtocolError("mention [" + std::to_string(m.start) + ", " + std::to_string(m.end) +
                                    ") outside document " + docs[i].doc_id + " of length " + std::to_string(cp_len));
            std::string surface = text::trim(
                std::string_view(docs[i].text).substr(offsets[m.start], offsets[m.end] - offsets[m.start]));
            if (surface.empty()) continue;
            if (seen.insert(surface).second) surfaces.push_back(std::move(surface));
        }
    }

    EntitySet set;
    set.extractor_id = backend.id();
    set.entities = count_entities(surfaces, docs);
    return set;
}

// ---------------------------------------------------------------------------
// fallback-v1

namespace {

constexpr std::string_view kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
    "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
    "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "itself", "just", "may", "me", "might", "more", "most", "must", "my",
    "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
    "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
    "why", "will", "with", "would", "you", "your", "also",
};

bool is_stopword(std::string_view token) {
    const std::string lower = text::to_lower(token);
    return std::ranges::find(kStopwords, lower) != std::end(kStopwords);
}

struct Token {
    std::size_t begin = 0;  // bytes
    std::size_t end = 0;
    bool phrase_break_before = false;
    bool plain_capitalized = false;  // "Word": only the first letter upper-case
    bool salient = false;
    bool lowercase_word = false;   // only lower-case letters, no hyphen
    bool modifier = false;         // hyphenated, last part lower-case letters
};

Token classify(const std::string& s, std::size_t begin, std::size_t end) {
    Token t;
    t.begin = begin;
    t.end = end;
    bool first = true;
    bool first_upper = false;
    bool upper_after_first = false;
    bool has_digit = false;
    bool has_letter = false;
    bool has_hyphen = false;
    bool all_lower = true;
    bool last_part_lower = true;
    bool last_part_nonempty = false;
    for (std::size_t p = begin; p < end;) {
        const auto c = static_cast<UChar32>(text::decode_next(s, p));
        if (c == '-') {
            has_hyphen = true;
            all_lower = false;
            last_part_lower = true;
            last_part_nonempty = false;
            first = false;
            continue;
        }
        const bool upper = u_isupper(c) || u_istitle(c);
        if (u_isalpha(c)) has_letter = true;
        if (u_isdigit(c)) has_digit = true;
        if (first) first_upper = upper;
        else if (upper) upper_after_first = true;
        if (!u_islower(c)) {
            all_lower = false;
            last_part_lower = false;
        }
        last_part_nonempty = true;
        first = false;
    }
    t.lowercase_word = all_lower;
    t.modifier = has_hyphen && last_part_lower && last_part_nonempty;
    t.salient = upper_after_first || (has_digit && has_letter) || has_hyphen || first_upper;
    t.plain_capitalized = first_upper && !upper_after_first && !has_digit && !has_hyphen;
    return t;
}

bool is_hyphen(char32_t c) { return c == U'-'; }

}  // namespace

std::vector<MentionSpan> fallback_mentions(const std::string& s) {
    // Tokenize.
    std::vector<Token> tokens;
    bool phrase_break = true;
    bool sentence_start = true;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t here = pos;
        const char32_t c = text::decode_next(s, pos);
        if (!text::is_word_char(c)) {
            if (!text::is_unicode_space(c)) phrase_break = true;
            if (c == U'.' || c == U'!' || c == U'?' || c == U':' || c == U';') sentence_start = true;
            continue;
        }
        std::size_t end = pos;
        while (end < s.size()) {
            std::size_t probe = end;
            const char32_t d = text::decode_next(s, probe);
            if (text::is_word_char(d)) {
                end = probe;
                continue;
            }
            if (is_hyphen(d) && probe < s.size()) {
                std::size_t after = probe;
                if (text::is_word_char(text::decode_next(s, after))) {
                    end = probe;
                    continue;
                }
            }
            break;
        }
        Token t = classify(s, here, end);
        if (t.plain_capitalized && sentence_start) t.salient = false;
        t.phrase_break_before = phrase_break;
        tokens.push_back(t);
        phrase_break = false;
        sentence_start = false;
        pos = end;
    }

    std::vector<MentionSpan> out;
    std::vector<const Token*> run;
    bool has_head = false;
    auto close = [&] {
        if (!run.empty()) {
            const std::size_t b = run.front()->begin;
            const std::size_t e = run.back()->end;
            if (text::codepoint_length(std::string_view(s).substr(b, e - b)) >= 2)
                out.push_back({text::codepoint_index_of(s, b), text::codepoint_index_of(s, e)});
        }
        run.clear();
        has_head = false;
    };
    for (const auto& t : tokens) {
        if (t.phrase_break_before) close();
        const std::string_view word = std::string_view(s).substr(t.begin, t.end - t.begin);
        if (is_stopword(word)) {
            close();
            continue;
        }
        if (t.salient && !has_head) {
            run.push_back(&t);
        } else if (!run.empty() && !has_head && t.lowercase_word && run.back()->modifier) {
            run.push_back(&t);
            has_head = true;
            close();
        } else {
            close();
            if (t.salient) run.push_back(&t);
        }
    }
    close();
    return out;
}

std::vector<std::string> fallback_extract(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& m : fallback_mentions(s)) {
        const std::size_t b = text::byte_offset_of(s, m.start);
        const std::size_t e = text::byte_offset_of(s, m.end);
        out.push_back(s.substr(b, e - b));
    }
    return out;
}

void save_entity_set(const EntitySet& set, const std::filesystem::path& path) {
    std::string out = io::dump({{"entity_set",
                                 {{"source_dataset", set.source_dataset},
                                  {"source_split", set.source_split},
                                  {"extractor_id", set.extractor_id},
                                  {"count", set.entities.size()}}}});
    out += '\n';
    for (const auto& e : set.entities) {
        out += io::dump({{"surface", e.surface}, {"doc_frequency", e.doc_frequency}, {"occurrences", e.occurrences}});
        out += '\n';
    }
    io::write_file(path, out);
}

EntitySet load_entity_set(const std::filesystem::path& path) {
    EntitySet set;
    set.extractor_id = "unknown";
    io::for_each_json_line(path, [&](std::size_t line, const json& j) {
        if (j.contains("entity_set")) {
            const auto& h = j.at("entity_set");
            set.source_dataset = h.value("source_dataset", "");
            set.source_split = h.value("source_split", "");
            set.extractor_id = h.value("extractor_id", "unknown");
            return;
        }
        try {
            Entity e{j.at("surface").get<std::string>(), j.at("doc_frequency").get<std::uint64_t>(),
                     j.at("occurrences").get<std::uint64_t>()};
            if (e.surface.empty() || e.doc_frequency < 1 || e.occurrences < e.doc_frequency)
                throw ValidationError("entity invariant violated for \"" + e.surface + "\"");
            set.entities.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return set;
}

}  // namespace toptrain
