#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "toptrain/dataset.hpp"

namespace toptrain {

enum class DocKind { Question, Context };

struct SourceDocument {
    std::string doc_id;
    std::string text;
    DocKind kind = DocKind::Context;
    bool operator==(const SourceDocument&) const = default;
};

struct Entity {
    std::string surface;
    std::uint64_t doc_frequency = 0;
    std::uint64_t occurrences = 0;
    bool operator==(const Entity&) const = default;
};

struct EntitySet {
    std::vector<Entity> entities;
    std::string source_dataset;
    std::string source_split;
    std::string extractor_id;
    bool operator==(const EntitySet&) const = default;

    std::vector<std::string> surfaces() const;
};

// One document per distinct context (ordered by context_id) followed by one
// per question (ordered by question_id). Context docs are "ctx:<context_id>",
// question docs "q:<question_id>".
std::vector<SourceDocument> collect_source_text(const EqaDataset& dataset, const std::string& split);

// A mention as returned on the wire: code-point offsets, end exclusive.
struct MentionSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const MentionSpan&) const = default;
};

// Entity-recognition backend. Implementations: FallbackNerBackend,
// SubprocessNerBackend, HttpNerBackend (ner_backends.hpp).
class NerBackend {
public:
    virtual ~NerBackend() = default;
    virtual std::string id() const = 0;
    // Safe to call recognize() from several threads at once.
    virtual bool concurrent() const { return false; }
    // Throws TransportError when the backend cannot be reached.
    virtual std::vector<MentionSpan> recognize(const SourceDocument& doc) = 0;
};

struct ExtractOptions {
    std::size_t max_in_flight = 4;
};

// Runs the backend over `docs`, slices surfaces from the returned spans,
// deduplicates them (exact, case-sensitive, whitespace-trimmed) and counts
// token-boundary document frequency and occurrences over `docs`. Mentions that
// never occur on a token boundary are dropped. Output is sorted by descending
// occurrences, then surface.
EntitySet extract_entities(const std::vector<SourceDocument>& docs, NerBackend& backend,
                           const ExtractOptions& options = {});

// Recounts doc_frequency/occurrences of `surfaces` over `docs` and returns
// them in canonical order. Surfaces with no boundary match are dropped.
std::vector<Entity> count_entities(const std::vector<std::string>& surfaces,
                                   const std::vector<SourceDocument>& docs);

void sort_canonical(std::vector<Entity>& entities);

// Rule-based extractor used when no model backend is available. Rules
// ("fallback-v1"):
//  * tokens are maximal runs of letters/digits joined by internal hyphens;
//    any other character separates tokens, and punctuation ends a phrase;
//  * a token is salient when it has a capital letter after its first
//    character, a digit together with a letter, or a hyphen, or when it is
//    capitalized and not the first word of a sentence;
//  * consecutive salient tokens form one mention;
//  * a mention ending in a hyphenated modifier with a lower-case last part
//    ("C-terminal", "small-bowel") takes the following lower-case
//    non-stopword as its head noun;
//  * stopwords never start or join a mention; mentions under 2 code points
//    are dropped.
std::vector<MentionSpan> fallback_mentions(const std::string& text);
std::vector<std::string> fallback_extract(const std::string& text);

inline constexpr const char* kFallbackExtractorId = "fallback-v1";

// EntitySet file: a header line {"entity_set": {...}} then one
// {"surface", "doc_frequency", "occurrences"} object per line.
void save_entity_set(const EntitySet& set, const std::filesystem::path& path);
EntitySet load_entity_set(const std::filesystem::path& path);

}  // namespace toptrain
