#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toptrain/entities.hpp"

namespace toptrain {

// TitleHeader:    "Title: {entity}"                                   (research-article style)
// ClinicalReport: "Patient has {entity}. FINDINGS AND IMPRESSION:"    (radiology-report style)
// Bare:           "{entity}"
enum class PromptStyle { TitleHeader, ClinicalReport, Bare };

std::string to_string(PromptStyle style);        // "title-header", "clinical-report", "bare"
PromptStyle prompt_style_from_string(const std::string& s);

std::string render_prompt(const std::string& entity, PromptStyle style);

struct GenerationConfig {
    std::uint64_t seed = 42;
    double temperature = 0.9;
    double top_p = 0.9;
    std::size_t max_total_tokens = 2048;  // prompt + generated
    bool renormalize_logits = true;
    std::size_t per_entity = 1;
    std::size_t retry_budget = 2;    // extra attempts after an empty or failed completion
    std::size_t max_in_flight = 8;
    bool operator==(const GenerationConfig&) const = default;

    void validate() const;  // throws ConfigError
    // Sampling fields only: retry/concurrency knobs do not change outputs.
    nlohmann::json to_json() const;
    static GenerationConfig from_json(const nlohmann::json& j);
};

struct GenerationJob {
    std::size_t job_id = 0;
    std::string entity_surface;
    PromptStyle style = PromptStyle::Bare;
    std::size_t sample_index = 0;
    std::string rendered_prompt;
    bool operator==(const GenerationJob&) const = default;
};

// |set| * per_entity jobs, entity-major, in the set's order.
std::vector<GenerationJob> plan_generation(const EntitySet& set, PromptStyle style, const GenerationConfig& cfg);

// Per-job seed: a splitmix64 mix of the run seed and job id, folded to 32
// bits so it is accepted by numpy/torch seeding on the backend side.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t job_id);

struct SyntheticDoc {
    std::string doc_id;
    std::string entity_surface;
    PromptStyle style = PromptStyle::Bare;
    std::string prompt;
    std::string text;  // continuation only, never includes the prompt
    std::size_t token_count = 0;  // whitespace tokens of `text`
    std::optional<std::size_t> backend_token_count;
    std::string backend_id;
    bool operator==(const SyntheticDoc&) const = default;
};

struct CorpusStats {
    std::size_t doc_count = 0;
    std::size_t total_bytes = 0;
    std::size_t total_tokens = 0;
    std::map<std::string, std::size_t> per_style;
    bool operator==(const CorpusStats&) const = default;
    nlohmann::json to_json() const;
};

struct Provenance {
    std::string dataset;
    std::string extractor_id;
    std::string filter_config_hash;
    std::optional<GenerationConfig> generation;
    std::string source = "generated";  // generated | wikipedia | merged
    std::vector<std::string> transforms;
    bool operator==(const Provenance&) const = default;
    nlohmann::json to_json() const;
    static Provenance from_json(const nlohmann::json& j);
};

struct Corpus {
    std::vector<SyntheticDoc> docs;
    CorpusStats stats;
    Provenance provenance;
    bool operator==(const Corpus&) const = default;
};

CorpusStats corpus_stats(const Corpus& c);
std::string make_doc_id(const std::string& entity, PromptStyle style, std::size_t sample_index, const std::string& text);

// Completion backend. Implementations live in completion_backends.hpp.
struct CompletionRequest {
    std::string prompt;
    std::uint64_t seed = 0;
    double temperature = 0.9;
    double top_p = 0.9;
    std::size_t max_total_tokens = 2048;
    bool renormalize_logits = true;
};

struct CompletionResult {
    std::string text;
    std::optional<std::size_t> token_count;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string id() const = 0;
    virtual bool concurrent() const { return false; }
    // Throws TransportError/ProtocolError on failure.
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

struct GenerationFailure {
    std::size_t job_id = 0;
    std::string entity_surface;
    std::size_t attempts = 0;
    std::string reason;
};

struct GenerationOutcome {
    Corpus corpus;
    std::vector<GenerationFailure> failures;
};

// One doc per successful job, in job order. Attempt 0 uses
// mix_seed(cfg.seed, job_id); retry r uses mix_seed(that, r). Empty or
// whitespace-only continuations and transport errors are retried up to
// cfg.retry_budget times, then reported as failures.
GenerationOutcome generate_corpus(const std::vector<GenerationJob>& jobs, const GenerationConfig& cfg,
                                  CompletionBackend& backend, Provenance provenance = {});

// Cuts every doc to its first `max_tokens` whitespace tokens.
Corpus truncate_corpus(const Corpus& c, std::size_t max_tokens);

// Concatenation with exact-duplicate texts removed (first wins).
Corpus merge_corpora(const Corpus& a, const Corpus& b);

// Corpus file: header line {"corpus": {provenance, stats}} then one SyntheticDoc per line.
void save_corpus(const Corpus& c, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);  // verifies stats

// Plain text for pretraining consumers: one doc per line (inner newlines
// become spaces), docs separated by a blank line.
std::string plain_text_export(const Corpus& c, bool include_prompt = false);

nlohmann::json doc_to_json(const SyntheticDoc& d);
SyntheticDoc doc_from_json(const nlohmann::json& j);

void save_failures(const std::vector<GenerationFailure>& failures, const std::filesystem::path& path);

}  // namespace toptrain
