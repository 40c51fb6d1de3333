#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toptrain/dataset.hpp"

namespace toptrain {

// Lowercase, drop punctuation (ASCII plus Unicode dashes and quotation
// marks), drop standalone "a"/"an"/"the", collapse whitespace.
std::string normalize_answer(const std::string& text);

// An empty `golds` list means the question is unanswerable (gold = "").
double exact_match(const std::string& pred, const std::vector<std::string>& golds);
double token_f1(const std::string& pred, const std::vector<std::string>& golds);

struct Prediction {
    std::string question_id;
    std::string answer_text;  // empty = abstain
    std::optional<std::size_t> chunk_index;
    bool operator==(const Prediction&) const = default;
};

// Percentages. has_* average answerable questions only and are absent when
// the split has none.
struct MetricSet {
    double em = 0;
    double f1 = 0;
    std::optional<double> has_em;
    std::optional<double> has_f1;
    bool operator==(const MetricSet&) const = default;
};

enum class EvalMode { Plain, Chunked };

struct EvalReport {
    EvalMode mode = EvalMode::Plain;
    MetricSet scores;                  // chunked: per-question mean over chunks, then mean over questions
    std::optional<MetricSet> avg_best;  // chunked only
    std::size_t n_total = 0;
    std::size_t n_answerable = 0;
    std::size_t n_pairs = 0;  // chunked only
    bool operator==(const EvalReport&) const = default;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

// Scores one prediction per question of `split`. Missing, duplicate or
// foreign predictions raise ValidationError listing the question ids.
EvalReport evaluate(const std::vector<Prediction>& preds, const EqaDataset& dataset, const std::string& split = "all");

struct ContextWindow {
    std::size_t first_token = 0;
    std::size_t token_count = 0;
    std::string chunk;   // context slice from the first to the last token of the window
    std::string prompt;  // "Question: {q} Context: {chunk} Answer:"
};

// Whitespace-token windows sized so each rendered prompt fits
// `max_total_tokens`. An empty context yields one window with an empty chunk.
std::vector<ContextWindow> segment_windows(const std::string& question, const std::string& context,
                                           std::size_t max_total_tokens);
std::vector<std::string> segment_context(const std::string& question, const std::string& context,
                                         std::size_t max_total_tokens);

// Every question of `split` needs predictions for chunks 0..n-1 with no gaps.
// With `max_total_tokens`, n must equal the segment_context window count.
EvalReport chunked_decoder_eval(const std::vector<Prediction>& preds, const EqaDataset& dataset,
                                const std::string& split = "all",
                                std::optional<std::size_t> max_total_tokens = std::nullopt);

struct MeanStd {
    double mean = 0;
    double std = 0;  // population
    bool operator==(const MeanStd&) const = default;
};

struct SeedAggregate {
    EvalMode mode = EvalMode::Plain;
    std::map<std::string, MeanStd> metrics;  // em, f1, has_em, has_f1, best_* in chunked mode
    std::size_t run_count = 0;

    nlohmann::json to_json() const;
};

SeedAggregate aggregate_runs(const std::vector<EvalReport>& reports);

// {"qid": "answer", ...}; a repeated key is a ValidationError.
std::vector<Prediction> load_plain_predictions(const std::filesystem::path& path);
std::vector<Prediction> parse_plain_predictions(const std::string& json_text);
// JSON Lines {question_id, chunk_index, answer}.
std::vector<Prediction> load_chunked_predictions(const std::filesystem::path& path);

void save_plain_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);
void save_chunked_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);

void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace toptrain
