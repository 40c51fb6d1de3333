#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace toptrain {

// A gold answer span. `char_start` counts code points into the context,
// matching the SQuAD `answer_start` convention.
struct Answer {
    std::string text;
    std::size_t char_start = 0;
    bool operator==(const Answer&) const = default;
};

// One (context, question, answers) data point.
struct EqaRecord {
    std::string question_id;
    std::string question;
    std::string context_id;  // sha256 of the NFC-normalized context
    std::string context;
    std::vector<Answer> answers;
    bool is_answerable = true;
    bool operator==(const EqaRecord&) const = default;
};

using SplitMap = std::map<std::string, std::vector<std::string>>;

struct EqaDataset {
    std::string name;
    std::vector<EqaRecord> records;
    std::optional<SplitMap> declared_splits;
    bool operator==(const EqaDataset&) const = default;

    // Throws ValidationError on duplicate ids, broken spans, or overlapping splits.
    void validate() const;

    // Linear scan; use index_by_id for repeated lookups.
    const EqaRecord* find(const std::string& question_id) const;

    // Question ids of `split`. "all" is always accepted; otherwise the split
    // must be declared. Throws ArgumentError for unknown names.
    std::vector<std::string> split_ids(const std::string& split) const;
};

// question_id -> record. Pointers stay valid while `dataset.records` is untouched.
std::unordered_map<std::string, const EqaRecord*> index_by_id(const EqaDataset& dataset);

std::string context_id_for(const std::string& context);

// True when every answer's text equals the context slice at its offset.
bool span_consistent(const EqaRecord& record);

struct ParseOptions {
    // Move an answer to the first occurrence of its text when the declared
    // offset is wrong. With repair off, any mismatch is a ValidationError.
    bool repair_spans = true;
};

struct ParseReport {
    std::size_t records_seen = 0;
    std::size_t answers_seen = 0;
    std::size_t answers_consistent = 0;  // before repair
    std::vector<std::string> repaired_ids;
    std::vector<std::string> rejected_ids;  // answer text absent from context
};

struct ParsedDataset {
    EqaDataset dataset;
    ParseReport report;
};

// Reads a SQuAD v1/v2 JSON file (data -> paragraphs -> qas).
ParsedDataset parse_squad(const std::filesystem::path& path, const std::string& name,
                          const ParseOptions& options = {});
ParsedDataset parse_squad_text(const std::string& json_text, const std::string& name,
                               const ParseOptions& options = {});
EqaDataset parse_eqa_json(const std::filesystem::path& path, const std::string& name,
                          const ParseOptions& options = {});

// Combines per-split datasets (e.g. train/dev/test files) into one dataset
// with declared splits.
EqaDataset combine_splits(const std::string& name,
                          const std::vector<std::pair<std::string, EqaDataset>>& parts);

// SQuAD v2-style JSON; one paragraph per distinct context in first-seen order.
nlohmann::json to_squad_json(const EqaDataset& dataset);

nlohmann::json record_to_json(const EqaRecord& record);
EqaRecord record_from_json(const nlohmann::json& j);

// Canonical dataset file: JSON Lines, one record per line.
void save_dataset_jsonl(const EqaDataset& dataset, const std::filesystem::path& path);
EqaDataset load_dataset_jsonl(const std::filesystem::path& path, const std::string& name);

// Split assignment over question ids.
struct SplitAssignment {
    std::set<std::string> train;
    std::set<std::string> test;
    std::optional<std::set<std::string>> dev;
    std::optional<int> fold_index;
    bool operator==(const SplitAssignment&) const = default;
};

// context_id -> question ids in dataset order.
std::map<std::string, std::vector<std::string>> group_by_context(const EqaDataset& dataset);

// Overlap-free holdout split. Groups are shuffled with `seed`, stably ordered
// largest-first, then added to train until it holds at least
// train_fraction * total records. At least one group always stays in test.
SplitAssignment holdout_split(const EqaDataset& dataset, double train_fraction, std::uint64_t seed);

// Context-grouped k-fold split. Groups are shuffled, ordered largest-first and
// dealt round-robin into k buckets; fold i tests on bucket i.
std::vector<SplitAssignment> kfold_split(const EqaDataset& dataset, int k, std::uint64_t seed);

nlohmann::json split_to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const nlohmann::json& j);

// Split files: {"train": [...], "test": [...], "dev"?: [...]} for holdout,
// {"folds": [...]} for k-fold.
void save_splits(const std::vector<SplitAssignment>& splits, const std::filesystem::path& path);
std::vector<SplitAssignment> load_splits(const std::filesystem::path& path);

// Declares the named sets of `split` on `dataset`.
void attach_splits(EqaDataset& dataset, const SplitAssignment& split);

}  // namespace toptrain
