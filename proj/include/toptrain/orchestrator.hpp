#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toptrain/config.hpp"

namespace toptrain {

// Hand-off to the model adapter. Paths are relative to the run directory.
struct TrainingManifest {
    std::uint64_t seed = 0;
    std::uint64_t generation_seed = 0;
    std::string profile;
    std::string dataset;
    std::string base_model;

    std::string corpus_path;        // plain-text export, prompts excluded
    std::string corpus_jsonl_path;  // full corpus, for adapters that re-prepend prompts
    bool include_prompt = false;
    StageHyperparameters pretrain;

    std::string general_dataset;  // squad | squad_v2
    StageHyperparameters ft1;

    std::string dataset_path;  // canonical JSON Lines records
    std::string splits_path;   // {"train": [...], "test": [...]}
    std::optional<int> fold;
    StageHyperparameters ft2;

    std::string eval_split;
    EvalMode eval_mode = EvalMode::Plain;
    std::size_t eval_max_total_tokens = 2048;

    bool operator==(const TrainingManifest&) const = default;

    // Stages in execution order: pretrain, ft1, ft2, predict.
    nlohmann::json to_json() const;
    static TrainingManifest from_json(const nlohmann::json& j);
};

// Relative paths resolve against cfg.run_dir. Throws ArgumentError when the
// corpus does not exist.
TrainingManifest emit_manifest(const PipelineConfig& cfg, const std::string& corpus_path, std::uint64_t seed,
                               const std::string& dataset_path = "dataset/dataset.jsonl",
                               const std::string& splits_path = "dataset/splits.json");
std::vector<TrainingManifest> emit_manifests(const PipelineConfig& cfg, const std::string& corpus_path);

enum class StageStatus { Completed, Skipped, Failed };
std::string to_string(StageStatus s);

struct StageRecord {
    std::string run_id;
    std::string stage;
    StageStatus status = StageStatus::Completed;
    std::string started_at;
    std::string ended_at;
    std::string input_hash;
    std::map<std::string, std::string> inputs;   // name -> hash or value digest
    std::map<std::string, std::string> outputs;  // run-dir relative path -> sha256
    std::string error;

    nlohmann::json to_json() const;
    static StageRecord from_json(const nlohmann::json& j);
};

// Append-only JSON Lines file: run_start / stage / run_end events.
class RunLedger {
public:
    explicit RunLedger(std::filesystem::path path);

    const std::filesystem::path& path() const { return path_; }
    std::vector<nlohmann::json> events() const;
    std::vector<std::string> run_ids() const;
    std::string next_run_id() const;
    // Latest completed or skipped record of `stage`, from any run.
    std::optional<StageRecord> last_good(const std::string& stage) const;
    std::vector<StageRecord> stages_of(const std::string& run_id) const;

    void append(const nlohmann::json& event);

private:
    std::filesystem::path path_;
};

// Fixed stage order. Adapter stages only run when cfg.adapter_command is set.
std::vector<std::string> stage_names(bool with_adapter);

struct RunOptions {
    std::optional<std::string> resume_run_id;  // keep appending under an existing run id
    std::optional<std::string> stop_after;     // run up to and including this stage
};

struct RunResult {
    std::string run_id;
    std::string config_hash;
    bool ok = false;
    std::vector<StageRecord> stages;
};

// Runs every stage in order. A stage is skipped when its input hash equals
// the one recorded for its last good execution and all recorded outputs are
// still on disk unchanged. The first failing stage halts the run.
RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

// Deterministic stand-in for a QA model: answers with the context sentence
// sharing most normalized tokens with the question (first 30 tokens).
std::string mock_answer(const std::string& question, const std::string& context);

// sha256 of a file, or of the sorted (relative path, file hash) list for a directory.
std::string hash_path(const std::filesystem::path& p);

}  // namespace toptrain
