#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toptrain/evalqa.hpp"
#include "toptrain/filtering.hpp"
#include "toptrain/promptgen.hpp"

namespace toptrain {

enum class SplitPolicy { Declared, Holdout, KFold };

std::string to_string(SplitPolicy p);  // declared | holdout | kfold

struct DatasetSettings {
    std::string name;
    // Either one SQuAD file, or one file per declared split.
    std::optional<std::filesystem::path> path;
    std::map<std::string, std::filesystem::path> split_paths;
    SplitPolicy split = SplitPolicy::Holdout;
    double train_fraction = 0.8;
    int k = 5;
    int fold = 0;
    std::uint64_t split_seed = 42;
    bool repair_spans = true;
    std::string eval_split = "test";
};

struct ExtractorSettings {
    std::string kind = "fallback";  // fallback | subprocess | http
    std::string command;
    std::string url;
    std::string model_id;
    std::string source_split = "all";
    std::size_t max_in_flight = 4;
};

struct GenerationBackendSettings {
    std::string kind = "mock";  // mock | subprocess | http
    std::string command;
    std::string url;
    std::string model_id;
};

struct TransformSettings {
    std::optional<std::size_t> truncate_tokens;
    std::optional<std::filesystem::path> merge_corpus;
    std::string wiki = "off";  // off | replace | merge (encyclopedia pages instead of / next to generated docs)
    std::string wiki_url = "https://en.wikipedia.org";
    std::filesystem::path wiki_cache;  // default <run_dir>/wiki-cache
    std::chrono::milliseconds wiki_delay{200};
};

struct StageHyperparameters {
    std::size_t batch_size = 0;
    double learning_rate = 0;
    std::size_t epochs = 0;
    std::optional<std::size_t> max_input_length;
    std::optional<std::size_t> stride;
    std::optional<std::size_t> n_best;
    std::optional<std::size_t> max_answer_length;
    bool operator==(const StageHyperparameters&) const = default;
    nlohmann::json to_json() const;
};

struct TrainingSettings {
    std::vector<std::uint64_t> seeds{41, 42, 43};
    std::string base_model = "roberta-base";
    std::string general_dataset = "squad";  // squad | squad_v2
    bool include_prompt = false;            // adapter re-prepends prompts to pretraining text
    StageHyperparameters pretrain;
    StageHyperparameters ft1;
    StageHyperparameters ft2;
};

struct EvalSettings {
    EvalMode mode = EvalMode::Plain;
    std::size_t max_total_tokens = 2048;  // chunked mode window budget
};

struct PipelineConfig {
    std::string profile;
    std::filesystem::path source_path;  // the config file, empty when built in code
    std::filesystem::path run_dir;
    DatasetSettings dataset;
    ExtractorSettings extractor;
    FilterConfig filter;
    std::vector<PromptStyle> styles;
    GenerationConfig generation;
    double max_failure_fraction = 0.05;
    GenerationBackendSettings generation_backend;
    TransformSettings transforms;
    TrainingSettings training;
    EvalSettings eval;
    std::string adapter_command;  // empty: adapter stages are skipped

    // Throws ConfigError naming the field; checks that referenced files exist.
    void validate() const;
    nlohmann::json to_json() const;
    std::string hash() const;
};

// Known profile names: covidqa, radqa, custom.
std::vector<std::string> profile_names();
// Profile defaults as a config with no dataset paths (custom has none).
PipelineConfig profile_defaults(const std::string& profile);
// Human-readable description of what a profile sets.
nlohmann::json describe_profile(const std::string& profile);

// INI file. Relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace toptrain
