#include "toptrain/orchestrator.hpp"

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "toptrain/completion_backends.hpp"
#include "toptrain/encyclopedia.hpp"
#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/ner_backends.hpp"
#include "toptrain/subprocess.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifest

namespace {

json hyper_json(const StageHyperparameters& h) { return h.to_json(); }

StageHyperparameters hyper_from_json(const json& j) {
    StageHyperparameters h;
    h.batch_size = j.at("batch_size").get<std::size_t>();
    h.learning_rate = j.at("learning_rate").get<double>();
    h.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("max_input_length")) h.max_input_length = j.at("max_input_length").get<std::size_t>();
    if (j.contains("stride")) h.stride = j.at("stride").get<std::size_t>();
    if (j.contains("n_best")) h.n_best = j.at("n_best").get<std::size_t>();
    if (j.contains("max_answer_length")) h.max_answer_length = j.at("max_answer_length").get<std::size_t>();
    return h;
}

}  // namespace

json TrainingManifest::to_json() const {
    json pre = hyper_json(pretrain);
    pre["name"] = "pretrain";
    pre["corpus_path"] = corpus_path;
    pre["corpus_jsonl_path"] = corpus_jsonl_path;
    pre["include_prompt"] = include_prompt;

    json s1 = hyper_json(ft1);
    s1["name"] = "ft1";
    s1["dataset"] = general_dataset;

    json s2 = hyper_json(ft2);
    s2["name"] = "ft2";
    s2["dataset_path"] = dataset_path;
    s2["splits_path"] = splits_path;
    s2["train_split"] = "train";
    s2["fold"] = fold ? json(*fold) : json(nullptr);

    json predict = {{"name", "predict"},
                    {"dataset_path", dataset_path},
                    {"splits_path", splits_path},
                    {"eval_split", eval_split},
                    {"chunking",
                     {{"mode", eval_mode == EvalMode::Plain ? "plain" : "chunked"},
                      {"max_total_tokens", eval_max_total_tokens}}}};

    return {{"seed", seed},
            {"generation_seed", generation_seed},
            {"profile", profile},
            {"dataset", dataset},
            {"base_model", base_model},
            {"stages", json::array({pre, s1, s2, predict})}};
}

TrainingManifest TrainingManifest::from_json(const json& j) {
    TrainingManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.generation_seed = j.at("generation_seed").get<std::uint64_t>();
    m.profile = j.at("profile").get<std::string>();
    m.dataset = j.at("dataset").get<std::string>();
    m.base_model = j.at("base_model").get<std::string>();
    const auto& st = j.at("stages");
    const char* expected[] = {"pretrain", "ft1", "ft2", "predict"};
    if (st.size() != 4) throw ValidationError("manifest needs exactly 4 stages");
    for (std::size_t i = 0; i < 4; ++i)
        if (st.at(i).at("name") != expected[i])
            throw ValidationError("manifest stage " + std::to_string(i) + " should be " + expected[i]);
    m.pretrain = hyper_from_json(st[0]);
    m.corpus_path = st[0].at("corpus_path").get<std::string>();
    m.corpus_jsonl_path = st[0].value("corpus_jsonl_path", "");
    m.include_prompt = st[0].value("include_prompt", false);
    m.ft1 = hyper_from_json(st[1]);
    m.general_dataset = st[1].at("dataset").get<std::string>();
    m.ft2 = hyper_from_json(st[2]);
    m.dataset_path = st[2].at("dataset_path").get<std::string>();
    m.splits_path = st[2].at("splits_path").get<std::string>();
    if (!st[2].at("fold").is_null()) m.fold = st[2].at("fold").get<int>();
    m.eval_split = st[3].at("eval_split").get<std::string>();
    m.eval_mode = st[3].at("chunking").at("mode") == "plain" ? EvalMode::Plain : EvalMode::Chunked;
    m.eval_max_total_tokens = st[3].at("chunking").at("max_total_tokens").get<std::size_t>();
    return m;
}

TrainingManifest emit_manifest(const PipelineConfig& cfg, const std::string& corpus_path, std::uint64_t seed,
                               const std::string& dataset_path, const std::string& splits_path) {
    const fs::path corpus = fs::path(corpus_path).is_absolute() ? fs::path(corpus_path) : cfg.run_dir / corpus_path;
    if (!fs::is_regular_file(corpus)) throw ArgumentError("emit_manifest: corpus not found: " + corpus.string());
    TrainingManifest m;
    m.seed = seed;
    m.generation_seed = cfg.generation.seed;
    m.profile = cfg.profile;
    m.dataset = cfg.dataset.name;
    m.base_model = cfg.training.base_model;
    m.corpus_path = corpus_path;
    m.corpus_jsonl_path = "corpus/final.jsonl";
    m.include_prompt = cfg.training.include_prompt;
    m.pretrain = cfg.training.pretrain;
    m.general_dataset = cfg.training.general_dataset;
    m.ft1 = cfg.training.ft1;
    m.dataset_path = dataset_path;
    m.splits_path = splits_path;
    if (cfg.dataset.split == SplitPolicy::KFold) m.fold = cfg.dataset.fold;
    m.ft2 = cfg.training.ft2;
    m.eval_split = cfg.dataset.eval_split;
    m.eval_mode = cfg.eval.mode;
    m.eval_max_total_tokens = cfg.eval.max_total_tokens;
    return m;
}

std::vector<TrainingManifest> emit_manifests(const PipelineConfig& cfg, const std::string& corpus_path) {
    std::vector<TrainingManifest> out;
    for (auto seed : cfg.training.seeds) out.push_back(emit_manifest(cfg, corpus_path, seed));
    return out;
}

// ---------------------------------------------------------------------------
// Ledger

std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Completed: return "completed";
        case StageStatus::Skipped: return "skipped";
        case StageStatus::Failed: return "failed";
    }
    return "?";
}

json StageRecord::to_json() const {
    json j = {{"event", "stage"},         {"run_id", run_id},         {"stage", stage},
              {"status", toptrain::to_string(status)}, {"started_at", started_at}, {"ended_at", ended_at},
              {"input_hash", input_hash}, {"inputs", inputs},         {"outputs", outputs}};
    if (!error.empty()) j["error"] = error;
    return j;
}

StageRecord StageRecord::from_json(const json& j) {
    StageRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.stage = j.at("stage").get<std::string>();
    const std::string s = j.at("status").get<std::string>();
    r.status = s == "completed" ? StageStatus::Completed : s == "skipped" ? StageStatus::Skipped : StageStatus::Failed;
    r.started_at = j.value("started_at", "");
    r.ended_at = j.value("ended_at", "");
    r.input_hash = j.value("input_hash", "");
    r.inputs = j.value("inputs", std::map<std::string, std::string>{});
    r.outputs = j.value("outputs", std::map<std::string, std::string>{});
    r.error = j.value("error", "");
    return r;
}

RunLedger::RunLedger(fs::path path) : path_(std::move(path)) {}

std::vector<json> RunLedger::events() const {
    std::vector<json> out;
    if (!fs::exists(path_)) return out;
    io::for_each_json_line(path_, [&](std::size_t, const json& j) { out.push_back(j); });
    return out;
}

std::vector<std::string> RunLedger::run_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : events())
        if (e.value("event", "") == "run_start" && std::find(ids.begin(), ids.end(), e.at("run_id")) == ids.end())
            ids.push_back(e.at("run_id").get<std::string>());
    return ids;
}

std::string RunLedger::next_run_id() const { return "run-" + std::to_string(run_ids().size() + 1); }

std::optional<StageRecord> RunLedger::last_good(const std::string& stage) const {
    std::optional<StageRecord> found;
    for (const auto& e : events()) {
        if (e.value("event", "") != "stage" || e.value("stage", "") != stage) continue;
        auto r = StageRecord::from_json(e);
        if (r.status != StageStatus::Failed) found = std::move(r);
    }
    return found;
}

std::vector<StageRecord> RunLedger::stages_of(const std::string& run_id) const {
    std::vector<StageRecord> out;
    for (const auto& e : events())
        if (e.value("event", "") == "stage" && e.value("run_id", "") == run_id) out.push_back(StageRecord::from_json(e));
    return out;
}

void RunLedger::append(const json& event) {
    fs::create_directories(path_.parent_path());
    const std::string line = io::dump(event) + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error("cannot open ledger " + path_.string());
    const auto written = ::write(fd, line.data(), line.size());
    ::fsync(fd);
    ::close(fd);
    if (written != static_cast<ssize_t>(line.size())) throw Error("short write to ledger " + path_.string());
}

std::vector<std::string> stage_names(bool with_adapter) {
    std::vector<std::string> names = {"dataset", "extract", "filter", "generate", "transform", "manifest"};
    if (with_adapter) names.insert(names.end(), {"pretrain", "finetune", "predict"});
    names.emplace_back("score");
    return names;
}

std::string hash_path(const fs::path& p) {
    if (fs::is_regular_file(p)) return sha256_file(p);
    if (!fs::is_directory(p)) throw Error("cannot hash missing artifact " + p.string());
    std::vector<std::string> rels;
    for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) rels.push_back(fs::relative(e.path(), p).generic_string());
    std::sort(rels.begin(), rels.end());
    std::string listing;
    for (const auto& r : rels) listing += r + '\0' + sha256_file(p / r) + '\n';
    return sha256_hex(listing);
}

// ---------------------------------------------------------------------------
// Mock predictor

std::string mock_answer(const std::string& question, const std::string& context) {
    std::set<std::string> qtokens;
    {
        const std::string nq = normalize_answer(question);
        for (const auto& s : text::whitespace_token_spans(nq)) qtokens.insert(nq.substr(s.begin, s.size()));
    }
    const auto spans = text::whitespace_token_spans(context);
    std::size_t best_score = 0, best_first = 0, best_last = spans.empty() ? 0 : spans.size() - 1;
    bool have_best = false;
    std::size_t first = 0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const char last = context[spans[i].end - 1];
        if (last != '.' && last != '?' && last != '!' && i + 1 != spans.size()) continue;
        std::set<std::string> seen;
        for (std::size_t t = first; t <= i; ++t) {
            const std::string n = normalize_answer(context.substr(spans[t].begin, spans[t].size()));
            if (!n.empty() && qtokens.contains(n)) seen.insert(n);
        }
        if (!have_best || seen.size() > best_score) {
            have_best = true;
            best_score = seen.size();
            best_first = first;
            best_last = i;
        }
        first = i + 1;
    }
    if (spans.empty()) return "";
    best_last = std::min(best_last, best_first + 29);
    return context.substr(spans[best_first].begin, spans[best_last].end - spans[best_first].begin);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return out.str();
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

class RunDirLock {
public:
    explicit RunDirLock(const fs::path& dir) {
        fs::create_directories(dir);
        const auto path = dir / ".lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw Error("cannot open lock file " + path.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw Error("run directory " + dir.string() + " is in use by another pipeline run");
        }
    }
    ~RunDirLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    RunDirLock(const RunDirLock&) = delete;
    RunDirLock& operator=(const RunDirLock&) = delete;

private:
    int fd_ = -1;
};

const char* kDatasetFile = "dataset/dataset.jsonl";
const char* kSplitsFile = "dataset/splits.json";
const char* kRawEntities = "entities/raw.jsonl";
const char* kFilteredEntities = "entities/filtered.jsonl";
const char* kFilterReport = "entities/filter_report.json";
const char* kGenerated = "corpus/generated.jsonl";
const char* kFailures = "corpus/failures.json";
const char* kFinalCorpus = "corpus/final.jsonl";
const char* kFinalText = "corpus/final.txt";

struct Pipeline {
    const PipelineConfig& cfg;
    fs::path dir;

    fs::path at(const std::string& rel) const { return dir / rel; }
    std::string file_hash(const std::string& rel) const { return sha256_file(at(rel)); }
    static std::string digest(const json& j) { return sha256_hex(io::dump(j)); }
    std::string manifest_rel(std::uint64_t seed) const { return "manifests/seed-" + std::to_string(seed) + ".json"; }
    std::string adapter_rel(std::uint64_t seed, const std::string& stage) const {
        return "adapter/seed-" + std::to_string(seed) + "/" + stage;
    }

    EqaDataset load_dataset() const {
        EqaDataset ds = load_dataset_jsonl(at(kDatasetFile), cfg.dataset.name);
        attach_splits(ds, load_splits(at(kSplitsFile)).front());
        return ds;
    }

    std::vector<SourceDocument> source_docs() const { return collect_source_text(load_dataset(), cfg.extractor.source_split); }

    // ---- inputs -----------------------------------------------------------

    std::map<std::string, std::string> inputs_of(const std::string& stage) const {
        std::map<std::string, std::string> in;
        const json full = cfg.to_json();
        auto dataset_files = [&] {
            in[kDatasetFile] = file_hash(kDatasetFile);
            in[kSplitsFile] = file_hash(kSplitsFile);
        };
        if (stage == "dataset") {
            in["config.dataset"] = digest(full.at("dataset"));
            if (cfg.dataset.path) in["source:" + cfg.dataset.path->filename().string()] = sha256_file(*cfg.dataset.path);
            for (const auto& [split, p] : cfg.dataset.split_paths) in["source:" + split] = sha256_file(p);
        } else if (stage == "extract") {
            dataset_files();
            in["config.entities"] = digest(full.at("entities"));
        } else if (stage == "filter") {
            dataset_files();
            in[kRawEntities] = file_hash(kRawEntities);
            in["config.filter"] = digest(full.at("filter"));
            in["config.source_split"] = digest(cfg.extractor.source_split);
        } else if (stage == "generate") {
            in[kFilteredEntities] = file_hash(kFilteredEntities);
            in["config.generation"] = digest({full.at("generation"),
                                              full.at("styles"),
                                              full.at("generation_backend"),
                                              cfg.generation.retry_budget,
                                              cfg.max_failure_fraction});
        } else if (stage == "transform") {
            in[kGenerated] = file_hash(kGenerated);
            in["config.transforms"] = digest(full.at("transforms"));
            if (cfg.transforms.merge_corpus) in["merge_corpus"] = sha256_file(*cfg.transforms.merge_corpus);
            if (cfg.transforms.wiki != "off") in[kFilteredEntities] = file_hash(kFilteredEntities);
        } else if (stage == "manifest") {
            dataset_files();
            in[kFinalText] = file_hash(kFinalText);
            in["config.training"] = digest({full.at("training"), full.at("eval"), full.at("profile"),
                                            full.at("dataset").at("name"), full.at("dataset").at("eval_split"),
                                            full.at("generation").at("seed")});
        } else if (stage == "pretrain" || stage == "finetune" || stage == "predict") {
            in["config.adapter_command"] = digest(cfg.adapter_command);
            const std::string prev = stage == "pretrain" ? "" : stage == "finetune" ? "pretrain" : "finetune";
            for (auto seed : cfg.training.seeds) {
                in[manifest_rel(seed)] = file_hash(manifest_rel(seed));
                if (!prev.empty()) {
                    const std::string rel = adapter_rel(seed, prev) + "/result.json";
                    in[rel] = file_hash(rel);
                }
            }
            if (stage == "pretrain") in[kFinalText] = file_hash(kFinalText);
            if (stage != "pretrain") dataset_files();
        } else if (stage == "score") {
            dataset_files();
            in["config.eval"] = digest({full.at("eval"), cfg.dataset.eval_split});
            if (cfg.adapter_command.empty()) {
                in["predictor"] = digest("mock");
            } else {
                for (auto seed : cfg.training.seeds) {
                    const std::string rel = adapter_rel(seed, "predict") + "/result.json";
                    in[rel] = file_hash(rel);
                }
            }
        }
        return in;
    }

    // ---- stages -----------------------------------------------------------

    std::vector<std::string> run_dataset() const {
        const ParseOptions opts{cfg.dataset.repair_spans};
        EqaDataset ds;
        ParseReport report;
        SplitAssignment selected;
        std::vector<std::string> outputs = {kDatasetFile, kSplitsFile, "dataset/parse_report.json"};
        auto add_report = [&](const ParseReport& r) {
            report.records_seen += r.records_seen;
            report.answers_seen += r.answers_seen;
            report.answers_consistent += r.answers_consistent;
            report.repaired_ids.insert(report.repaired_ids.end(), r.repaired_ids.begin(), r.repaired_ids.end());
            report.rejected_ids.insert(report.rejected_ids.end(), r.rejected_ids.begin(), r.rejected_ids.end());
        };
        if (cfg.dataset.split == SplitPolicy::Declared) {
            std::vector<std::pair<std::string, EqaDataset>> parts;
            for (const auto& [split, p] : cfg.dataset.split_paths) {
                auto parsed = parse_squad(p, cfg.dataset.name, opts);
                add_report(parsed.report);
                parts.emplace_back(split, std::move(parsed.dataset));
            }
            ds = combine_splits(cfg.dataset.name, parts);
            const auto& declared = *ds.declared_splits;
            auto as_set = [&](const char* name) {
                auto it = declared.find(name);
                return it == declared.end() ? std::set<std::string>{} : std::set<std::string>(it->second.begin(), it->second.end());
            };
            selected.train = as_set("train");
            selected.test = as_set("test");
            if (declared.contains("dev")) selected.dev = as_set("dev");
        } else {
            auto parsed = parse_squad(*cfg.dataset.path, cfg.dataset.name, opts);
            add_report(parsed.report);
            ds = std::move(parsed.dataset);
            if (cfg.dataset.split == SplitPolicy::Holdout) {
                selected = holdout_split(ds, cfg.dataset.train_fraction, cfg.dataset.split_seed);
            } else {
                const auto folds = kfold_split(ds, cfg.dataset.k, cfg.dataset.split_seed);
                save_splits(folds, at("dataset/folds.json"));
                outputs.emplace_back("dataset/folds.json");
                selected = folds.at(static_cast<std::size_t>(cfg.dataset.fold));
            }
        }
        save_dataset_jsonl(ds, at(kDatasetFile));
        save_splits({selected}, at(kSplitsFile));
        io::write_file(at("dataset/parse_report.json"),
                       json{{"records_seen", report.records_seen},
                            {"records_kept", ds.records.size()},
                            {"answers_seen", report.answers_seen},
                            {"answers_consistent", report.answers_consistent},
                            {"repaired_ids", report.repaired_ids},
                            {"rejected_ids", report.rejected_ids}}
                               .dump(2) + "\n");
        // SQuAD-shaped copies for the adapter's trainers.
        const auto index = index_by_id(ds);
        EqaDataset view = ds;
        view.declared_splits.reset();
        attach_splits(view, selected);
        for (const auto& [name, ids] : *view.declared_splits) {
            EqaDataset part;
            part.name = ds.name;
            for (const auto& id : ids) part.records.push_back(*index.at(id));
            const std::string rel = "dataset/" + name + ".squad.json";
            io::write_file(at(rel), to_squad_json(part).dump() + "\n");
            outputs.push_back(rel);
        }
        return outputs;
    }

    std::unique_ptr<NerBackend> ner_backend() const {
        const auto& ex = cfg.extractor;
        if (ex.kind == "subprocess") return std::make_unique<SubprocessNerBackend>(ex.command, ex.model_id.empty() ? "subprocess" : ex.model_id);
        if (ex.kind == "http") return std::make_unique<HttpNerBackend>(ex.url, ex.model_id.empty() ? "http" : ex.model_id);
        return std::make_unique<FallbackNerBackend>();
    }

    std::vector<std::string> run_extract() const {
        const auto docs = source_docs();
        auto backend = ner_backend();
        EntitySet set = extract_entities(docs, *backend, {cfg.extractor.max_in_flight});
        set.source_dataset = cfg.dataset.name;
        set.source_split = cfg.extractor.source_split;
        save_entity_set(set, at(kRawEntities));
        return {kRawEntities};
    }

    std::vector<std::string> run_filter() const {
        const EntitySet raw = load_entity_set(at(kRawEntities));
        auto [kept, report] = apply_surface_filters(raw, cfg.filter);
        json report_j = report.to_json();
        report_j["filter_config_hash"] = cfg.filter.hash();
        if (cfg.filter.idf_top_k) {
            if (kept.entities.empty()) throw Error("every entity was removed by the surface filters; nothing to rank");
            kept = idf_rank(kept, source_docs(), *cfg.filter.idf_top_k);
            report_j["idf_top_k"] = *cfg.filter.idf_top_k;
            report_j["idf_kept_count"] = kept.entities.size();
        }
        save_entity_set(kept, at(kFilteredEntities));
        io::write_file(at(kFilterReport), report_j.dump(2) + "\n");
        return {kFilteredEntities, kFilterReport};
    }

    std::unique_ptr<CompletionBackend> completion_backend() const {
        const auto& b = cfg.generation_backend;
        if (b.kind == "subprocess") return std::make_unique<SubprocessCompletionBackend>(b.command, b.model_id.empty() ? "subprocess" : b.model_id);
        if (b.kind == "http") return std::make_unique<HttpCompletionBackend>(b.url, b.model_id.empty() ? "http" : b.model_id);
        return std::make_unique<EchoMockBackend>();
    }

    Provenance base_provenance(const EntitySet& set) const {
        Provenance p;
        p.dataset = cfg.dataset.name;
        p.extractor_id = set.extractor_id;
        p.filter_config_hash = cfg.filter.hash();
        return p;
    }

    std::vector<std::string> run_generate() const {
        const EntitySet set = load_entity_set(at(kFilteredEntities));
        std::vector<GenerationJob> jobs;
        for (auto style : cfg.styles) {
            auto part = plan_generation(set, style, cfg.generation);
            for (auto& j : part) {
                j.job_id = jobs.size();
                jobs.push_back(std::move(j));
            }
        }
        auto backend = completion_backend();
        auto outcome = generate_corpus(jobs, cfg.generation, *backend, base_provenance(set));
        save_failures(outcome.failures, at(kFailures));
        const double fraction = jobs.empty() ? 0.0 : static_cast<double>(outcome.failures.size()) / static_cast<double>(jobs.size());
        if (fraction > cfg.max_failure_fraction) {
            std::string why = outcome.failures.empty() ? "" : " (first: " + outcome.failures.front().reason + ")";
            throw Error("generation failed for " + std::to_string(outcome.failures.size()) + " of " +
                        std::to_string(jobs.size()) + " jobs, above the allowed fraction " +
                        std::to_string(cfg.max_failure_fraction) + why);
        }
        save_corpus(outcome.corpus, at(kGenerated));
        return {kGenerated, kFailures};
    }

    std::vector<std::string> run_transform() const {
        std::vector<std::string> outputs = {kFinalCorpus, kFinalText};
        Corpus corpus = load_corpus(at(kGenerated));
        if (cfg.transforms.wiki != "off") {
            const EntitySet set = load_entity_set(at(kFilteredEntities));
            MediaWikiClient upstream(cfg.transforms.wiki_url);
            CachingEncyclopediaClient client(upstream, cfg.transforms.wiki_cache, cfg.transforms.wiki_delay);
            auto wiki = fetch_wikipedia_corpus(set, client, base_provenance(set));
            save_misses(wiki.misses, at("corpus/wiki_misses.json"));
            outputs.emplace_back("corpus/wiki_misses.json");
            if (cfg.transforms.wiki == "replace") corpus = std::move(wiki.corpus);
            else corpus = merge_corpora(corpus, wiki.corpus);
        }
        if (cfg.transforms.merge_corpus) {
            Corpus other = load_corpus(*cfg.transforms.merge_corpus);
            corpus = merge_corpora(corpus, other);
        }
        if (cfg.transforms.truncate_tokens) corpus = truncate_corpus(corpus, *cfg.transforms.truncate_tokens);
        save_corpus(corpus, at(kFinalCorpus));
        io::write_file(at(kFinalText), plain_text_export(corpus));
        return outputs;
    }

    std::vector<std::string> run_manifest() const {
        std::vector<std::string> outputs;
        for (const auto& m : emit_manifests(cfg, kFinalText)) {
            const std::string rel = manifest_rel(m.seed);
            io::write_file(at(rel), m.to_json().dump(2) + "\n");
            outputs.push_back(rel);
        }
        return outputs;
    }

    std::vector<std::string> run_adapter(const std::string& stage) const {
        std::vector<std::string> outputs;
        for (auto seed : cfg.training.seeds) {
            const std::string out_rel = adapter_rel(seed, stage);
            fs::create_directories(at(out_rel));
            fs::remove(at(out_rel + "/result.json"));
            const std::string command = cfg.adapter_command + " " + stage + " --manifest " + shell_quote(manifest_rel(seed)) +
                                        " --out " + shell_quote(out_rel);
            const int code = run_shell(command, dir);
            if (code != 0) throw Error("adapter " + stage + " for seed " + std::to_string(seed) + " exited with status " + std::to_string(code));
            const std::string result_rel = out_rel + "/result.json";
            if (!fs::is_regular_file(at(result_rel))) throw ProtocolError("adapter " + stage + " wrote no " + result_rel);
            const json result = json::parse(io::read_file(at(result_rel)));
            const std::string artifact = result.at("artifact").get<std::string>();
            const fs::path artifact_path = fs::path(artifact).is_absolute() ? fs::path(artifact) : dir / artifact;
            if (!fs::exists(artifact_path)) throw ProtocolError("adapter " + stage + " artifact missing: " + artifact);
            if (stage != "predict" && result.value("loss_log", json::array()).empty())
                throw ProtocolError("adapter " + stage + " reported an empty loss log");
            outputs.push_back(result_rel);
            const auto rel = fs::relative(artifact_path, dir).generic_string();
            if (rel.rfind("..", 0) != 0) outputs.push_back(rel);
        }
        return outputs;
    }

    std::vector<Prediction> mock_predictions(const EqaDataset& ds) const {
        std::vector<Prediction> preds;
        const auto index = index_by_id(ds);
        for (const auto& id : ds.split_ids(cfg.dataset.eval_split)) {
            const EqaRecord& r = *index.at(id);
            if (cfg.eval.mode == EvalMode::Plain) {
                preds.push_back({id, mock_answer(r.question, r.context), std::nullopt});
                continue;
            }
            const auto windows = segment_windows(r.question, r.context, cfg.eval.max_total_tokens);
            for (std::size_t i = 0; i < windows.size(); ++i) preds.push_back({id, mock_answer(r.question, windows[i].chunk), i});
        }
        return preds;
    }

    EvalReport score(const std::vector<Prediction>& preds, const EqaDataset& ds) const {
        if (cfg.eval.mode == EvalMode::Plain) return evaluate(preds, ds, cfg.dataset.eval_split);
        return chunked_decoder_eval(preds, ds, cfg.dataset.eval_split, cfg.eval.max_total_tokens);
    }

    std::vector<std::string> run_score() const {
        const EqaDataset ds = load_dataset();
        std::vector<std::string> outputs;
        std::vector<EvalReport> reports;
        const bool chunked = cfg.eval.mode == EvalMode::Chunked;
        if (cfg.adapter_command.empty()) {
            const auto preds = mock_predictions(ds);
            const std::string pred_rel = chunked ? "predictions/mock.jsonl" : "predictions/mock.json";
            if (chunked) save_chunked_predictions(preds, at(pred_rel));
            else save_plain_predictions(preds, at(pred_rel));
            reports.push_back(score(preds, ds));
            save_report(reports.back(), at("reports/mock.json"));
            outputs = {pred_rel, "reports/mock.json"};
        } else {
            for (auto seed : cfg.training.seeds) {
                const json result = json::parse(io::read_file(at(adapter_rel(seed, "predict") + "/result.json")));
                const fs::path p = fs::path(result.at("artifact").get<std::string>());
                const fs::path pred_path = p.is_absolute() ? p : dir / p;
                const auto preds = chunked ? load_chunked_predictions(pred_path) : load_plain_predictions(pred_path);
                reports.push_back(score(preds, ds));
                const std::string rel = "reports/seed-" + std::to_string(seed) + ".json";
                save_report(reports.back(), at(rel));
                outputs.push_back(rel);
            }
        }
        io::write_file(at("reports/aggregate.json"), aggregate_runs(reports).to_json().dump(2) + "\n");
        outputs.emplace_back("reports/aggregate.json");
        return outputs;
    }

    std::vector<std::string> run(const std::string& stage) const {
        if (stage == "dataset") return run_dataset();
        if (stage == "extract") return run_extract();
        if (stage == "filter") return run_filter();
        if (stage == "generate") return run_generate();
        if (stage == "transform") return run_transform();
        if (stage == "manifest") return run_manifest();
        if (stage == "pretrain" || stage == "finetune" || stage == "predict") return run_adapter(stage);
        if (stage == "score") return run_score();
        throw ArgumentError("unknown stage " + stage);
    }

    bool outputs_intact(const StageRecord& r) const {
        for (const auto& [rel, hash] : r.outputs) {
            if (!fs::exists(at(rel))) return false;
            if (hash_path(at(rel)) != hash) return false;
        }
        return !r.outputs.empty();
    }
};

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
    cfg.validate();
    const bool with_adapter = !cfg.adapter_command.empty();
    const auto names = stage_names(with_adapter);
    if (options.stop_after && std::find(names.begin(), names.end(), *options.stop_after) == names.end())
        throw ArgumentError("unknown stage \"" + *options.stop_after + "\"");

    fs::create_directories(cfg.run_dir);
    const fs::path dir = fs::canonical(cfg.run_dir);
    RunDirLock lock(dir);
    RunLedger ledger(dir / "ledger.jsonl");

    RunResult result;
    result.config_hash = cfg.hash();
    if (options.resume_run_id) {
        const auto ids = ledger.run_ids();
        if (std::find(ids.begin(), ids.end(), *options.resume_run_id) == ids.end())
            throw ArgumentError("no run " + *options.resume_run_id + " in " + ledger.path().string());
        result.run_id = *options.resume_run_id;
    } else {
        result.run_id = ledger.next_run_id();
    }
    ledger.append({{"event", "run_start"},
                   {"run_id", result.run_id},
                   {"resumed", options.resume_run_id.has_value()},
                   {"config_hash", result.config_hash},
                   {"config", cfg.to_json()},
                   {"time", now_iso()}});

    const Pipeline pipeline{cfg, dir};
    bool ok = true;
    for (const auto& stage : names) {
        StageRecord rec;
        rec.run_id = result.run_id;
        rec.stage = stage;
        rec.started_at = now_iso();
        try {
            rec.inputs = pipeline.inputs_of(stage);
            rec.input_hash = sha256_hex(io::dump(json(rec.inputs)));
            const auto previous = ledger.last_good(stage);
            if (previous && previous->input_hash == rec.input_hash && pipeline.outputs_intact(*previous)) {
                rec.status = StageStatus::Skipped;
                rec.outputs = previous->outputs;
            } else {
                for (const auto& rel : pipeline.run(stage)) rec.outputs[rel] = hash_path(dir / rel);
                rec.status = StageStatus::Completed;
            }
        } catch (const std::exception& e) {
            rec.status = StageStatus::Failed;
            rec.error = e.what();
            ok = false;
        }
        rec.ended_at = now_iso();
        ledger.append(rec.to_json());
        result.stages.push_back(rec);
        if (!ok) break;
        if (options.stop_after && stage == *options.stop_after) break;
    }
    result.ok = ok;
    ledger.append({{"event", "run_end"}, {"run_id", result.run_id}, {"status", ok ? "completed" : "failed"}, {"time", now_iso()}});
    return result;
}

}  // namespace toptrain
