// toptrain: command-line front end for the pipeline stages.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <optional>

#include "toptrain/completion_backends.hpp"
#include "toptrain/config.hpp"
#include "toptrain/dataset.hpp"
#include "toptrain/encyclopedia.hpp"
#include "toptrain/entities.hpp"
#include "toptrain/error.hpp"
#include "toptrain/evalqa.hpp"
#include "toptrain/filtering.hpp"
#include "toptrain/io.hpp"
#include "toptrain/ner_backends.hpp"
#include "toptrain/orchestrator.hpp"
#include "toptrain/promptgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace toptrain;

namespace {

EqaDataset load_with_splits(const std::string& dataset_path, const std::string& splits_path, int fold) {
    EqaDataset ds = load_dataset_jsonl(dataset_path, fs::path(dataset_path).stem().string());
    if (!splits_path.empty()) {
        const auto splits = load_splits(splits_path);
        if (fold < 0 || static_cast<std::size_t>(fold) >= splits.size())
            throw ArgumentError("--fold " + std::to_string(fold) + " out of range (file has " + std::to_string(splits.size()) + ")");
        attach_splits(ds, splits[static_cast<std::size_t>(fold)]);
    }
    return ds;
}

std::unique_ptr<NerBackend> make_ner(const std::string& kind, const std::string& command, const std::string& url) {
    if (kind == "fallback") return std::make_unique<FallbackNerBackend>();
    if (kind == "subprocess") {
        if (command.empty()) throw ArgumentError("--command is required for the subprocess extractor");
        return std::make_unique<SubprocessNerBackend>(command);
    }
    if (kind == "http") {
        if (url.empty()) throw ArgumentError("--url is required for the http extractor");
        return std::make_unique<HttpNerBackend>(url);
    }
    throw ArgumentError("unknown extractor " + kind);
}

std::unique_ptr<CompletionBackend> make_completion(const std::string& kind, const std::string& command, const std::string& url) {
    if (kind == "mock") return std::make_unique<EchoMockBackend>();
    if (kind == "subprocess") {
        if (command.empty()) throw ArgumentError("--command is required for the subprocess backend");
        return std::make_unique<SubprocessCompletionBackend>(command);
    }
    if (kind == "http") {
        if (url.empty()) throw ArgumentError("--url is required for the http backend");
        return std::make_unique<HttpCompletionBackend>(url);
    }
    throw ArgumentError("unknown backend " + kind);
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Target-oriented pretraining pipeline toolkit"};
    app.require_subcommand(1);

    // ---- dataset ------------------------------------------------------------
    auto* dataset = app.add_subcommand("dataset", "Parse and split extractive-QA datasets");
    dataset->require_subcommand(1);

    std::string parse_in, parse_out, parse_name, parse_report;
    bool no_repair = false;
    auto* dparse = dataset->add_subcommand("parse", "SQuAD-format JSON to canonical JSON Lines");
    dparse->add_option("--in", parse_in, "SQuAD v1/v2 JSON file")->required()->check(CLI::ExistingFile);
    dparse->add_option("--out", parse_out, "Canonical dataset (.jsonl)")->required();
    dparse->add_option("--name", parse_name, "Dataset name");
    dparse->add_option("--report", parse_report, "Write the parse report here");
    dparse->add_flag("--no-repair", no_repair, "Fail on inconsistent answer offsets instead of repairing them");

    std::string split_in, split_out, split_mode = "holdout";
    double split_fraction = 0.8;
    int split_k = 5;
    std::uint64_t split_seed = 42;
    auto* dsplit = dataset->add_subcommand("split", "Context-grouped holdout or k-fold split");
    dsplit->add_option("--dataset", split_in, "Canonical dataset (.jsonl)")->required()->check(CLI::ExistingFile);
    dsplit->add_option("--out", split_out, "Split file (.json)")->required();
    dsplit->add_option("--mode", split_mode, "holdout | kfold")->check(CLI::IsMember({"holdout", "kfold"}));
    dsplit->add_option("--fraction", split_fraction, "Train fraction for holdout");
    dsplit->add_option("--k", split_k, "Fold count for kfold");
    dsplit->add_option("--seed", split_seed, "Shuffle seed");

    // ---- entities -----------------------------------------------------------
    auto* entities = app.add_subcommand("entities", "Entity extraction and filtering");
    entities->require_subcommand(1);

    std::string ex_dataset, ex_splits, ex_split = "all", ex_kind = "fallback", ex_command, ex_url, ex_out;
    int ex_fold = 0;
    std::size_t ex_inflight = 4;
    auto* extract = entities->add_subcommand("extract", "Run NER over questions and contexts");
    extract->add_option("--dataset", ex_dataset, "Canonical dataset (.jsonl)")->required()->check(CLI::ExistingFile);
    extract->add_option("--splits", ex_splits, "Split file to resolve --split against")->check(CLI::ExistingFile);
    extract->add_option("--fold", ex_fold, "Fold index when --splits holds k folds");
    extract->add_option("--split", ex_split, "all | train | test | dev");
    extract->add_option("--extractor", ex_kind, "fallback | subprocess | http")->check(CLI::IsMember({"fallback", "subprocess", "http"}));
    extract->add_option("--command", ex_command, "Subprocess command speaking the NER JSON-lines protocol");
    extract->add_option("--url", ex_url, "Base URL of an HTTP NER server");
    extract->add_option("--max-in-flight", ex_inflight, "Concurrent requests for concurrent backends");
    extract->add_option("--out", ex_out, "Entity set (.jsonl)")->required();

    std::string f_in, f_out, f_report, f_dataset, f_splits, f_split = "all";
    std::vector<std::string> f_regex, f_block;
    std::optional<std::size_t> f_min_chars, f_topk;
    bool f_no_defaults = false;
    int f_fold = 0;
    auto* filter = entities->add_subcommand("filter", "Surface filters and optional IDF top-k");
    filter->add_option("--in", f_in, "Entity set (.jsonl)")->required()->check(CLI::ExistingFile);
    filter->add_option("--out", f_out, "Filtered entity set (.jsonl)")->required();
    filter->add_option("--report", f_report, "Removal report (.json)");
    filter->add_flag("--no-default-rules", f_no_defaults, "Start from an empty rule set");
    filter->add_option("--regex", f_regex, "Reject surfaces matching this ICU regex (repeatable)");
    filter->add_option("--block", f_block, "prefix:<p> or term:<t> (repeatable)");
    filter->add_option("--min-chars", f_min_chars, "Minimum surface length in code points");
    filter->add_option("--idf-top-k", f_topk, "Keep the k entities with highest IDF");
    filter->add_option("--dataset", f_dataset, "Canonical dataset for IDF counting")->check(CLI::ExistingFile);
    filter->add_option("--splits", f_splits, "Split file for --split")->check(CLI::ExistingFile);
    filter->add_option("--fold", f_fold, "Fold index when --splits holds k folds");
    filter->add_option("--split", f_split, "Split whose text forms the IDF corpus");

    // ---- corpus -------------------------------------------------------------
    auto* corpus = app.add_subcommand("corpus", "Synthetic corpus generation and transforms");
    corpus->require_subcommand(1);

    std::string g_entities, g_out, g_failures, g_style = "title-header", g_backend = "mock", g_command, g_url, g_dataset_name;
    GenerationConfig g_cfg;
    auto* generate = corpus->add_subcommand("generate", "Prompt a completion backend once per entity and sample");
    generate->add_option("--entities", g_entities, "Entity set (.jsonl)")->required()->check(CLI::ExistingFile);
    generate->add_option("--out", g_out, "Corpus (.jsonl)")->required();
    generate->add_option("--failures", g_failures, "Failed jobs (.json)");
    generate->add_option("--style", g_style, "title-header | clinical-report | bare");
    generate->add_option("--backend", g_backend, "mock | subprocess | http")->check(CLI::IsMember({"mock", "subprocess", "http"}));
    generate->add_option("--command", g_command, "Subprocess command speaking the completion JSON-lines protocol");
    generate->add_option("--url", g_url, "Base URL of an HTTP completion server");
    generate->add_option("--seed", g_cfg.seed, "Generation seed");
    generate->add_option("--temperature", g_cfg.temperature);
    generate->add_option("--top-p", g_cfg.top_p);
    generate->add_option("--max-total-tokens", g_cfg.max_total_tokens, "Prompt plus continuation budget");
    generate->add_option("--per-entity", g_cfg.per_entity, "Samples per entity");
    generate->add_option("--retry-budget", g_cfg.retry_budget);
    generate->add_option("--max-in-flight", g_cfg.max_in_flight);
    generate->add_option("--dataset-name", g_dataset_name, "Recorded in provenance (defaults to the entity set's dataset)");

    std::string t_in, t_out;
    std::size_t t_max = 1000;
    auto* truncate = corpus->add_subcommand("truncate", "Cut every document to its first N tokens");
    truncate->add_option("--in", t_in)->required()->check(CLI::ExistingFile);
    truncate->add_option("--out", t_out)->required();
    truncate->add_option("--max-tokens", t_max, "Whitespace tokens kept per document");

    std::vector<std::string> m_in;
    std::string m_out;
    auto* merge = corpus->add_subcommand("merge", "Concatenate corpora, dropping duplicate texts");
    merge->add_option("--in", m_in, "Corpus files, in priority order")->required()->check(CLI::ExistingFile);
    merge->add_option("--out", m_out)->required();

    std::string w_entities, w_out, w_misses, w_cache = ".wiki-cache", w_url = "https://en.wikipedia.org";
    long w_delay = 200;
    auto* wiki = corpus->add_subcommand("wiki", "Encyclopedia pages as a human-written baseline corpus");
    wiki->add_option("--entities", w_entities)->required()->check(CLI::ExistingFile);
    wiki->add_option("--out", w_out)->required();
    wiki->add_option("--misses", w_misses, "Entities without a usable page (.json)");
    wiki->add_option("--cache", w_cache, "Response cache directory");
    wiki->add_option("--url", w_url, "MediaWiki base URL");
    wiki->add_option("--delay-ms", w_delay, "Pause between uncached requests");

    std::string s_in;
    auto* stats = corpus->add_subcommand("stats", "Print corpus statistics and provenance");
    stats->add_option("--in", s_in)->required()->check(CLI::ExistingFile);

    std::string x_in, x_out;
    bool x_prompt = false;
    auto* xport = corpus->add_subcommand("export", "Plain-text export for pretraining");
    xport->add_option("--in", x_in)->required()->check(CLI::ExistingFile);
    xport->add_option("--out", x_out)->required();
    xport->add_flag("--include-prompt", x_prompt, "Prefix each document with its prompt");

    // ---- eval ---------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Scoring and multi-seed aggregation");
    eval->require_subcommand(1);

    std::string e_dataset, e_splits, e_split = "all", e_preds, e_out;
    bool e_chunked = false;
    int e_fold = 0;
    std::optional<std::size_t> e_budget;
    auto* score = eval->add_subcommand("score", "EM/F1 and answerable-only variants");
    score->add_option("--dataset", e_dataset, "Canonical dataset (.jsonl)")->required()->check(CLI::ExistingFile);
    score->add_option("--splits", e_splits, "Split file")->check(CLI::ExistingFile);
    score->add_option("--fold", e_fold, "Fold index when --splits holds k folds");
    score->add_option("--split", e_split, "Split to score");
    score->add_option("--preds", e_preds, "Predictions file")->required()->check(CLI::ExistingFile);
    score->add_flag("--chunked", e_chunked, "Predictions are JSON Lines with chunk_index");
    score->add_option("--max-total-tokens", e_budget, "Check chunk counts against this window budget");
    score->add_option("--out", e_out, "Write the report here as well as to stdout");

    std::vector<std::string> a_reports;
    std::string a_out;
    auto* aggregate = eval->add_subcommand("aggregate", "Mean and population std over seed reports");
    aggregate->add_option("reports", a_reports, "Report files")->required()->check(CLI::ExistingFile);
    aggregate->add_option("--out", a_out);

    std::string sg_question, sg_context;
    std::size_t sg_budget = 2048;
    auto* segment = eval->add_subcommand("segment", "Print the decoder prompts for one long context");
    segment->add_option("--question", sg_question)->required();
    segment->add_option("--context-file", sg_context)->required()->check(CLI::ExistingFile);
    segment->add_option("--max-total-tokens", sg_budget);

    // ---- run / profiles -----------------------------------------------------
    std::string r_config, r_resume, r_stage;
    auto* run = app.add_subcommand("run", "Run the pipeline described by a config file");
    run->add_option("--config", r_config, "INI config")->required()->check(CLI::ExistingFile);
    run->add_option("--resume", r_resume, "Append to an existing run id");
    run->add_option("--stage", r_stage, "Stop after this stage");

    auto* profiles = app.add_subcommand("profiles", "Built-in dataset profiles");
    profiles->require_subcommand(1);
    auto* plist = profiles->add_subcommand("list", "List profiles");
    std::string p_name;
    auto* pshow = profiles->add_subcommand("show", "Show the defaults a profile applies");
    pshow->add_option("name", p_name)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (dparse->parsed()) {
            ParseOptions opts;
            opts.repair_spans = !no_repair;
            auto parsed = parse_squad(parse_in, parse_name.empty() ? fs::path(parse_in).stem().string() : parse_name, opts);
            save_dataset_jsonl(parsed.dataset, parse_out);
            const auto& r = parsed.report;
            const json rj = {{"records_seen", r.records_seen},
                             {"records_kept", parsed.dataset.records.size()},
                             {"answers_seen", r.answers_seen},
                             {"answers_consistent", r.answers_consistent},
                             {"repaired_ids", r.repaired_ids},
                             {"rejected_ids", r.rejected_ids}};
            if (!parse_report.empty()) io::write_file(parse_report, rj.dump(2) + "\n");
            std::cerr << "parsed " << parsed.dataset.records.size() << " records (" << r.repaired_ids.size()
                      << " repaired, " << r.rejected_ids.size() << " rejected)\n";
        } else if (dsplit->parsed()) {
            const EqaDataset ds = load_dataset_jsonl(split_in, fs::path(split_in).stem().string());
            std::vector<SplitAssignment> splits;
            if (split_mode == "holdout") splits.push_back(holdout_split(ds, split_fraction, split_seed));
            else splits = kfold_split(ds, split_k, split_seed);
            save_splits(splits, split_out);
            for (const auto& s : splits)
                std::cerr << (s.fold_index ? "fold " + std::to_string(*s.fold_index) + ": " : "") << "train " << s.train.size()
                          << ", test " << s.test.size() << "\n";
        } else if (extract->parsed()) {
            const EqaDataset ds = load_with_splits(ex_dataset, ex_splits, ex_fold);
            auto backend = make_ner(ex_kind, ex_command, ex_url);
            EntitySet set = extract_entities(collect_source_text(ds, ex_split), *backend, {ex_inflight});
            set.source_dataset = ds.name;
            set.source_split = ex_split;
            save_entity_set(set, ex_out);
            std::cerr << set.entities.size() << " unique entities\n";
        } else if (filter->parsed()) {
            FilterConfig cfg = f_no_defaults ? FilterConfig{} : FilterConfig::defaults();
            if (!f_regex.empty()) cfg.regex_rules = f_regex;
            if (!f_block.empty()) {
                cfg.pattern_blocklist.clear();
                for (const auto& b : f_block) cfg.pattern_blocklist.push_back(BlockPattern::parse(b));
            }
            if (f_min_chars) cfg.min_chars = *f_min_chars;
            cfg.idf_top_k = f_topk;
            if (f_topk && f_dataset.empty()) throw ArgumentError("--idf-top-k needs --dataset for document frequencies");
            const EntitySet raw = load_entity_set(f_in);
            auto [kept, report] = apply_surface_filters(raw, cfg);
            json rj = report.to_json();
            rj["filter_config_hash"] = cfg.hash();
            if (f_topk) {
                const EqaDataset ds = load_with_splits(f_dataset, f_splits, f_fold);
                kept = idf_rank(kept, collect_source_text(ds, f_split), *f_topk);
                rj["idf_top_k"] = *f_topk;
                rj["idf_kept_count"] = kept.entities.size();
            }
            save_entity_set(kept, f_out);
            if (!f_report.empty()) io::write_file(f_report, rj.dump(2) + "\n");
            std::cerr << "kept " << kept.entities.size() << " of " << raw.entities.size() << " entities\n";
        } else if (generate->parsed()) {
            const EntitySet set = load_entity_set(g_entities);
            auto jobs = plan_generation(set, prompt_style_from_string(g_style), g_cfg);
            auto backend = make_completion(g_backend, g_command, g_url);
            Provenance p;
            p.dataset = g_dataset_name.empty() ? set.source_dataset : g_dataset_name;
            p.extractor_id = set.extractor_id;
            auto outcome = generate_corpus(jobs, g_cfg, *backend, p);
            save_corpus(outcome.corpus, g_out);
            if (!g_failures.empty()) save_failures(outcome.failures, g_failures);
            std::cerr << outcome.corpus.docs.size() << " docs, " << outcome.failures.size() << " failed jobs\n";
            if (!outcome.failures.empty()) return 1;
        } else if (truncate->parsed()) {
            save_corpus(truncate_corpus(load_corpus(t_in), t_max), t_out);
        } else if (merge->parsed()) {
            Corpus acc = load_corpus(m_in.front());
            for (std::size_t i = 1; i < m_in.size(); ++i) acc = merge_corpora(acc, load_corpus(m_in[i]));
            save_corpus(acc, m_out);
            std::cerr << acc.docs.size() << " docs after merge\n";
        } else if (wiki->parsed()) {
            const EntitySet set = load_entity_set(w_entities);
            MediaWikiClient upstream(w_url);
            CachingEncyclopediaClient client(upstream, w_cache, std::chrono::milliseconds(w_delay));
            Provenance p;
            p.dataset = set.source_dataset;
            p.extractor_id = set.extractor_id;
            auto result = fetch_wikipedia_corpus(set, client, p);
            save_corpus(result.corpus, w_out);
            if (!w_misses.empty()) save_misses(result.misses, w_misses);
            std::cerr << result.corpus.docs.size() << " pages, " << result.misses.size() << " misses\n";
        } else if (stats->parsed()) {
            const Corpus c = load_corpus(s_in);
            print({{"stats", c.stats.to_json()}, {"provenance", c.provenance.to_json()}});
        } else if (xport->parsed()) {
            io::write_file(x_out, plain_text_export(load_corpus(x_in), x_prompt));
        } else if (score->parsed()) {
            const EqaDataset ds = load_with_splits(e_dataset, e_splits, e_fold);
            EvalReport report;
            if (e_chunked) report = chunked_decoder_eval(load_chunked_predictions(e_preds), ds, e_split, e_budget);
            else report = evaluate(load_plain_predictions(e_preds), ds, e_split);
            if (!e_out.empty()) save_report(report, e_out);
            print(report.to_json());
        } else if (aggregate->parsed()) {
            std::vector<EvalReport> reports;
            for (const auto& r : a_reports) reports.push_back(load_report(r));
            const json j = aggregate_runs(reports).to_json();
            if (!a_out.empty()) io::write_file(a_out, j.dump(2) + "\n");
            print(j);
        } else if (segment->parsed()) {
            for (const auto& p : segment_context(sg_question, io::read_file(sg_context), sg_budget)) std::cout << p << "\n";
        } else if (run->parsed()) {
            const PipelineConfig cfg = load_config(r_config);
            RunOptions opts;
            if (!r_resume.empty()) opts.resume_run_id = r_resume;
            if (!r_stage.empty()) opts.stop_after = r_stage;
            const RunResult result = run_pipeline(cfg, opts);
            for (const auto& s : result.stages) {
                std::cerr << result.run_id << " " << s.stage << ": " << to_string(s.status);
                if (!s.error.empty()) std::cerr << " (" << s.error << ")";
                std::cerr << "\n";
            }
            return result.ok ? 0 : 1;
        } else if (plist->parsed()) {
            for (const auto& name : profile_names()) std::cout << name << "\n";
        } else if (pshow->parsed()) {
            print(describe_profile(p_name));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
