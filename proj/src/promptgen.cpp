#include "toptrain/promptgen.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <unordered_set>

#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

std::string to_string(PromptStyle style) {
    switch (style) {
        case PromptStyle::TitleHeader: return "title-header";
        case PromptStyle::ClinicalReport: return "clinical-report";
        case PromptStyle::Bare: return "bare";
    }
    return "bare";
}

PromptStyle prompt_style_from_string(const std::string& s) {
    if (s == "title-header") return PromptStyle::TitleHeader;
    if (s == "clinical-report") return PromptStyle::ClinicalReport;
    if (s == "bare") return PromptStyle::Bare;
    throw ConfigError("style", "unknown prompt style \"" + s + "\" (title-header | clinical-report | bare)");
}

std::string render_prompt(const std::string& entity, PromptStyle style) {
    if (entity.empty()) throw ArgumentError("render_prompt: entity must be non-empty");
    switch (style) {
        case PromptStyle::TitleHeader: return "Title: " + entity;
        case PromptStyle::ClinicalReport: return "Patient has " + entity + ". FINDINGS AND IMPRESSION:";
        case PromptStyle::Bare: return entity;
    }
    return entity;
}

void GenerationConfig::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p", "must be in (0, 1]");
    if (!(temperature > 0.0)) throw ConfigError("temperature", "must be > 0");
    if (max_total_tokens < 16) throw ConfigError("max_total_tokens", "must be >= 16");
    if (per_entity < 1) throw ConfigError("per_entity", "must be >= 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight", "must be >= 1");
}

json GenerationConfig::to_json() const {
    return {{"seed", seed},
            {"temperature", temperature},
            {"top_p", top_p},
            {"max_total_tokens", max_total_tokens},
            {"renormalize_logits", renormalize_logits},
            {"per_entity", per_entity}};
}

GenerationConfig GenerationConfig::from_json(const json& j) {
    GenerationConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.temperature = j.at("temperature").get<double>();
    cfg.top_p = j.at("top_p").get<double>();
    cfg.max_total_tokens = j.at("max_total_tokens").get<std::size_t>();
    cfg.renormalize_logits = j.at("renormalize_logits").get<bool>();
    cfg.per_entity = j.at("per_entity").get<std::size_t>();
    return cfg;
}

std::vector<GenerationJob> plan_generation(const EntitySet& set, PromptStyle style, const GenerationConfig& cfg) {
    if (set.entities.empty()) throw ArgumentError("plan_generation: entity set is empty");
    cfg.validate();
    std::vector<GenerationJob> jobs;
    jobs.reserve(set.entities.size() * cfg.per_entity);
    for (const auto& e : set.entities) {
        const std::string prompt = render_prompt(e.surface, style);
        for (std::size_t s = 0; s < cfg.per_entity; ++s) jobs.push_back({jobs.size(), e.surface, style, s, prompt});
    }
    return jobs;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t job_id) {
    return splitmix64(seed ^ splitmix64(job_id + 0x632BE59BD9B4E019ULL)) >> 32;
}

json CorpusStats::to_json() const {
    return {{"doc_count", doc_count}, {"total_bytes", total_bytes}, {"total_tokens", total_tokens}, {"per_style", per_style}};
}

json Provenance::to_json() const {
    json j = {{"dataset", dataset},
              {"extractor_id", extractor_id},
              {"filter_config_hash", filter_config_hash},
              {"source", source},
              {"transforms", transforms}};
    j["generation"] = generation ? generation->to_json() : json(nullptr);
    return j;
}

Provenance Provenance::from_json(const json& j) {
    Provenance p;
    p.dataset = j.at("dataset").get<std::string>();
    p.extractor_id = j.at("extractor_id").get<std::string>();
    p.filter_config_hash = j.at("filter_config_hash").get<std::string>();
    p.source = j.at("source").get<std::string>();
    p.transforms = j.at("transforms").get<std::vector<std::string>>();
    if (!j.at("generation").is_null()) p.generation = GenerationConfig::from_json(j.at("generation"));
    return p;
}

CorpusStats corpus_stats(const Corpus& c) {
    CorpusStats s;
    s.doc_count = c.docs.size();
    for (const auto& d : c.docs) {
        s.total_bytes += d.text.size();
        s.total_tokens += d.token_count;
        ++s.per_style[to_string(d.style)];
    }
    return s;
}

std::string make_doc_id(const std::string& entity, PromptStyle style, std::size_t sample_index, const std::string& text) {
    std::string key = entity;
    key += '\0';
    key += to_string(style);
    key += '\0';
    key += std::to_string(sample_index);
    key += '\0';
    key += text;
    return sha256_hex(key).substr(0, 16);
}

namespace {

struct JobResult {
    std::optional<SyntheticDoc> doc;
    GenerationFailure failure;
};

JobResult run_job(const GenerationJob& job, const GenerationConfig& cfg, CompletionBackend& backend) {
    JobResult result;
    result.failure.job_id = job.job_id;
    result.failure.entity_surface = job.entity_surface;
    const std::uint64_t base_seed = mix_seed(cfg.seed, job.job_id);
    for (std::size_t attempt = 0; attempt <= cfg.retry_budget; ++attempt) {
        result.failure.attempts = attempt + 1;
        CompletionRequest req{job.rendered_prompt,
                              attempt == 0 ? base_seed : mix_seed(base_seed, attempt),
                              cfg.temperature,
                              cfg.top_p,
                              cfg.max_total_tokens,
                              cfg.renormalize_logits};
        CompletionResult res;
        try {
            res = backend.complete(req);
        } catch (const std::exception& e) {
            result.failure.reason = std::string("backend error: ") + e.what();
            continue;
        }
        std::string text = std::move(res.text);
        if (text.rfind(job.rendered_prompt, 0) == 0) text.erase(0, job.rendered_prompt.size());
        const std::size_t tokens = text::count_whitespace_tokens(text);
        if (tokens == 0) {
            result.failure.reason = "empty continuation";
            continue;
        }
        SyntheticDoc doc;
        doc.doc_id = make_doc_id(job.entity_surface, job.style, job.sample_index, text);
        doc.entity_surface = job.entity_surface;
        doc.style = job.style;
        doc.prompt = job.rendered_prompt;
        doc.text = std::move(text);
        doc.token_count = tokens;
        doc.backend_token_count = res.token_count;
        doc.backend_id = backend.id();
        result.doc = std::move(doc);
        return result;
    }
    return result;
}

void ensure_unique_ids(std::vector<SyntheticDoc>& docs) {
    std::unordered_set<std::string> ids;
    for (auto& d : docs) {
        std::string id = d.doc_id;
        for (int n = 1; !ids.insert(id).second; ++n) id = d.doc_id + "-" + std::to_string(n);
        d.doc_id = id;
    }
}

void append_transform(Provenance& p, const std::string& t) {
    if (p.transforms.empty() || p.transforms.back() != t) p.transforms.push_back(t);
}

}  // namespace

GenerationOutcome generate_corpus(const std::vector<GenerationJob>& jobs, const GenerationConfig& cfg,
                                  CompletionBackend& backend, Provenance provenance) {
    cfg.validate();
    std::vector<JobResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    auto work = [&](std::size_t i) {
        try {
            results[i] = run_job(jobs[i], cfg, backend);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = backend.concurrent() ? std::min(cfg.max_in_flight, jobs.size()) : 1;
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
            });
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    GenerationOutcome out;
    provenance.generation = cfg;
    provenance.source = "generated";
    out.corpus.provenance = std::move(provenance);
    for (auto& r : results) {
        if (r.doc) {
            out.corpus.docs.push_back(std::move(*r.doc));
        } else {
            out.failures.push_back(std::move(r.failure));
        }
    }
    ensure_unique_ids(out.corpus.docs);
    out.corpus.stats = corpus_stats(out.corpus);
    return out;
}

Corpus truncate_corpus(const Corpus& c, std::size_t max_tokens) {
    if (max_tokens < 1) throw ArgumentError("truncate_corpus: max_tokens must be >= 1");
    Corpus out = c;
    for (auto& d : out.docs) {
        const auto spans = text::whitespace_token_spans(d.text);
        if (spans.size() <= max_tokens) continue;
        d.text.resize(spans[max_tokens - 1].end);
        d.token_count = max_tokens;
        d.backend_token_count.reset();
    }
    append_transform(out.provenance, "truncate:" + std::to_string(max_tokens));
    out.stats = corpus_stats(out);
    return out;
}

Corpus merge_corpora(const Corpus& a, const Corpus& b) {
    if (a.provenance.dataset != b.provenance.dataset)
        throw ArgumentError("merge_corpora: dataset provenance differs (\"" + a.provenance.dataset + "\" vs \"" +
                            b.provenance.dataset + "\")");
    if (b.docs.empty()) return a;
    if (a.docs.empty()) return b;

    Corpus out;
    auto join = [](const std::string& x, const std::string& y) { return x == y ? x : x + "+" + y; };
    out.provenance.dataset = a.provenance.dataset;
    out.provenance.extractor_id = join(a.provenance.extractor_id, b.provenance.extractor_id);
    out.provenance.filter_config_hash = join(a.provenance.filter_config_hash, b.provenance.filter_config_hash);
    if (a.provenance.generation == b.provenance.generation) out.provenance.generation = a.provenance.generation;
    out.provenance.source = "merged";
    out.provenance.transforms = a.provenance.transforms;
    out.provenance.transforms.push_back("merge:" + b.provenance.source);

    std::unordered_set<std::string> texts;
    for (const auto* src : {&a, &b})
        for (const auto& d : src->docs)
            if (texts.insert(d.text).second) out.docs.push_back(d);
    ensure_unique_ids(out.docs);
    out.stats = corpus_stats(out);
    return out;
}

json doc_to_json(const SyntheticDoc& d) {
    json j = {{"doc_id", d.doc_id},
              {"entity_surface", d.entity_surface},
              {"style", to_string(d.style)},
              {"prompt", d.prompt},
              {"text", d.text},
              {"token_count", d.token_count},
              {"backend_id", d.backend_id}};
    j["backend_token_count"] = d.backend_token_count ? json(*d.backend_token_count) : json(nullptr);
    return j;
}

SyntheticDoc doc_from_json(const json& j) {
    SyntheticDoc d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.entity_surface = j.at("entity_surface").get<std::string>();
    d.style = prompt_style_from_string(j.at("style").get<std::string>());
    d.prompt = j.at("prompt").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.token_count = j.at("token_count").get<std::size_t>();
    d.backend_id = j.at("backend_id").get<std::string>();
    if (j.contains("backend_token_count") && !j.at("backend_token_count").is_null())
        d.backend_token_count = j.at("backend_token_count").get<std::size_t>();
    return d;
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
    std::string out = io::dump({{"corpus", {{"provenance", c.provenance.to_json()}, {"stats", corpus_stats(c).to_json()}}}});
    out += '\n';
    for (const auto& d : c.docs) {
        out += io::dump(doc_to_json(d));
        out += '\n';
    }
    io::write_file(path, out);
}

Corpus load_corpus(const std::filesystem::path& path) {
    Corpus c;
    std::optional<json> declared_stats;
    io::for_each_json_line(path, [&](std::size_t line, const json& j) {
        try {
            if (j.contains("corpus")) {
                c.provenance = Provenance::from_json(j.at("corpus").at("provenance"));
                declared_stats = j.at("corpus").at("stats");
                return;
            }
            c.docs.push_back(doc_from_json(j));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    if (!declared_stats) throw ValidationError(path.string() + ": missing corpus header line");
    std::unordered_set<std::string> ids;
    std::vector<std::string> dupes;
    for (const auto& d : c.docs) {
        if (!ids.insert(d.doc_id).second) dupes.push_back(d.doc_id);
        if (text::count_whitespace_tokens(d.text) != d.token_count) dupes.push_back(d.doc_id + " (token_count)");
    }
    if (!dupes.empty()) throw ValidationError(path.string() + ": inconsistent docs", dupes);
    c.stats = corpus_stats(c);
    if (c.stats.to_json() != *declared_stats)
        throw ValidationError(path.string() + ": header stats do not match the documents");
    return c;
}

std::string plain_text_export(const Corpus& c, bool include_prompt) {
    std::string out;
    for (std::size_t i = 0; i < c.docs.size(); ++i) {
        const auto& d = c.docs[i];
        std::string line = include_prompt ? d.prompt + " " + d.text : d.text;
        for (char& ch : line)
            if (ch == '\n' || ch == '\r') ch = ' ';
        if (i > 0) out += '\n';
        out += line;
        out += '\n';
    }
    return out;
}

void save_failures(const std::vector<GenerationFailure>& failures, const std::filesystem::path& path) {
    json arr = json::array();
    for (const auto& f : failures)
        arr.push_back({{"job_id", f.job_id}, {"entity_surface", f.entity_surface}, {"attempts", f.attempts}, {"reason", f.reason}});
    io::write_file(path, json{{"failure_count", failures.size()}, {"failures", arr}}.dump(2) + "\n");
}

}  // namespace toptrain
