#include "toptrain/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string to_string(SplitPolicy p) {
    switch (p) {
        case SplitPolicy::Declared: return "declared";
        case SplitPolicy::Holdout: return "holdout";
        case SplitPolicy::KFold: return "kfold";
    }
    return "?";
}

json StageHyperparameters::to_json() const {
    json j = {{"batch_size", batch_size}, {"learning_rate", learning_rate}, {"epochs", epochs}};
    if (max_input_length) j["max_input_length"] = *max_input_length;
    if (stride) j["stride"] = *stride;
    if (n_best) j["n_best"] = *n_best;
    if (max_answer_length) j["max_answer_length"] = *max_answer_length;
    return j;
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> keys = [] {
        std::map<std::string, std::set<std::string>> k = {
            {"pipeline", {"profile", "run_dir"}},
            {"dataset",
             {"name", "path", "train_path", "dev_path", "test_path", "split", "train_fraction", "k", "fold",
              "split_seed", "repair_spans", "eval_split"}},
            {"entities", {"extractor", "command", "url", "model_id", "source_split", "max_in_flight"}},
            {"filter", {"blocklist", "min_chars", "idf_top_k"}},  // plus regex_rule_<n>
            {"generation",
             {"backend", "command", "url", "model_id", "styles", "seed", "temperature", "top_p", "max_total_tokens",
              "renormalize_logits", "per_entity", "retry_budget", "max_in_flight", "max_failure_fraction"}},
            {"transforms", {"truncate_tokens", "merge_corpus", "wiki", "wiki_url", "wiki_cache", "wiki_delay_ms"}},
            {"training", {"seeds", "base_model", "general_dataset", "include_prompt"}},
            {"eval", {"mode", "max_total_tokens"}},
            {"adapter", {"command"}},
        };
        for (const char* stage : {"pretrain", "ft1", "ft2"})
            for (const char* field :
                 {"batch_size", "learning_rate", "epochs", "max_input_length", "stride", "n_best", "max_answer_length"})
                k["training"].insert(std::string(stage) + "_" + field);
        return k;
    }();
    return keys;
}

// Keys a custom profile must spell out because no dataset-neutral default exists.
const std::vector<std::string> kCustomRequired = {
    "dataset.split",         "dataset.eval_split",     "entities.source_split", "filter.idf_top_k",
    "generation.styles",     "generation.per_entity",  "training.general_dataset", "training.ft2_batch_size",
    "training.ft2_learning_rate", "training.ft2_epochs", "training.ft2_max_answer_length",
};

class Reader {
public:
    Reader(const pt::ptree& tree, fs::path base) : tree_(tree), base_(std::move(base)) {}

    std::optional<std::string> raw(const std::string& key) const {
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return text::trim(*v);
    }
    bool has(const std::string& key) const { return raw(key).has_value(); }

    std::optional<std::string> str(const std::string& key) const { return raw(key); }

    template <class Int>
    std::optional<Int> integer(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        Int out{};
        const auto* end = v->data() + v->size();
        auto [ptr, ec] = std::from_chars(v->data(), end, out);
        if (ec != std::errc{} || ptr != end || v->empty()) throw ConfigError(key, "expected an integer, got \"" + *v + "\"");
        return out;
    }

    std::optional<double> real(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        try {
            std::size_t used = 0;
            const double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            throw ConfigError(key, "expected a number, got \"" + *v + "\"");
        }
    }

    std::optional<bool> boolean(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        std::string s = text::to_lower(*v);
        if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
        if (s == "false" || s == "no" || s == "0" || s == "off") return false;
        throw ConfigError(key, "expected true/false, got \"" + *v + "\"");
    }

    std::optional<fs::path> path(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        if (v->empty()) throw ConfigError(key, "empty path");
        fs::path p(*v);
        return p.is_absolute() ? p : (base_ / p).lexically_normal();
    }

    std::optional<std::vector<std::string>> list(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        std::vector<std::string> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = text::trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    // Values "none"/"" map to an explicit absence.
    std::optional<std::optional<std::size_t>> optional_count(const std::string& key) const {
        auto v = raw(key);
        if (!v) return std::nullopt;
        if (v->empty() || text::to_lower(*v) == "none") return std::optional<std::size_t>{};
        return std::optional<std::size_t>{*integer<std::size_t>(key)};
    }

private:
    const pt::ptree& tree_;
    fs::path base_;
};

template <class T>
void set_if(T& field, const std::optional<T>& v) {
    if (v) field = *v;
}

void check_schema(const pt::ptree& tree) {
    for (const auto& [section, body] : tree) {
        if (!body.data().empty() && body.empty()) throw ConfigError(section, "key outside any section");
        auto known = schema().find(section);
        if (known == schema().end()) throw ConfigError(section, "unknown section [" + section + "]");
        for (const auto& [key, _] : body) {
            if (section == "filter" && key.rfind("regex_rule_", 0) == 0) continue;
            if (!known->second.contains(key)) throw ConfigError(section + "." + key, "unknown key");
        }
    }
}

StageHyperparameters pretrain_defaults() { return {40, 5e-5, 3, std::nullopt, std::nullopt, std::nullopt, std::nullopt}; }
StageHyperparameters squad_defaults() { return {16, 2e-5, 3, 384, 128, 20, 30}; }

fs::path relative_for_hash(const fs::path& p, const fs::path& base) {
    if (base.empty()) return p;
    const auto rel = p.lexically_relative(base);
    return rel.empty() ? p : rel;
}

}  // namespace

std::vector<std::string> profile_names() { return {"covidqa", "radqa", "custom"}; }

PipelineConfig profile_defaults(const std::string& profile) {
    PipelineConfig cfg;
    cfg.profile = profile;
    cfg.filter = FilterConfig::defaults();
    cfg.training.pretrain = pretrain_defaults();
    cfg.training.ft1 = squad_defaults();
    if (profile == "covidqa") {
        cfg.dataset.name = "covidqa";
        cfg.dataset.split = SplitPolicy::Holdout;
        cfg.dataset.train_fraction = 0.8;
        cfg.extractor.source_split = "all";
        cfg.filter.idf_top_k = 25000;
        cfg.styles = {PromptStyle::TitleHeader};
        cfg.generation.per_entity = 1;
        cfg.training.general_dataset = "squad";
        cfg.training.ft2 = {40, 2e-5, 1, 384, 128, 20, 1000};
    } else if (profile == "radqa") {
        cfg.dataset.name = "radqa";
        cfg.dataset.split = SplitPolicy::Declared;
        cfg.extractor.source_split = "train";
        cfg.filter.idf_top_k.reset();
        cfg.styles = {PromptStyle::ClinicalReport};
        cfg.generation.per_entity = 5;
        cfg.training.general_dataset = "squad_v2";
        cfg.training.ft2 = {16, 3e-5, 1, 384, 128, 20, 1000};
    } else if (profile == "custom") {
        cfg.dataset.name = "custom";
        cfg.styles.clear();
        cfg.training.ft2 = {0, 0, 0, 384, 128, 20, std::nullopt};
    } else {
        throw ConfigError("pipeline.profile", "unknown profile \"" + profile + "\" (expected covidqa, radqa or custom)");
    }
    return cfg;
}

json describe_profile(const std::string& profile) {
    const PipelineConfig cfg = profile_defaults(profile);
    json styles = json::array();
    for (auto s : cfg.styles) styles.push_back(to_string(s));
    json j = {{"profile", profile},
              {"split", to_string(cfg.dataset.split)},
              {"entity_source_split", cfg.extractor.source_split},
              {"styles", styles},
              {"per_entity", cfg.generation.per_entity},
              {"idf_top_k", cfg.filter.idf_top_k ? json(*cfg.filter.idf_top_k) : json(nullptr)},
              {"general_dataset", cfg.training.general_dataset},
              {"pretrain", cfg.training.pretrain.to_json()},
              {"ft1", cfg.training.ft1.to_json()},
              {"ft2", cfg.training.ft2.to_json()}};
    if (profile == "custom") j["required_keys"] = kCustomRequired;
    return j;
}

namespace {

// Re-homes a module-level ConfigError under its config section.
ConfigError rewrap(const std::string& section, const ConfigError& e) {
    std::string msg = e.what();
    const std::string lead = e.field() + ": ";
    if (!e.field().empty() && msg.rfind(lead, 0) == 0) msg.erase(0, lead.size());
    return ConfigError(section + e.field(), msg);
}

}  // namespace

void PipelineConfig::validate() const {
    if (dataset.name.empty()) throw ConfigError("dataset.name", "must not be empty");
    if (dataset.split == SplitPolicy::Declared) {
        if (dataset.split_paths.empty()) throw ConfigError("dataset.train_path", "declared splits need per-split files");
        if (dataset.path) throw ConfigError("dataset.path", "declared splits take train_path/dev_path/test_path, not path");
        if (!dataset.split_paths.contains(dataset.eval_split) && dataset.eval_split != "all")
            throw ConfigError("dataset.eval_split", "\"" + dataset.eval_split + "\" is not a declared split");
        if (!dataset.split_paths.contains(extractor.source_split) && extractor.source_split != "all")
            throw ConfigError("entities.source_split", "\"" + extractor.source_split + "\" is not a declared split");
    } else {
        if (!dataset.path) throw ConfigError("dataset.path", "holdout/kfold splitting needs one dataset file");
        if (!dataset.split_paths.empty()) throw ConfigError("dataset.train_path", "per-split files need split = declared");
        for (const auto* key : {"eval_split", "source_split"}) {
            const std::string& v = std::string(key) == "eval_split" ? dataset.eval_split : extractor.source_split;
            if (v != "all" && v != "train" && v != "test")
                throw ConfigError(std::string(key) == "eval_split" ? "dataset.eval_split" : "entities.source_split",
                                  "must be all, train or test for generated splits");
        }
        if (dataset.split == SplitPolicy::Holdout && !(dataset.train_fraction > 0 && dataset.train_fraction < 1))
            throw ConfigError("dataset.train_fraction", "must lie in (0, 1)");
        if (dataset.split == SplitPolicy::KFold) {
            if (dataset.k < 2) throw ConfigError("dataset.k", "must be >= 2");
            if (dataset.fold < 0 || dataset.fold >= dataset.k) throw ConfigError("dataset.fold", "must lie in [0, k)");
        }
    }
    if (dataset.path && !fs::is_regular_file(*dataset.path))
        throw ConfigError("dataset.path", "file not found: " + dataset.path->string());
    for (const auto& [split, p] : dataset.split_paths)
        if (!fs::is_regular_file(p)) throw ConfigError("dataset." + split + "_path", "file not found: " + p.string());

    if (extractor.kind == "subprocess" && extractor.command.empty())
        throw ConfigError("entities.command", "required for the subprocess extractor");
    if (extractor.kind == "http" && extractor.url.empty()) throw ConfigError("entities.url", "required for the http extractor");
    if (extractor.kind != "fallback" && extractor.kind != "subprocess" && extractor.kind != "http")
        throw ConfigError("entities.extractor", "expected fallback, subprocess or http");
    if (extractor.max_in_flight < 1) throw ConfigError("entities.max_in_flight", "must be >= 1");

    try {
        filter.validate();
    } catch (const ConfigError& e) {
        throw rewrap("filter.", e);
    }
    if (styles.empty()) throw ConfigError("generation.styles", "at least one prompt style is required");
    try {
        generation.validate();
    } catch (const ConfigError& e) {
        throw rewrap("generation.", e);
    }
    if (!(max_failure_fraction >= 0 && max_failure_fraction <= 1))
        throw ConfigError("generation.max_failure_fraction", "must lie in [0, 1]");
    const auto& gb = generation_backend;
    if (gb.kind != "mock" && gb.kind != "subprocess" && gb.kind != "http")
        throw ConfigError("generation.backend", "expected mock, subprocess or http");
    if (gb.kind == "subprocess" && gb.command.empty()) throw ConfigError("generation.command", "required for the subprocess backend");
    if (gb.kind == "http" && gb.url.empty()) throw ConfigError("generation.url", "required for the http backend");

    if (transforms.truncate_tokens && *transforms.truncate_tokens < 1)
        throw ConfigError("transforms.truncate_tokens", "must be >= 1");
    if (transforms.wiki != "off" && transforms.wiki != "replace" && transforms.wiki != "merge")
        throw ConfigError("transforms.wiki", "expected off, replace or merge");
    if (transforms.merge_corpus && !fs::is_regular_file(*transforms.merge_corpus))
        throw ConfigError("transforms.merge_corpus", "file not found: " + transforms.merge_corpus->string());

    if (training.seeds.empty()) throw ConfigError("training.seeds", "at least one seed is required");
    if (training.general_dataset != "squad" && training.general_dataset != "squad_v2")
        throw ConfigError("training.general_dataset", "expected squad or squad_v2");
    const std::pair<const char*, const StageHyperparameters*> stages[] = {
        {"pretrain", &training.pretrain}, {"ft1", &training.ft1}, {"ft2", &training.ft2}};
    for (const auto& [name, h] : stages) {
        const std::string prefix = std::string("training.") + name + "_";
        if (h->batch_size < 1) throw ConfigError(prefix + "batch_size", "must be positive");
        if (!(h->learning_rate > 0)) throw ConfigError(prefix + "learning_rate", "must be positive");
        if (h->epochs < 1) throw ConfigError(prefix + "epochs", "must be positive");
        if (std::string(name) != "pretrain") {
            if (!h->max_input_length || *h->max_input_length < 1) throw ConfigError(prefix + "max_input_length", "must be positive");
            if (!h->stride || *h->stride < 1) throw ConfigError(prefix + "stride", "must be positive");
            if (*h->stride >= *h->max_input_length) throw ConfigError(prefix + "stride", "must be below max_input_length");
            if (!h->n_best || *h->n_best < 1) throw ConfigError(prefix + "n_best", "must be positive");
            if (!h->max_answer_length || *h->max_answer_length < 1) throw ConfigError(prefix + "max_answer_length", "must be positive");
        }
    }
    if (eval.mode == EvalMode::Chunked && eval.max_total_tokens < 8)
        throw ConfigError("eval.max_total_tokens", "must be >= 8 for chunked evaluation");
    if (run_dir.empty()) throw ConfigError("pipeline.run_dir", "must not be empty");
}

json PipelineConfig::to_json() const {
    const fs::path base = source_path.empty() ? fs::path() : source_path.parent_path();
    auto p = [&](const fs::path& x) { return relative_for_hash(x, base).generic_string(); };
    json split_paths = json::object();
    for (const auto& [k, v] : dataset.split_paths) split_paths[k] = p(v);
    json style_list = json::array();
    for (auto s : styles) style_list.push_back(to_string(s));
    return {
        {"profile", profile},
        {"dataset",
         {{"name", dataset.name},
          {"path", dataset.path ? json(p(*dataset.path)) : json(nullptr)},
          {"split_paths", split_paths},
          {"split", to_string(dataset.split)},
          {"train_fraction", dataset.train_fraction},
          {"k", dataset.k},
          {"fold", dataset.fold},
          {"split_seed", dataset.split_seed},
          {"repair_spans", dataset.repair_spans},
          {"eval_split", dataset.eval_split}}},
        {"entities",
         {{"extractor", extractor.kind},
          {"command", extractor.command},
          {"url", extractor.url},
          {"model_id", extractor.model_id},
          {"source_split", extractor.source_split}}},
        {"filter", filter.to_json()},
        {"styles", style_list},
        {"generation", generation.to_json()},
        {"max_failure_fraction", max_failure_fraction},
        {"generation_backend",
         {{"kind", generation_backend.kind},
          {"command", generation_backend.command},
          {"url", generation_backend.url},
          {"model_id", generation_backend.model_id}}},
        {"transforms",
         {{"truncate_tokens", transforms.truncate_tokens ? json(*transforms.truncate_tokens) : json(nullptr)},
          {"merge_corpus", transforms.merge_corpus ? json(p(*transforms.merge_corpus)) : json(nullptr)},
          {"wiki", transforms.wiki},
          {"wiki_url", transforms.wiki_url}}},
        {"training",
         {{"seeds", training.seeds},
          {"base_model", training.base_model},
          {"general_dataset", training.general_dataset},
          {"include_prompt", training.include_prompt},
          {"pretrain", training.pretrain.to_json()},
          {"ft1", training.ft1.to_json()},
          {"ft2", training.ft2.to_json()}}},
        {"eval", {{"mode", eval.mode == EvalMode::Plain ? "plain" : "chunked"}, {"max_total_tokens", eval.max_total_tokens}}},
        {"adapter_command", adapter_command},
    };
}

std::string PipelineConfig::hash() const { return sha256_hex(io::dump(to_json())); }

PipelineConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("", "config does not parse: " + std::string(e.message()) + " at line " + std::to_string(e.line()));
    }
    check_schema(tree);
    const Reader r(tree, base_dir);

    const auto profile = r.str("pipeline.profile");
    if (!profile || profile->empty()) throw ConfigError("pipeline.profile", "missing (expected covidqa, radqa or custom)");
    PipelineConfig cfg = profile_defaults(*profile);
    if (*profile == "custom")
        for (const auto& key : kCustomRequired)
            if (!r.has(key)) throw ConfigError(key, "required by the custom profile");

    cfg.run_dir = r.path("pipeline.run_dir").value_or((base_dir / "run").lexically_normal());

    auto& ds = cfg.dataset;
    set_if(ds.name, r.str("dataset.name"));
    ds.path = r.path("dataset.path");
    for (const char* split : {"train", "dev", "test"})
        if (auto p = r.path(std::string("dataset.") + split + "_path")) ds.split_paths[split] = *p;
    if (auto s = r.str("dataset.split")) {
        if (*s == "declared") ds.split = SplitPolicy::Declared;
        else if (*s == "holdout") ds.split = SplitPolicy::Holdout;
        else if (*s == "kfold") ds.split = SplitPolicy::KFold;
        else throw ConfigError("dataset.split", "expected declared, holdout or kfold");
    }
    set_if(ds.train_fraction, r.real("dataset.train_fraction"));
    set_if(ds.k, r.integer<int>("dataset.k"));
    set_if(ds.fold, r.integer<int>("dataset.fold"));
    set_if(ds.split_seed, r.integer<std::uint64_t>("dataset.split_seed"));
    set_if(ds.repair_spans, r.boolean("dataset.repair_spans"));
    set_if(ds.eval_split, r.str("dataset.eval_split"));

    auto& ex = cfg.extractor;
    set_if(ex.kind, r.str("entities.extractor"));
    set_if(ex.command, r.str("entities.command"));
    set_if(ex.url, r.str("entities.url"));
    set_if(ex.model_id, r.str("entities.model_id"));
    set_if(ex.source_split, r.str("entities.source_split"));
    set_if(ex.max_in_flight, r.integer<std::size_t>("entities.max_in_flight"));

    std::map<int, std::string> regexes;
    const pt::ptree no_section;
    for (const auto& [key, value] : tree.get_child("filter", no_section)) {
        if (key.rfind("regex_rule_", 0) != 0) continue;
        const std::string n = key.substr(11);
        int idx = -1;
        auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), idx);
        if (ec != std::errc{} || ptr != n.data() + n.size() || idx < 0)
            throw ConfigError("filter." + key, "regex rules are named regex_rule_<n>");
        regexes[idx] = text::trim(value.data());
    }
    if (!regexes.empty()) {
        cfg.filter.regex_rules.clear();
        for (auto& [_, rx] : regexes) cfg.filter.regex_rules.push_back(rx);
    }
    if (auto blocks = r.list("filter.blocklist")) {
        cfg.filter.pattern_blocklist.clear();
        for (const auto& b : *blocks) cfg.filter.pattern_blocklist.push_back(BlockPattern::parse(b));
    }
    set_if(cfg.filter.min_chars, r.integer<std::size_t>("filter.min_chars"));
    if (auto k = r.optional_count("filter.idf_top_k")) cfg.filter.idf_top_k = *k;

    auto& g = cfg.generation;
    set_if(cfg.generation_backend.kind, r.str("generation.backend"));
    set_if(cfg.generation_backend.command, r.str("generation.command"));
    set_if(cfg.generation_backend.url, r.str("generation.url"));
    set_if(cfg.generation_backend.model_id, r.str("generation.model_id"));
    if (auto styles = r.list("generation.styles")) {
        cfg.styles.clear();
        for (const auto& s : *styles) {
            try {
                cfg.styles.push_back(prompt_style_from_string(s));
            } catch (const Error& e) {
                throw ConfigError("generation.styles", e.what());
            }
        }
    }
    set_if(g.seed, r.integer<std::uint64_t>("generation.seed"));
    set_if(g.temperature, r.real("generation.temperature"));
    set_if(g.top_p, r.real("generation.top_p"));
    set_if(g.max_total_tokens, r.integer<std::size_t>("generation.max_total_tokens"));
    set_if(g.renormalize_logits, r.boolean("generation.renormalize_logits"));
    set_if(g.per_entity, r.integer<std::size_t>("generation.per_entity"));
    set_if(g.retry_budget, r.integer<std::size_t>("generation.retry_budget"));
    set_if(g.max_in_flight, r.integer<std::size_t>("generation.max_in_flight"));
    set_if(cfg.max_failure_fraction, r.real("generation.max_failure_fraction"));

    auto& tr = cfg.transforms;
    if (auto t = r.optional_count("transforms.truncate_tokens")) tr.truncate_tokens = *t;
    tr.merge_corpus = r.path("transforms.merge_corpus");
    set_if(tr.wiki, r.str("transforms.wiki"));
    set_if(tr.wiki_url, r.str("transforms.wiki_url"));
    tr.wiki_cache = r.path("transforms.wiki_cache").value_or(cfg.run_dir / "wiki-cache");
    if (auto ms = r.integer<long>("transforms.wiki_delay_ms")) tr.wiki_delay = std::chrono::milliseconds(*ms);

    auto& t = cfg.training;
    if (auto seeds = r.list("training.seeds")) {
        t.seeds.clear();
        for (const auto& s : *seeds) {
            std::uint64_t v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError("training.seeds", "bad seed \"" + s + "\"");
            t.seeds.push_back(v);
        }
    }
    set_if(t.base_model, r.str("training.base_model"));
    set_if(t.general_dataset, r.str("training.general_dataset"));
    set_if(t.include_prompt, r.boolean("training.include_prompt"));
    const std::pair<const char*, StageHyperparameters*> stages[] = {{"pretrain", &t.pretrain}, {"ft1", &t.ft1}, {"ft2", &t.ft2}};
    for (auto& [name, h] : stages) {
        const std::string prefix = std::string("training.") + name + "_";
        set_if(h->batch_size, r.integer<std::size_t>(prefix + "batch_size"));
        set_if(h->learning_rate, r.real(prefix + "learning_rate"));
        set_if(h->epochs, r.integer<std::size_t>(prefix + "epochs"));
        if (auto v = r.integer<std::size_t>(prefix + "max_input_length")) h->max_input_length = *v;
        if (auto v = r.integer<std::size_t>(prefix + "stride")) h->stride = *v;
        if (auto v = r.integer<std::size_t>(prefix + "n_best")) h->n_best = *v;
        if (auto v = r.integer<std::size_t>(prefix + "max_answer_length")) h->max_answer_length = *v;
    }

    if (auto m = r.str("eval.mode")) {
        if (*m == "plain") cfg.eval.mode = EvalMode::Plain;
        else if (*m == "chunked") cfg.eval.mode = EvalMode::Chunked;
        else throw ConfigError("eval.mode", "expected plain or chunked");
    }
    set_if(cfg.eval.max_total_tokens, r.integer<std::size_t>("eval.max_total_tokens"));
    set_if(cfg.adapter_command, r.str("adapter.command"));

    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("", "config file not found: " + path.string());
    const fs::path abs = fs::absolute(path).lexically_normal();
    PipelineConfig cfg = parse_config_text(io::read_file(abs), abs.parent_path());
    cfg.source_path = abs;
    return cfg;
}

}  // namespace toptrain
