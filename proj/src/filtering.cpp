#include "toptrain/filtering.hpp"

#include <unicode/regex.h>

#include <algorithm>
#include <cmath>

#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/match_counter.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

BlockPattern BlockPattern::parse(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ConfigError("pattern_blocklist", "entry \"" + spec + "\" needs a prefix: or term: kind");
    const std::string kind = spec.substr(0, colon);
    BlockPattern p;
    p.value = spec.substr(colon + 1);
    if (kind == "prefix") {
        p.kind = Kind::Prefix;
    } else if (kind == "term") {
        p.kind = Kind::Term;
    } else {
        throw ConfigError("pattern_blocklist", "unknown kind \"" + kind + "\" in \"" + spec + "\"");
    }
    if (p.value.empty()) throw ConfigError("pattern_blocklist", "empty pattern in \"" + spec + "\"");
    return p;
}

std::string BlockPattern::to_string() const { return (kind == Kind::Prefix ? "prefix:" : "term:") + value; }

FilterConfig FilterConfig::defaults() {
    FilterConfig cfg;
    cfg.regex_rules = {R"([^\p{L}\p{N}\s\-'/.,])"};
    cfg.pattern_blocklist = {BlockPattern::parse("prefix:http"), BlockPattern::parse("prefix:https"),
                             BlockPattern::parse("prefix:www"), BlockPattern::parse("term:baby")};
    cfg.min_chars = 3;
    return cfg;
}

void FilterConfig::validate() const {
    if (min_chars < 1) throw ConfigError("min_chars", "must be >= 1");
    if (idf_top_k && *idf_top_k < 1) throw ConfigError("idf_top_k", "must be >= 1 when present");
    for (const auto& p : pattern_blocklist)
        if (p.value.empty()) throw ConfigError("pattern_blocklist", "empty pattern");
    SurfaceFilter probe(*this);  // compiles the regexes
}

json FilterConfig::to_json() const {
    json blocks = json::array();
    for (const auto& p : pattern_blocklist) blocks.push_back(p.to_string());
    json j = {{"regex_rules", regex_rules}, {"pattern_blocklist", blocks}, {"min_chars", min_chars}};
    j["idf_top_k"] = idf_top_k ? json(*idf_top_k) : json(nullptr);
    return j;
}

FilterConfig FilterConfig::from_json(const json& j) {
    FilterConfig cfg;
    cfg.regex_rules = j.at("regex_rules").get<std::vector<std::string>>();
    for (const auto& s : j.at("pattern_blocklist")) cfg.pattern_blocklist.push_back(BlockPattern::parse(s.get<std::string>()));
    cfg.min_chars = j.at("min_chars").get<std::size_t>();
    if (j.contains("idf_top_k") && !j.at("idf_top_k").is_null()) cfg.idf_top_k = j.at("idf_top_k").get<std::size_t>();
    return cfg;
}

std::string FilterConfig::hash() const { return sha256_hex(io::dump(to_json())); }

json FilterReport::to_json() const {
    return {{"input_count", input_count}, {"kept_count", kept_count}, {"removed", removed}};
}

void save_filter_report(const FilterReport& report, const std::filesystem::path& path) {
    io::write_file(path, report.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct SurfaceFilter::Impl {
    struct Block {
        std::string id;
        BlockPattern pattern;
        std::string folded;
    };
    struct Regex {
        std::string id;
        std::unique_ptr<icu::RegexPattern> pattern;
    };
    std::vector<Block> blocks;
    std::vector<Regex> regexes;
    std::size_t min_chars = 1;

    bool block_hits(const Block& b, const std::string& folded_surface) const {
        if (b.pattern.kind == BlockPattern::Kind::Prefix) return folded_surface.rfind(b.folded, 0) == 0;
        for (auto at = folded_surface.find(b.folded); at != std::string::npos; at = folded_surface.find(b.folded, at + 1))
            if (text::at_token_boundary(folded_surface, at, at + b.folded.size())) return true;
        return false;
    }

    bool regex_hits(const Regex& r, const std::string& surface) const {
        UErrorCode status = U_ZERO_ERROR;
        const icu::UnicodeString input = icu::UnicodeString::fromUTF8(surface);
        std::unique_ptr<icu::RegexMatcher> m(r.pattern->matcher(input, status));
        if (U_FAILURE(status)) throw Error(std::string("regex matcher: ") + u_errorName(status));
        const bool found = m->find(status);
        if (U_FAILURE(status)) throw Error(std::string("regex find: ") + u_errorName(status));
        return found;
    }

    bool length_hits(const std::string& surface) const { return text::codepoint_length(surface) < min_chars; }
};

SurfaceFilter::SurfaceFilter(const FilterConfig& cfg) : impl_(std::make_unique<Impl>()) {
    for (const auto& p : cfg.pattern_blocklist)
        impl_->blocks.push_back({"pattern:" + p.to_string(), p, text::fold_case(p.value)});
    for (std::size_t i = 0; i < cfg.regex_rules.size(); ++i) {
        UErrorCode status = U_ZERO_ERROR;
        UParseError perr{};
        std::unique_ptr<icu::RegexPattern> pattern(
            icu::RegexPattern::compile(icu::UnicodeString::fromUTF8(cfg.regex_rules[i]), perr, status));
        if (U_FAILURE(status))
            throw ConfigError("regex_rules[" + std::to_string(i) + "]",
                              "\"" + cfg.regex_rules[i] + "\" does not compile: " + u_errorName(status) + " at offset " +
                                  std::to_string(perr.offset));
        impl_->regexes.push_back({"regex:" + std::to_string(i), std::move(pattern)});
    }
    impl_->min_chars = cfg.min_chars;
}

SurfaceFilter::~SurfaceFilter() = default;
SurfaceFilter::SurfaceFilter(SurfaceFilter&&) noexcept = default;
SurfaceFilter& SurfaceFilter::operator=(SurfaceFilter&&) noexcept = default;

std::optional<std::string> SurfaceFilter::first_rejecting_rule(const std::string& surface) const {
    const std::string folded = text::fold_case(surface);
    for (const auto& b : impl_->blocks)
        if (impl_->block_hits(b, folded)) return b.id;
    for (const auto& r : impl_->regexes)
        if (impl_->regex_hits(r, surface)) return r.id;
    if (impl_->length_hits(surface)) return std::string("min_chars");
    return std::nullopt;
}

std::vector<std::string> SurfaceFilter::rule_ids() const {
    std::vector<std::string> ids;
    for (const auto& b : impl_->blocks) ids.push_back(b.id);
    for (const auto& r : impl_->regexes) ids.push_back(r.id);
    ids.emplace_back("min_chars");
    return ids;
}

bool SurfaceFilter::rejects(const std::string& rule_id, const std::string& surface) const {
    for (const auto& b : impl_->blocks)
        if (b.id == rule_id) return impl_->block_hits(b, text::fold_case(surface));
    for (const auto& r : impl_->regexes)
        if (r.id == rule_id) return impl_->regex_hits(r, surface);
    if (rule_id == "min_chars") return impl_->length_hits(surface);
    throw ArgumentError("unknown filter rule " + rule_id);
}

std::pair<EntitySet, FilterReport> apply_surface_filters(const EntitySet& set, const FilterConfig& cfg) {
    cfg.validate();
    const SurfaceFilter filter(cfg);
    EntitySet kept = set;
    kept.entities.clear();
    FilterReport report;
    report.input_count = set.entities.size();
    for (const auto& e : set.entities) {
        if (auto rule = filter.first_rejecting_rule(e.surface)) {
            report.removed[*rule].push_back(e.surface);
        } else {
            kept.entities.push_back(e);
        }
    }
    report.kept_count = kept.entities.size();
    return {std::move(kept), std::move(report)};
}

EntitySet idf_rank(const EntitySet& set, const std::vector<SourceDocument>& docs, std::size_t top_k) {
    if (docs.empty()) throw ArgumentError("idf_rank needs at least one document");
    if (top_k < 1) throw ArgumentError("idf_rank needs top_k >= 1");

    const auto surfaces = set.surfaces();
    const BoundaryMatchCounter counter(surfaces);
    std::vector<std::string_view> views;
    views.reserve(docs.size());
    for (const auto& d : docs) views.emplace_back(d.text);
    const auto counts = counter.count(views);

    std::vector<std::size_t> order(surfaces.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (counts.doc_frequency[i] == 0)
            throw ArgumentError("entity \"" + surfaces[i] + "\" does not occur in the IDF corpus");
        order[i] = i;
    }
    // ln(N/df) is strictly decreasing in df, so rank on the integer df.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (counts.doc_frequency[a] != counts.doc_frequency[b]) return counts.doc_frequency[a] < counts.doc_frequency[b];
        return surfaces[a] < surfaces[b];
    });
    EntitySet out = set;
    out.entities.clear();
    for (std::size_t i = 0; i < std::min(top_k, order.size()); ++i) out.entities.push_back(set.entities[order[i]]);
    return out;
}

}  // namespace toptrain
