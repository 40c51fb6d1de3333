#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "toptrain/entities.hpp"

namespace toptrain {

struct BlockPattern {
    enum class Kind { Prefix, Term };
    Kind kind = Kind::Prefix;
    std::string value;
    bool operator==(const BlockPattern&) const = default;

    // "prefix:http" / "term:baby"
    static BlockPattern parse(const std::string& spec);
    std::string to_string() const;
};

struct FilterConfig {
    std::vector<std::string> regex_rules;  // reject on match (ICU syntax)
    std::vector<BlockPattern> pattern_blocklist;
    std::size_t min_chars = 3;  // keep surfaces with at least this many code points
    std::optional<std::size_t> idf_top_k;
    bool operator==(const FilterConfig&) const = default;

    static FilterConfig defaults();

    // Throws ConfigError naming the bad field (including regexes that do not compile).
    void validate() const;

    nlohmann::json to_json() const;
    static FilterConfig from_json(const nlohmann::json& j);
    std::string hash() const;
};

struct FilterReport {
    std::size_t input_count = 0;
    std::size_t kept_count = 0;
    std::map<std::string, std::vector<std::string>> removed;  // rule id -> surfaces

    nlohmann::json to_json() const;
};

// Compiled form of the surface rules. Rules are checked in order
// blocklist patterns, regex rules, length; the first hit names the removal.
class SurfaceFilter {
public:
    explicit SurfaceFilter(const FilterConfig& cfg);
    ~SurfaceFilter();
    SurfaceFilter(SurfaceFilter&&) noexcept;
    SurfaceFilter& operator=(SurfaceFilter&&) noexcept;

    // Id of the first rule rejecting `surface`, or nullopt to keep it.
    std::optional<std::string> first_rejecting_rule(const std::string& surface) const;

    // All rule ids in evaluation order.
    std::vector<std::string> rule_ids() const;
    // Whether rule `rule_id` alone rejects `surface`.
    bool rejects(const std::string& rule_id, const std::string& surface) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::pair<EntitySet, FilterReport> apply_surface_filters(const EntitySet& set, const FilterConfig& cfg);

// Keeps the top_k entities by idf = ln(N / df) over `docs`, df counted with
// token-boundary matching. Ties break on surface. Output is in rank order.
EntitySet idf_rank(const EntitySet& set, const std::vector<SourceDocument>& docs, std::size_t top_k);

void save_filter_report(const FilterReport& report, const std::filesystem::path& path);

}  // namespace toptrain
