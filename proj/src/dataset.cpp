#include "toptrain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/rng.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

namespace {

// Memoizes context ids; datasets repeat each context once per question.
class ContextIdCache {
public:
    const std::string& get(const std::string& context) {
        auto it = ids_.find(context);
        if (it == ids_.end()) it = ids_.emplace(context, context_id_for(context)).first;
        return it->second;
    }

private:
    std::unordered_map<std::string, std::string> ids_;
};

std::string id_string(const json& v, const char* what) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    throw ValidationError(std::string("schema: ") + what + " must be a string or integer");
}

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
        throw ValidationError("schema: missing \"" + std::string(key) + "\" in " + where);
    return obj.at(key);
}

std::optional<std::string> slice_codepoints(const std::string& s, std::size_t cp_start, std::size_t cp_len) {
    const std::size_t b = text::byte_offset_of(s, cp_start);
    if (b == std::string::npos) return std::nullopt;
    std::size_t e = b;
    for (std::size_t i = 0; i < cp_len; ++i) {
        if (e >= s.size()) return std::nullopt;
        text::decode_next(s, e);
    }
    return s.substr(b, e - b);
}

bool answer_consistent(const std::string& context, const Answer& a) {
    const auto slice = slice_codepoints(context, a.char_start, text::codepoint_length(a.text));
    return slice && *slice == a.text;
}

struct GroupInfo {
    std::string context_id;
    std::vector<std::string> ids;
};

std::vector<GroupInfo> shuffled_groups_largest_first(const EqaDataset& dataset, std::uint64_t seed) {
    std::vector<GroupInfo> groups;
    for (auto& [cid, ids] : group_by_context(dataset)) groups.push_back({cid, ids});
    seeded_shuffle(std::span<GroupInfo>(groups), seed);
    std::stable_sort(groups.begin(), groups.end(),
                     [](const GroupInfo& a, const GroupInfo& b) { return a.ids.size() > b.ids.size(); });
    return groups;
}

json ids_json(const std::set<std::string>& ids) { return json(std::vector<std::string>(ids.begin(), ids.end())); }

std::set<std::string> ids_from(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("split file: missing \"") + key + "\"");
    auto v = j.at(key).get<std::vector<std::string>>();
    return {v.begin(), v.end()};
}

}  // namespace

std::string context_id_for(const std::string& context) { return sha256_hex(text::nfc(context)); }

bool span_consistent(const EqaRecord& record) {
    return std::all_of(record.answers.begin(), record.answers.end(),
                       [&](const Answer& a) { return answer_consistent(record.context, a); });
}

const EqaRecord* EqaDataset::find(const std::string& question_id) const {
    for (const auto& r : records)
        if (r.question_id == question_id) return &r;
    return nullptr;
}

std::unordered_map<std::string, const EqaRecord*> index_by_id(const EqaDataset& dataset) {
    std::unordered_map<std::string, const EqaRecord*> index;
    index.reserve(dataset.records.size());
    for (const auto& r : dataset.records) index.emplace(r.question_id, &r);
    return index;
}

std::vector<std::string> EqaDataset::split_ids(const std::string& split) const {
    if (split == "all") {
        std::vector<std::string> ids;
        ids.reserve(records.size());
        for (const auto& r : records) ids.push_back(r.question_id);
        return ids;
    }
    if (declared_splits) {
        auto it = declared_splits->find(split);
        if (it != declared_splits->end()) return it->second;
    }
    throw ArgumentError("unknown split \"" + split + "\" for dataset " + name);
}

void EqaDataset::validate() const {
    std::unordered_set<std::string> seen;
    std::vector<std::string> dupes;
    std::vector<std::string> bad_spans;
    std::vector<std::string> bad_flags;
    ContextIdCache cache;
    std::vector<std::string> bad_context_ids;
    for (const auto& r : records) {
        if (!seen.insert(r.question_id).second) dupes.push_back(r.question_id);
        if (r.is_answerable == r.answers.empty()) bad_flags.push_back(r.question_id);
        if (!span_consistent(r)) bad_spans.push_back(r.question_id);
        if (cache.get(r.context) != r.context_id) bad_context_ids.push_back(r.question_id);
    }
    if (!dupes.empty()) throw ValidationError("duplicate question ids", dupes);
    if (!bad_flags.empty()) throw ValidationError("is_answerable disagrees with answers", bad_flags);
    if (!bad_spans.empty()) throw ValidationError("answer span mismatch", bad_spans);
    if (!bad_context_ids.empty()) throw ValidationError("context_id is not the context hash", bad_context_ids);
    if (declared_splits) {
        std::unordered_map<std::string, std::string> owner;
        std::vector<std::string> overlap;
        std::vector<std::string> unknown;
        for (const auto& [split, ids] : *declared_splits) {
            for (const auto& id : ids) {
                if (!seen.count(id)) unknown.push_back(id);
                if (!owner.emplace(id, split).second) overlap.push_back(id);
            }
        }
        if (!unknown.empty()) throw ValidationError("split lists unknown question ids", unknown);
        if (!overlap.empty()) throw ValidationError("declared splits overlap", overlap);
    }
}

ParsedDataset parse_squad_text(const std::string& json_text, const std::string& name, const ParseOptions& options) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
    }
    ParsedDataset out;
    out.dataset.name = name;
    auto& report = out.report;
    ContextIdCache cache;
    std::unordered_set<std::string> seen_ids;
    std::vector<std::string> mismatched;
    std::vector<std::string> duplicates;

    const json& data = require(root, "data", "root object");
    if (!data.is_array()) throw ValidationError("schema: \"data\" must be an array");
    for (std::size_t a = 0; a < data.size(); ++a) {
        const json& paragraphs = require(data[a], "paragraphs", "data[" + std::to_string(a) + "]");
        for (std::size_t p = 0; p < paragraphs.size(); ++p) {
            const std::string where = "data[" + std::to_string(a) + "].paragraphs[" + std::to_string(p) + "]";
            const std::string context = require(paragraphs[p], "context", where).get<std::string>();
            const std::string& cid = cache.get(context);
            for (const json& qa : require(paragraphs[p], "qas", where)) {
                EqaRecord rec;
                rec.question_id = id_string(require(qa, "id", where + ".qas"), "qas.id");
                rec.question = require(qa, "question", where + ".qas").get<std::string>();
                rec.context = context;
                rec.context_id = cid;
                ++report.records_seen;
                if (!seen_ids.insert(rec.question_id).second) {
                    duplicates.push_back(rec.question_id);
                    continue;
                }
                const bool impossible = qa.value("is_impossible", false);
                bool rejected = false;
                bool repaired = false;
                if (!impossible && qa.contains("answers")) {
                    for (const json& aj : qa.at("answers")) {
                        Answer ans;
                        ans.text = require(aj, "text", where + ".answers").get<std::string>();
                        const json& start = require(aj, "answer_start", where + ".answers");
                        ans.char_start = start.is_string() ? std::stoul(start.get<std::string>())
                                                           : start.get<std::size_t>();
                        ++report.answers_seen;
                        if (answer_consistent(context, ans)) {
                            ++report.answers_consistent;
                        } else if (!options.repair_spans) {
                            mismatched.push_back(rec.question_id);
                        } else {
                            const auto at = ans.text.empty() ? std::string::npos : context.find(ans.text);
                            if (at == std::string::npos) {
                                rejected = true;
                            } else {
                                ans.char_start = text::codepoint_index_of(context, at);
                                repaired = true;
                            }
                        }
                        rec.answers.push_back(std::move(ans));
                    }
                }
                rec.is_answerable = !rec.answers.empty();
                if (rejected) {
                    report.rejected_ids.push_back(rec.question_id);
                    continue;
                }
                if (repaired) report.repaired_ids.push_back(rec.question_id);
                out.dataset.records.push_back(std::move(rec));
            }
        }
    }
    if (!duplicates.empty()) throw ValidationError("duplicate question ids", duplicates);
    if (!mismatched.empty()) throw ValidationError("answer span mismatch (repair disabled)", mismatched);
    return out;
}

ParsedDataset parse_squad(const std::filesystem::path& path, const std::string& name, const ParseOptions& options) {
    return parse_squad_text(io::read_file(path), name, options);
}

EqaDataset parse_eqa_json(const std::filesystem::path& path, const std::string& name, const ParseOptions& options) {
    return parse_squad(path, name, options).dataset;
}

EqaDataset combine_splits(const std::string& name, const std::vector<std::pair<std::string, EqaDataset>>& parts) {
    EqaDataset out;
    out.name = name;
    out.declared_splits.emplace();
    for (const auto& [split, ds] : parts) {
        auto& ids = (*out.declared_splits)[split];
        for (const auto& r : ds.records) {
            ids.push_back(r.question_id);
            out.records.push_back(r);
        }
    }
    out.validate();
    return out;
}

json record_to_json(const EqaRecord& r) {
    json answers = json::array();
    for (const auto& a : r.answers) answers.push_back({{"text", a.text}, {"char_start", a.char_start}});
    return {{"question_id", r.question_id}, {"question", r.question}, {"context_id", r.context_id},
            {"context", r.context},         {"answers", answers},     {"is_answerable", r.is_answerable}};
}

EqaRecord record_from_json(const json& j) {
    EqaRecord r;
    r.question_id = j.at("question_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.context_id = j.at("context_id").get<std::string>();
    r.context = j.at("context").get<std::string>();
    for (const auto& a : j.at("answers")) r.answers.push_back({a.at("text").get<std::string>(), a.at("char_start").get<std::size_t>()});
    r.is_answerable = j.at("is_answerable").get<bool>();
    return r;
}

json to_squad_json(const EqaDataset& dataset) {
    json paragraphs = json::array();
    const std::string* current = nullptr;
    for (const auto& r : dataset.records) {
        if (!current || *current != r.context) {
            paragraphs.push_back({{"context", r.context}, {"qas", json::array()}});
            current = &r.context;
        }
        json answers = json::array();
        for (const auto& a : r.answers) answers.push_back({{"text", a.text}, {"answer_start", a.char_start}});
        paragraphs.back()["qas"].push_back(
            {{"id", r.question_id}, {"question", r.question}, {"answers", answers}, {"is_impossible", !r.is_answerable}});
    }
    return {{"version", "v2.0"}, {"data", json::array({{{"title", dataset.name}, {"paragraphs", paragraphs}}})}};
}

void save_dataset_jsonl(const EqaDataset& dataset, const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : dataset.records) {
        out += io::dump(record_to_json(r));
        out += '\n';
    }
    io::write_file(path, out);
}

EqaDataset load_dataset_jsonl(const std::filesystem::path& path, const std::string& name) {
    EqaDataset ds;
    ds.name = name;
    io::for_each_json_line(path, [&](std::size_t line, const json& j) {
        try {
            ds.records.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    ds.validate();
    return ds;
}

std::map<std::string, std::vector<std::string>> group_by_context(const EqaDataset& dataset) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& r : dataset.records) groups[r.context_id].push_back(r.question_id);
    return groups;
}

SplitAssignment holdout_split(const EqaDataset& dataset, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ArgumentError("train_fraction must lie strictly between 0 and 1");
    const auto groups = shuffled_groups_largest_first(dataset, seed);
    if (groups.size() < 2) throw ArgumentError("holdout split needs at least two distinct contexts");

    const double target = train_fraction * static_cast<double>(dataset.records.size());
    SplitAssignment split;
    std::size_t train_count = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const bool last = i + 1 == groups.size();
        const bool keep_for_test = last && split.test.empty();
        auto& target_set = (static_cast<double>(train_count) < target && !keep_for_test) ? split.train : split.test;
        if (&target_set == &split.train) train_count += groups[i].ids.size();
        target_set.insert(groups[i].ids.begin(), groups[i].ids.end());
    }
    return split;
}

std::vector<SplitAssignment> kfold_split(const EqaDataset& dataset, int k, std::uint64_t seed) {
    if (k < 2) throw ArgumentError("k-fold split needs k >= 2");
    const auto groups = shuffled_groups_largest_first(dataset, seed);
    if (groups.size() < static_cast<std::size_t>(k))
        throw ArgumentError("k-fold split needs at least k distinct contexts (have " + std::to_string(groups.size()) + ")");

    std::vector<std::set<std::string>> buckets(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < groups.size(); ++i)
        buckets[i % buckets.size()].insert(groups[i].ids.begin(), groups[i].ids.end());

    std::vector<SplitAssignment> folds(buckets.size());
    for (std::size_t f = 0; f < buckets.size(); ++f) {
        folds[f].fold_index = static_cast<int>(f);
        folds[f].test = buckets[f];
        for (std::size_t b = 0; b < buckets.size(); ++b)
            if (b != f) folds[f].train.insert(buckets[b].begin(), buckets[b].end());
    }
    return folds;
}

json split_to_json(const SplitAssignment& split) {
    json j = {{"train", ids_json(split.train)}, {"test", ids_json(split.test)}};
    if (split.dev) j["dev"] = ids_json(*split.dev);
    if (split.fold_index) j["fold_index"] = *split.fold_index;
    return j;
}

SplitAssignment split_from_json(const json& j) {
    SplitAssignment s;
    s.train = ids_from(j, "train");
    s.test = ids_from(j, "test");
    if (j.contains("dev")) s.dev = ids_from(j, "dev");
    if (j.contains("fold_index")) s.fold_index = j.at("fold_index").get<int>();
    return s;
}

void save_splits(const std::vector<SplitAssignment>& splits, const std::filesystem::path& path) {
    json j;
    if (splits.size() == 1 && !splits.front().fold_index) {
        j = split_to_json(splits.front());
    } else {
        j = {{"folds", json::array()}};
        for (const auto& s : splits) j["folds"].push_back(split_to_json(s));
    }
    io::write_file(path, j.dump(2) + "\n");
}

std::vector<SplitAssignment> load_splits(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("malformed split file " + path.string() + ": " + e.what(), e.byte);
    }
    std::vector<SplitAssignment> out;
    if (j.contains("folds")) {
        for (const auto& f : j.at("folds")) out.push_back(split_from_json(f));
    } else {
        out.push_back(split_from_json(j));
    }
    return out;
}

void attach_splits(EqaDataset& dataset, const SplitAssignment& split) {
    SplitMap declared;
    auto assign = [&](const std::string& name, const std::set<std::string>& ids) {
        auto& list = declared[name];
        for (const auto& r : dataset.records)
            if (ids.count(r.question_id)) list.push_back(r.question_id);
    };
    assign("train", split.train);
    assign("test", split.test);
    if (split.dev) assign("dev", *split.dev);
    dataset.declared_splits = std::move(declared);
    dataset.validate();
}

}  // namespace toptrain
