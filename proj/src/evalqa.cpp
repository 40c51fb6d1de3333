#include "toptrain/evalqa.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "toptrain/error.hpp"
#include "toptrain/io.hpp"
#include "toptrain/text.hpp"

namespace toptrain {

using nlohmann::json;

namespace {

bool is_answer_punct(char32_t cp) {
    if (cp < 0x80) return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
                          (cp >= 0x7B && cp <= 0x7E);
    const auto c = static_cast<UChar32>(cp);
    return u_charType(c) == U_DASH_PUNCTUATION || u_hasBinaryProperty(c, UCHAR_DASH) ||
           u_hasBinaryProperty(c, UCHAR_QUOTATION_MARK);
}

std::vector<std::string> normalized_tokens(const std::string& s) {
    std::vector<std::string> out;
    const std::string n = normalize_answer(s);
    for (const auto& span : text::whitespace_token_spans(n)) out.emplace_back(n.substr(span.begin, span.end - span.begin));
    return out;
}

double f1_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::unordered_map<std::string, long> counts;
    for (const auto& t : gold) ++counts[t];
    std::size_t common = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(pred.size());
    const double r = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2 * p * r / (p + r);
}

std::vector<std::string> golds_of(const EqaRecord& r) {
    std::vector<std::string> golds;
    if (!r.is_answerable) return golds;
    for (const auto& a : r.answers) golds.push_back(a.text);
    return golds;
}

struct Score {
    double em = 0;
    double f1 = 0;
};

Score score_one(const std::string& pred, const std::vector<std::string>& golds) {
    return {exact_match(pred, golds), token_f1(pred, golds)};
}

// Sums per-item scores split by answerability into a MetricSet.
struct Accumulator {
    double em = 0, f1 = 0, has_em = 0, has_f1 = 0;
    std::size_t n = 0, n_has = 0;

    void add(const Score& s, bool answerable) {
        em += s.em;
        f1 += s.f1;
        ++n;
        if (answerable) {
            has_em += s.em;
            has_f1 += s.f1;
            ++n_has;
        }
    }

    MetricSet result() const {
        MetricSet m;
        m.em = 100.0 * em / static_cast<double>(n);
        m.f1 = 100.0 * f1 / static_cast<double>(n);
        if (n_has > 0) {
            m.has_em = 100.0 * has_em / static_cast<double>(n_has);
            m.has_f1 = 100.0 * has_f1 / static_cast<double>(n_has);
        }
        return m;
    }
};

std::vector<const EqaRecord*> split_records(const EqaDataset& dataset, const std::string& split) {
    const auto index = index_by_id(dataset);
    std::vector<const EqaRecord*> out;
    for (const auto& id : dataset.split_ids(split)) {
        auto it = index.find(id);
        if (it == index.end()) throw ValidationError("split " + split + " names unknown question", {id});
        out.push_back(it->second);
    }
    if (out.empty()) throw ArgumentError("split " + split + " has no questions");
    return out;
}

void check_foreign(const std::map<std::string, std::vector<const Prediction*>>& by_id,
                   const std::vector<const EqaRecord*>& records, const std::string& split) {
    std::set<std::string> expected;
    for (const auto* r : records) expected.insert(r->question_id);
    std::vector<std::string> foreign;
    for (const auto& [id, _] : by_id)
        if (!expected.contains(id)) foreign.push_back(id);
    if (!foreign.empty()) throw ValidationError("predictions for questions outside split " + split, foreign);
}

json metrics_json(const MetricSet& m) {
    return {{"em", m.em},
            {"f1", m.f1},
            {"has_em", m.has_em ? json(*m.has_em) : json(nullptr)},
            {"has_f1", m.has_f1 ? json(*m.has_f1) : json(nullptr)}};
}

MetricSet metrics_from_json(const json& j) {
    MetricSet m;
    m.em = j.at("em").get<double>();
    m.f1 = j.at("f1").get<double>();
    if (!j.at("has_em").is_null()) m.has_em = j.at("has_em").get<double>();
    if (!j.at("has_f1").is_null()) m.has_f1 = j.at("has_f1").get<double>();
    return m;
}

}  // namespace

std::string normalize_answer(const std::string& input) {
    const std::string lower = text::to_lower(input);
    std::string stripped;
    stripped.reserve(lower.size());
    std::size_t pos = 0;
    while (pos < lower.size()) {
        const std::size_t here = pos;
        const char32_t cp = text::decode_next(lower, pos);
        if (!is_answer_punct(cp)) stripped.append(lower, here, pos - here);
    }
    std::string out;
    for (const auto& span : text::whitespace_token_spans(stripped)) {
        const std::string_view tok(stripped.data() + span.begin, span.end - span.begin);
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out += ' ';
        out.append(tok);
    }
    return out;
}

double exact_match(const std::string& pred, const std::vector<std::string>& golds) {
    const std::string p = normalize_answer(pred);
    if (golds.empty()) return p.empty() ? 1.0 : 0.0;
    for (const auto& g : golds)
        if (p == normalize_answer(g)) return 1.0;
    return 0.0;
}

double token_f1(const std::string& pred, const std::vector<std::string>& golds) {
    const auto p = normalized_tokens(pred);
    if (golds.empty()) return p.empty() ? 1.0 : 0.0;
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_tokens(p, normalized_tokens(g)));
    return best;
}

EvalReport evaluate(const std::vector<Prediction>& preds, const EqaDataset& dataset, const std::string& split) {
    const auto records = split_records(dataset, split);
    std::map<std::string, std::vector<const Prediction*>> by_id;
    for (const auto& p : preds) {
        if (p.chunk_index) throw ValidationError("plain evaluation got a chunked prediction", {p.question_id});
        by_id[p.question_id].push_back(&p);
    }
    check_foreign(by_id, records, split);

    std::vector<std::string> missing, duplicate;
    for (const auto* r : records) {
        auto it = by_id.find(r->question_id);
        if (it == by_id.end()) missing.push_back(r->question_id);
        else if (it->second.size() > 1) duplicate.push_back(r->question_id);
    }
    if (!missing.empty()) throw ValidationError("missing predictions", missing);
    if (!duplicate.empty()) throw ValidationError("duplicate predictions", duplicate);

    // Records are scored in split order so the floating-point sums do not
    // depend on the order of `preds`.
    Accumulator acc;
    for (const auto* r : records) acc.add(score_one(by_id.at(r->question_id).front()->answer_text, golds_of(*r)), r->is_answerable);

    EvalReport report;
    report.mode = EvalMode::Plain;
    report.scores = acc.result();
    report.n_total = acc.n;
    report.n_answerable = acc.n_has;
    return report;
}

std::vector<ContextWindow> segment_windows(const std::string& question, const std::string& context,
                                           std::size_t max_total_tokens) {
    const std::size_t fixed = 3 + text::count_whitespace_tokens(question);  // "Question:", "Context:", "Answer:"
    if (max_total_tokens <= fixed)
        throw ArgumentError("max_total_tokens " + std::to_string(max_total_tokens) +
                            " leaves no room for context (question prompt needs " + std::to_string(fixed) + ")");
    const std::size_t width = max_total_tokens - fixed;
    const std::string q = text::trim(question);
    auto render = [&](const std::string& chunk) { return "Question: " + q + " Context: " + chunk + " Answer:"; };

    const auto spans = text::whitespace_token_spans(context);
    std::vector<ContextWindow> out;
    if (spans.empty()) {
        out.push_back({0, 0, "", render("")});
        return out;
    }
    for (std::size_t first = 0; first < spans.size(); first += width) {
        const std::size_t last = std::min(first + width, spans.size()) - 1;
        ContextWindow w;
        w.first_token = first;
        w.token_count = last - first + 1;
        w.chunk = context.substr(spans[first].begin, spans[last].end - spans[first].begin);
        w.prompt = render(w.chunk);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<std::string> segment_context(const std::string& question, const std::string& context,
                                         std::size_t max_total_tokens) {
    std::vector<std::string> prompts;
    for (auto& w : segment_windows(question, context, max_total_tokens)) prompts.push_back(std::move(w.prompt));
    return prompts;
}

EvalReport chunked_decoder_eval(const std::vector<Prediction>& preds, const EqaDataset& dataset,
                                const std::string& split, std::optional<std::size_t> max_total_tokens) {
    const auto records = split_records(dataset, split);
    std::map<std::string, std::vector<const Prediction*>> by_id;
    for (const auto& p : preds) {
        if (!p.chunk_index) throw ValidationError("chunked evaluation got a prediction without chunk_index", {p.question_id});
        by_id[p.question_id].push_back(&p);
    }
    check_foreign(by_id, records, split);

    std::vector<std::string> missing, uneven;
    for (const auto* r : records) {
        auto it = by_id.find(r->question_id);
        if (it == by_id.end()) {
            missing.push_back(r->question_id);
            continue;
        }
        auto& list = it->second;
        std::sort(list.begin(), list.end(), [](const Prediction* a, const Prediction* b) { return *a->chunk_index < *b->chunk_index; });
        bool ok = true;
        for (std::size_t i = 0; i < list.size(); ++i) ok = ok && *list[i]->chunk_index == i;
        if (ok && max_total_tokens)
            ok = list.size() == segment_windows(r->question, r->context, *max_total_tokens).size();
        if (!ok) uneven.push_back(r->question_id);
    }
    if (!missing.empty()) throw ValidationError("missing predictions", missing);
    if (!uneven.empty()) throw ValidationError("uneven chunk coverage", uneven);

    // Pairs are averaged within a question first, so a question split into
    // many chunks does not outweigh the others and avg_best >= overall holds.
    Accumulator overall, best;
    std::size_t pairs = 0;
    for (const auto* r : records) {
        const auto golds = golds_of(*r);
        const auto& list = by_id.at(r->question_id);
        Score top{0, 0}, sum{0, 0};
        for (const auto* p : list) {
            const Score s = score_one(p->answer_text, golds);
            sum.em += s.em;
            sum.f1 += s.f1;
            top.em = std::max(top.em, s.em);
            top.f1 = std::max(top.f1, s.f1);
        }
        const auto n = static_cast<double>(list.size());
        overall.add({sum.em / n, sum.f1 / n}, r->is_answerable);
        best.add(top, r->is_answerable);
        pairs += list.size();
    }

    EvalReport report;
    report.mode = EvalMode::Chunked;
    report.scores = overall.result();
    report.avg_best = best.result();
    report.n_total = best.n;
    report.n_answerable = best.n_has;
    report.n_pairs = pairs;
    return report;
}

json EvalReport::to_json() const {
    json j = metrics_json(scores);
    j["mode"] = mode == EvalMode::Plain ? "plain" : "chunked";
    j["n_total"] = n_total;
    j["n_answerable"] = n_answerable;
    if (mode == EvalMode::Chunked) {
        j["n_pairs"] = n_pairs;
        j["avg_best"] = metrics_json(avg_best.value_or(MetricSet{}));
    }
    return j;
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "plain") r.mode = EvalMode::Plain;
    else if (mode == "chunked") r.mode = EvalMode::Chunked;
    else throw ValidationError("unknown report mode " + mode);
    r.scores = metrics_from_json(j);
    r.n_total = j.at("n_total").get<std::size_t>();
    r.n_answerable = j.at("n_answerable").get<std::size_t>();
    if (r.mode == EvalMode::Chunked) {
        r.n_pairs = j.at("n_pairs").get<std::size_t>();
        r.avg_best = metrics_from_json(j.at("avg_best"));
    }
    return r;
}

SeedAggregate aggregate_runs(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw ArgumentError("aggregate_runs needs at least one report");
    for (const auto& r : reports)
        if (r.mode != reports.front().mode) throw ArgumentError("cannot aggregate plain and chunked reports together");

    std::map<std::string, std::vector<std::optional<double>>> values;
    auto collect = [&](const std::string& prefix, const MetricSet& m) {
        values[prefix + "em"].push_back(m.em);
        values[prefix + "f1"].push_back(m.f1);
        values[prefix + "has_em"].push_back(m.has_em);
        values[prefix + "has_f1"].push_back(m.has_f1);
    };
    for (const auto& r : reports) {
        collect("", r.scores);
        if (r.mode == EvalMode::Chunked) collect("best_", r.avg_best.value_or(MetricSet{}));
    }

    SeedAggregate agg;
    agg.mode = reports.front().mode;
    agg.run_count = reports.size();
    for (const auto& [name, xs] : values) {
        if (std::any_of(xs.begin(), xs.end(), [](const auto& x) { return !x; })) continue;
        const double n = static_cast<double>(xs.size());
        double sum = 0;
        for (const auto& x : xs) sum += *x;
        const double mean = sum / n;
        double sq = 0;
        for (const auto& x : xs) sq += (*x - mean) * (*x - mean);
        agg.metrics[name] = {mean, xs.size() == 1 ? 0.0 : std::sqrt(sq / n)};
    }
    return agg;
}

json SeedAggregate::to_json() const {
    json metrics_j = json::object();
    for (const auto& [name, ms] : metrics) metrics_j[name] = {{"mean", ms.mean}, {"std", ms.std}};
    return {{"mode", mode == EvalMode::Plain ? "plain" : "chunked"},
            {"run_count", run_count},
            {"std_kind", "population"},
            {"metrics", metrics_j}};
}

std::vector<Prediction> parse_plain_predictions(const std::string& json_text) {
    std::set<std::string> seen;
    std::vector<std::string> repeated;
    const json::parser_callback_t track = [&](int depth, json::parse_event_t event, json& parsed) {
        if (event == json::parse_event_t::key && depth == 1) {
            const auto key = parsed.get<std::string>();
            if (!seen.insert(key).second) repeated.push_back(key);
        }
        return true;
    };
    json j;
    try {
        j = json::parse(json_text, track);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("predictions file: ") + e.what(), e.byte);
    }
    if (!j.is_object()) throw ValidationError("predictions file must be a JSON object of question_id -> answer");
    if (!repeated.empty()) throw ValidationError("duplicate predictions", repeated);
    std::vector<Prediction> preds;
    std::vector<std::string> bad;
    for (const auto& [id, v] : j.items()) {
        if (!v.is_string()) {
            bad.push_back(id);
            continue;
        }
        preds.push_back({id, v.get<std::string>(), std::nullopt});
    }
    if (!bad.empty()) throw ValidationError("prediction values must be strings", bad);
    return preds;
}

std::vector<Prediction> load_plain_predictions(const std::filesystem::path& path) {
    return parse_plain_predictions(io::read_file(path));
}

std::vector<Prediction> load_chunked_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> preds;
    io::for_each_json_line(path, [&](std::size_t line, const json& j) {
        try {
            Prediction p;
            p.question_id = j.at("question_id").is_string() ? j.at("question_id").get<std::string>()
                                                             : j.at("question_id").dump();
            p.chunk_index = j.at("chunk_index").get<std::size_t>();
            p.answer_text = j.at("answer").get<std::string>();
            preds.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + " line " + std::to_string(line) + ": " + e.what());
        }
    });
    return preds;
}

void save_plain_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path) {
    json j = json::object();
    for (const auto& p : preds) {
        if (j.contains(p.question_id)) throw ValidationError("duplicate predictions", {p.question_id});
        j[p.question_id] = p.answer_text;
    }
    io::write_file(path, j.dump(2) + "\n");
}

void save_chunked_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path) {
    std::string out;
    for (const auto& p : preds) {
        if (!p.chunk_index) throw ArgumentError("chunked prediction without chunk_index for " + p.question_id);
        out += io::dump({{"question_id", p.question_id}, {"chunk_index", *p.chunk_index}, {"answer", p.answer_text}}) + "\n";
    }
    io::write_file(path, out);
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
    io::write_file(path, report.to_json().dump(2) + "\n");
}

EvalReport load_report(const std::filesystem::path& path) {
    try {
        return EvalReport::from_json(json::parse(io::read_file(path)));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace toptrain
