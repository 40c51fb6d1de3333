#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "toptrain/dataset.hpp"
#include "toptrain/error.hpp"

using namespace toptrain;

namespace {

EqaRecord make_record(const std::string& id, const std::string& context) {
    EqaRecord r;
    r.question_id = id;
    r.question = "question " + id + "?";
    r.context = context;
    r.context_id = context_id_for(context);
    r.answers = {{context.substr(0, 4), 0}};
    return r;
}

// sizes[i] records share context i.
EqaDataset grouped(const std::vector<std::size_t>& sizes) {
    EqaDataset ds;
    ds.name = "grouped";
    std::size_t next = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g)
        for (std::size_t i = 0; i < sizes[g]; ++i)
            ds.records.push_back(make_record("q" + std::to_string(next++), "context number " + std::to_string(g)));
    return ds;
}

std::set<std::string> contexts_of(const EqaDataset& ds, const std::set<std::string>& ids) {
    std::set<std::string> out;
    for (const auto& r : ds.records)
        if (ids.count(r.question_id)) out.insert(r.context_id);
    return out;
}

}  // namespace

TEST(Parse, SingleQaAtOffsetZero) {
    const std::string text =
        R"({"data":[{"title":"t","paragraphs":[{"context":"ACE2 binds spike.","qas":[{"id":"a","question":"What binds?","answers":[{"text":"ACE2","answer_start":0}]}]}]}]})";
    const auto parsed = parse_squad_text(text, "one");
    ASSERT_EQ(parsed.dataset.records.size(), 1u);
    const auto& r = parsed.dataset.records[0];
    EXPECT_TRUE(r.is_answerable);
    EXPECT_EQ(r.question_id, "a");
    EXPECT_EQ(r.answers[0], (Answer{"ACE2", 0}));
    EXPECT_EQ(r.context_id, context_id_for("ACE2 binds spike."));
}

TEST(Parse, MiniFileRepairsAndRejects) {
    const auto parsed = parse_squad(testutil::data("mini_squad_v1.json"), "mini");
    EXPECT_EQ(parsed.report.records_seen, 11u);
    EXPECT_EQ(parsed.report.answers_seen, 11u);
    EXPECT_EQ(parsed.report.answers_consistent, 9u);
    EXPECT_EQ(parsed.report.repaired_ids, std::vector<std::string>{"103"});
    EXPECT_EQ(parsed.report.rejected_ids, std::vector<std::string>{"203"});
    const auto& ds = parsed.dataset;
    ASSERT_EQ(ds.records.size(), 10u);
    EXPECT_EQ(ds.find("203"), nullptr);
    const auto* r103 = ds.find("103");
    ASSERT_NE(r103, nullptr);
    EXPECT_TRUE(span_consistent(*r103));
    // Offsets count code points: "Müller" shifts bytes but not answer_start.
    const auto* r202 = ds.find("202");
    ASSERT_NE(r202, nullptr);
    EXPECT_EQ(r202->answers[0].char_start, 126u);
    EXPECT_TRUE(span_consistent(*r202));
    const auto* r402 = ds.find("402");
    ASSERT_NE(r402, nullptr);
    EXPECT_TRUE(span_consistent(*r402));
    for (const auto& r : ds.records) EXPECT_TRUE(r.is_answerable);
    EXPECT_NO_THROW(ds.validate());
}

TEST(Parse, RepairDisabledListsIds) {
    try {
        parse_squad(testutil::data("mini_squad_v1.json"), "mini", ParseOptions{false});
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const auto& ids = e.ids();
        EXPECT_NE(std::find(ids.begin(), ids.end(), "103"), ids.end());
        EXPECT_NE(std::find(ids.begin(), ids.end(), "203"), ids.end());
    }
}

TEST(Parse, MalformedJsonCarriesOffset) {
    try {
        parse_squad_text(R"({"data": [ {"title": )", "bad");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GT(e.offset(), 0u);
    }
}

TEST(Parse, SchemaViolationIsError) {
    EXPECT_THROW(parse_squad_text(R"({"data":[{"paragraphs":[{"qas":[]}]}]})", "x"), Error);
    EXPECT_THROW(parse_squad_text(R"({"nodata":1})", "x"), Error);
}

TEST(Parse, V2ImpossibleQuestions) {
    const auto train = parse_squad(testutil::data("mini_radqa_train.json"), "radqa").dataset;
    ASSERT_EQ(train.records.size(), 6u);
    std::vector<std::string> impossible;
    for (const auto& r : train.records)
        if (!r.is_answerable) {
            impossible.push_back(r.question_id);
            EXPECT_TRUE(r.answers.empty());
        }
    EXPECT_EQ(impossible, (std::vector<std::string>{"t2", "t5"}));
}

TEST(Parse, DuplicateIdsRejected) {
    const std::string text =
        R"({"data":[{"paragraphs":[{"context":"abc def","qas":[{"id":"x","question":"q","answers":[{"text":"abc","answer_start":0}]},{"id":"x","question":"q2","answers":[{"text":"def","answer_start":4}]}]}]}]})";
    EXPECT_THROW(parse_squad_text(text, "dup"), ValidationError);
}

TEST(Dataset, CombineSplitsDeclaresDisjointSets) {
    std::vector<std::pair<std::string, EqaDataset>> parts;
    for (const char* s : {"train", "dev", "test"})
        parts.emplace_back(s, parse_squad(testutil::data(std::string("mini_radqa_") + s + ".json"), "radqa").dataset);
    const auto ds = combine_splits("radqa", parts);
    EXPECT_EQ(ds.records.size(), 11u);
    ASSERT_TRUE(ds.declared_splits);
    EXPECT_EQ(ds.split_ids("train").size(), 6u);
    EXPECT_EQ(ds.split_ids("dev").size(), 2u);
    EXPECT_EQ(ds.split_ids("test").size(), 3u);
    EXPECT_EQ(ds.split_ids("all").size(), 11u);
    EXPECT_THROW(ds.split_ids("validation"), ArgumentError);
}

TEST(Dataset, RoundTripThroughJsonl) {
    testutil::TempDir dir;
    const auto ds = parse_squad(testutil::data("mini_squad_v1.json"), "mini").dataset;
    save_dataset_jsonl(ds, dir / "d.jsonl");
    const auto back = load_dataset_jsonl(dir / "d.jsonl", "mini");
    EXPECT_EQ(back, ds);
}

TEST(Dataset, RoundTripThroughSquadJson) {
    testutil::TempDir dir;
    const auto ds = parse_squad(testutil::data("mini_squad_v1.json"), "mini").dataset;
    {
        std::ofstream out(dir / "again.json");
        out << to_squad_json(ds).dump();
    }
    const auto again = parse_squad(dir / "again.json", "mini");
    EXPECT_EQ(again.dataset, ds);
    EXPECT_TRUE(again.report.repaired_ids.empty());
    EXPECT_EQ(again.report.answers_consistent, again.report.answers_seen);
}

TEST(Dataset, ContextIdIsNfcInsensitive) {
    EXPECT_EQ(context_id_for("caf\xC3\xA9"), context_id_for("cafe\xCC\x81"));
    EXPECT_NE(context_id_for("cafe"), context_id_for("caf\xC3\xA9"));
}

TEST(Groups, EmptyAndSmall) {
    EXPECT_TRUE(group_by_context(EqaDataset{}).empty());
    const auto groups = group_by_context(grouped({3, 1}));
    ASSERT_EQ(groups.size(), 2u);
    std::vector<std::size_t> sizes;
    for (const auto& [cid, ids] : groups) sizes.push_back(ids.size());
    std::sort(sizes.begin(), sizes.end());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 3}));
}

TEST(Holdout, TenDistinctContexts) {
    const auto ds = grouped(std::vector<std::size_t>(10, 1));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = holdout_split(ds, 0.8, seed);
        EXPECT_EQ(s.train.size(), 8u);
        EXPECT_EQ(s.test.size(), 2u);
        EXPECT_EQ(oracle::check_holdout(ds, s, 0.8, 0.8), "");
    }
}

TEST(Holdout, NineAndOneGroups) {
    const auto ds = grouped({9, 1});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = holdout_split(ds, 0.8, seed);
        EXPECT_EQ(s.train.size(), 9u) << "seed " << seed;
        EXPECT_EQ(s.test.size(), 1u) << "seed " << seed;
        EXPECT_EQ(s.test.count("q9"), 1u);
    }
}

TEST(Holdout, DeterministicAndSeedSensitive) {
    const auto ds = oracle::surrogate_dataset(300, 40, 5);
    EXPECT_EQ(holdout_split(ds, 0.8, 11), holdout_split(ds, 0.8, 11));
    bool differs = false;
    for (std::uint64_t seed = 12; seed < 20 && !differs; ++seed) differs = holdout_split(ds, 0.8, seed) != holdout_split(ds, 0.8, 11);
    EXPECT_TRUE(differs);
}

TEST(Holdout, Errors) {
    EXPECT_THROW(holdout_split(grouped({5}), 0.8, 1), ArgumentError);
    EXPECT_THROW(holdout_split(grouped({5, 5}), 0.0, 1), ArgumentError);
    EXPECT_THROW(holdout_split(grouped({5, 5}), 1.0, 1), ArgumentError);
}

TEST(Holdout, NoContextOverlapOnSurrogate) {
    const auto ds = oracle::surrogate_dataset(500, 60, 9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = holdout_split(ds, 0.8, seed);
        EXPECT_EQ(oracle::check_holdout(ds, s, 0.0, 1.0), "") << "seed " << seed;
        std::set<std::string> shared;
        const auto a = contexts_of(ds, s.train), b = contexts_of(ds, s.test);
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(shared, shared.end()));
        EXPECT_TRUE(shared.empty());
    }
}

TEST(KFold, TenContextsFiveFolds) {
    const auto ds = grouped(std::vector<std::size_t>(10, 1));
    const auto folds = kfold_split(ds, 5, 3);
    ASSERT_EQ(folds.size(), 5u);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        EXPECT_EQ(folds[i].test.size(), 2u);
        EXPECT_EQ(folds[i].train.size(), 8u);
        EXPECT_EQ(folds[i].fold_index, static_cast<int>(i));
        for (const auto& id : folds[i].test) EXPECT_TRUE(seen.insert(id).second);
    }
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_EQ(oracle::check_kfold(ds, folds, 5), "");
}

TEST(KFold, LeaveOneContextOut) {
    const auto ds = grouped({3, 2, 4});
    const auto folds = kfold_split(ds, 3, 1);
    for (const auto& f : folds) EXPECT_EQ(contexts_of(ds, f.test).size(), 1u);
    EXPECT_EQ(oracle::check_kfold(ds, folds, 3), "");
}

TEST(KFold, BalanceWithinLargestGroup) {
    const auto ds = oracle::surrogate_dataset(800, 70, 2);
    std::size_t largest = 0;
    for (const auto& [cid, ids] : group_by_context(ds)) largest = std::max(largest, ids.size());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto folds = kfold_split(ds, 5, seed);
        std::size_t lo = SIZE_MAX, hi = 0, sum = 0;
        for (const auto& f : folds) {
            lo = std::min(lo, f.test.size());
            hi = std::max(hi, f.test.size());
            sum += f.test.size();
        }
        EXPECT_EQ(sum, ds.records.size());
        EXPECT_LE(hi - lo, largest);
        EXPECT_EQ(oracle::check_kfold(ds, folds, 5), "");
    }
}

TEST(KFold, Errors) {
    EXPECT_THROW(kfold_split(grouped({1, 1, 1}), 1, 0), ArgumentError);
    EXPECT_THROW(kfold_split(grouped({1, 1, 1}), 4, 0), ArgumentError);
}

TEST(Splits, FileRoundTrip) {
    testutil::TempDir dir;
    const auto ds = oracle::surrogate_dataset(100, 20, 4);
    const auto folds = kfold_split(ds, 4, 8);
    save_splits(folds, dir / "folds.json");
    EXPECT_EQ(load_splits(dir / "folds.json"), folds);
    const std::vector<SplitAssignment> one{holdout_split(ds, 0.8, 8)};
    save_splits(one, dir / "holdout.json");
    EXPECT_EQ(load_splits(dir / "holdout.json"), one);
}

TEST(Splits, AttachDeclaresSets) {
    auto ds = grouped({2, 2, 2});
    const auto s = holdout_split(ds, 0.5, 1);
    attach_splits(ds, s);
    const auto train = ds.split_ids("train");
    EXPECT_EQ(std::set<std::string>(train.begin(), train.end()), s.train);
    EXPECT_NO_THROW(ds.validate());
}
