#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "mock_server.hpp"
#include "test_util.hpp"
#include "toptrain/error.hpp"
#include "toptrain/hashing.hpp"
#include "toptrain/io.hpp"
#include "toptrain/orchestrator.hpp"

using namespace toptrain;
namespace fs = std::filesystem;

namespace {

std::string covid_ini(const fs::path& run_dir, const std::string& extra = "") {
    return "[pipeline]\nprofile = covidqa\nrun_dir = " + run_dir.string() + "\n[dataset]\npath = " +
           testutil::data("mini_squad_v1.json").string() + "\n" + extra;
}

PipelineConfig covid(const fs::path& run_dir, const std::string& extra = "") {
    return parse_config_text(covid_ini(run_dir, extra), run_dir.parent_path());
}

std::vector<std::string> statuses(const RunResult& r) {
    std::vector<std::string> out;
    for (const auto& s : r.stages) out.push_back(s.stage + "=" + to_string(s.status));
    return out;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

std::string adapter_command() { return "python3 " + testutil::support("fake_adapter.py").string(); }

}  // namespace

TEST(Manifest, CovidqaValues) {
    testutil::TempDir dir;
    const auto cfg = covid(dir / "run");
    fs::create_directories(dir / "run/corpus");
    std::ofstream(dir / "run/corpus/final.txt") << "text\n";
    const auto m = emit_manifest(cfg, "corpus/final.txt", 41);
    EXPECT_EQ(m.ft2.batch_size, 40u);
    EXPECT_EQ(m.ft2.epochs, 1u);
    EXPECT_EQ(m.ft2.max_answer_length, 1000u);
    EXPECT_DOUBLE_EQ(m.ft2.learning_rate, 2e-5);
    EXPECT_EQ(m.pretrain, (StageHyperparameters{40, 5e-5, 3, std::nullopt, std::nullopt, std::nullopt, std::nullopt}));
    EXPECT_EQ(m.ft1, (StageHyperparameters{16, 2e-5, 3, 384, 128, 20, 30}));
    EXPECT_EQ(m.seed, 41u);
    EXPECT_EQ(m.generation_seed, 42u);
    EXPECT_EQ(m.general_dataset, "squad");
    EXPECT_FALSE(m.include_prompt);
    EXPECT_EQ(TrainingManifest::from_json(m.to_json()), m);

    const auto j = m.to_json();
    std::vector<std::string> order;
    for (const auto& s : j.at("stages")) order.push_back(s.at("name"));
    EXPECT_EQ(order, (std::vector<std::string>{"pretrain", "ft1", "ft2", "predict"}));
    EXPECT_EQ(j.at("stages")[0].at("corpus_path"), "corpus/final.txt");
    EXPECT_EQ(j.at("stages")[3].at("eval_split"), "test");
}

TEST(Manifest, RadqaAndSeeds) {
    testutil::TempDir dir;
    std::string ini = "[pipeline]\nprofile = radqa\nrun_dir = " + (dir / "run").string() + "\n[dataset]\n";
    for (const char* s : {"train", "dev", "test"})
        ini += std::string(s) + "_path = " + testutil::data(std::string("mini_radqa_") + s + ".json").string() + "\n";
    const auto cfg = parse_config_text(ini, dir.path());
    fs::create_directories(dir / "run/corpus");
    std::ofstream(dir / "run/corpus/final.txt") << "text\n";
    const auto ms = emit_manifests(cfg, "corpus/final.txt");
    ASSERT_EQ(ms.size(), 3u);
    EXPECT_EQ(ms[0].seed, 41u);
    EXPECT_EQ(ms[1].seed, 42u);
    EXPECT_EQ(ms[2].seed, 43u);
    for (const auto& m : ms) {
        EXPECT_DOUBLE_EQ(m.ft2.learning_rate, 3e-5);
        EXPECT_EQ(m.ft2.batch_size, 16u);
        EXPECT_EQ(m.generation_seed, 42u);
        EXPECT_EQ(m.general_dataset, "squad_v2");
    }
    EXPECT_THROW(emit_manifest(cfg, "corpus/missing.txt", 41), ArgumentError);
}

TEST(Ledger, AppendAndQuery) {
    testutil::TempDir dir;
    RunLedger ledger(dir / "ledger.jsonl");
    EXPECT_EQ(ledger.next_run_id(), "run-1");
    ledger.append({{"event", "run_start"}, {"run_id", "run-1"}});
    StageRecord r;
    r.run_id = "run-1";
    r.stage = "dataset";
    r.input_hash = "abc";
    r.outputs = {{"dataset/dataset.jsonl", "h"}};
    ledger.append(r.to_json());
    r.status = StageStatus::Failed;
    r.input_hash = "def";
    ledger.append(r.to_json());
    EXPECT_EQ(ledger.next_run_id(), "run-2");
    EXPECT_EQ(ledger.run_ids(), std::vector<std::string>{"run-1"});
    const auto good = ledger.last_good("dataset");
    ASSERT_TRUE(good);
    EXPECT_EQ(good->input_hash, "abc");
    EXPECT_EQ(ledger.stages_of("run-1").size(), 2u);
    EXPECT_FALSE(ledger.last_good("score"));
    EXPECT_EQ(ledger.events().size(), 3u);
}

TEST(HashPath, FilesAndDirectories) {
    testutil::TempDir dir;
    fs::create_directories(dir / "d/sub");
    std::ofstream(dir / "d/a") << "1";
    std::ofstream(dir / "d/sub/b") << "2";
    const auto h1 = hash_path(dir / "d");
    EXPECT_EQ(hash_path(dir / "d/a"), sha256_hex("1"));
    std::ofstream(dir / "d/sub/b") << "3";
    EXPECT_NE(hash_path(dir / "d"), h1);
}

TEST(MockAnswer, PicksOverlappingSentence) {
    const std::string ctx = "The sky is blue. The spike binds ACE2 on cells. Rain falls.";
    EXPECT_EQ(mock_answer("What does the spike bind?", ctx), "The spike binds ACE2 on cells.");
    EXPECT_EQ(mock_answer("q", ""), "");
}

TEST(Pipeline, MockRunCompletesSevenStagesThenSkips) {
    testutil::TempDir dir;
    const auto cfg = covid(dir / "run");
    const auto first = run_pipeline(cfg);
    ASSERT_TRUE(first.ok) << (first.stages.empty() ? "" : first.stages.back().error);
    EXPECT_EQ(first.run_id, "run-1");
    EXPECT_EQ(statuses(first), (std::vector<std::string>{"dataset=completed", "extract=completed", "filter=completed",
                                                          "generate=completed", "transform=completed",
                                                          "manifest=completed", "score=completed"}));
    for (const char* f : {"dataset/dataset.jsonl", "dataset/splits.json", "entities/filtered.jsonl", "corpus/final.jsonl",
                          "corpus/final.txt", "manifests/seed-41.json", "manifests/seed-43.json", "reports/mock.json",
                          "reports/aggregate.json", "ledger.jsonl"})
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;

    const auto second = run_pipeline(cfg);
    ASSERT_TRUE(second.ok);
    EXPECT_EQ(second.run_id, "run-2");
    for (const auto& s : second.stages) EXPECT_EQ(s.status, StageStatus::Skipped) << s.stage;

    fs::remove(dir / "run/reports/mock.json");
    const auto third = run_pipeline(cfg);
    ASSERT_TRUE(third.ok);
    for (const auto& s : third.stages)
        EXPECT_EQ(s.status, s.stage == "score" ? StageStatus::Completed : StageStatus::Skipped) << s.stage;
    EXPECT_TRUE(fs::exists(dir / "run/reports/mock.json"));

    // Ledger holds every event, in order.
    RunLedger ledger(dir / "run/ledger.jsonl");
    EXPECT_EQ(ledger.run_ids(), (std::vector<std::string>{"run-1", "run-2", "run-3"}));
    EXPECT_EQ(ledger.events().size(), 3u * (7 + 2));
}

TEST(Pipeline, OutputHashesMatchDisk) {
    testutil::TempDir dir;
    const auto r = run_pipeline(covid(dir / "run"));
    ASSERT_TRUE(r.ok);
    for (const auto& s : r.stages)
        for (const auto& [rel, hash] : s.outputs) EXPECT_EQ(hash_path(dir / "run" / rel), hash) << rel;
}

TEST(Pipeline, ChangedSeedInvalidatesFromGenerate) {
    testutil::TempDir dir;
    ASSERT_TRUE(run_pipeline(covid(dir / "run")).ok);
    const auto before = slurp(dir / "run/corpus/final.jsonl");
    const auto r = run_pipeline(covid(dir / "run", "[generation]\nseed = 7\n"));
    ASSERT_TRUE(r.ok);
    for (const auto& s : r.stages) {
        // The mock scorer reads only the dataset, so it does not rerun either.
        const bool upstream = s.stage == "dataset" || s.stage == "extract" || s.stage == "filter" || s.stage == "score";
        EXPECT_EQ(s.status, upstream ? StageStatus::Skipped : StageStatus::Completed) << s.stage;
    }
    EXPECT_NE(slurp(dir / "run/corpus/final.jsonl"), before);
}

TEST(Pipeline, DeterministicAcrossRunDirs) {
    testutil::TempDir dir;
    ASSERT_TRUE(run_pipeline(covid(dir / "a")).ok);
    ASSERT_TRUE(run_pipeline(covid(dir / "b")).ok);
    for (const char* f : {"corpus/final.jsonl", "corpus/final.txt", "entities/filtered.jsonl", "reports/mock.json",
                          "manifests/seed-42.json", "dataset/splits.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Pipeline, StopAfterAndResume) {
    testutil::TempDir dir;
    const auto cfg = covid(dir / "run");
    RunOptions opt;
    opt.stop_after = "filter";
    const auto partial = run_pipeline(cfg, opt);
    ASSERT_TRUE(partial.ok);
    EXPECT_EQ(partial.stages.size(), 3u);
    EXPECT_FALSE(fs::exists(dir / "run/corpus"));

    RunOptions resume;
    resume.resume_run_id = partial.run_id;
    const auto rest = run_pipeline(cfg, resume);
    ASSERT_TRUE(rest.ok);
    EXPECT_EQ(rest.run_id, "run-1");
    EXPECT_EQ(rest.stages[0].status, StageStatus::Skipped);
    EXPECT_EQ(rest.stages[3].status, StageStatus::Completed);

    RunOptions bad;
    bad.resume_run_id = "run-99";
    EXPECT_THROW(run_pipeline(cfg, bad), ArgumentError);
    RunOptions bad_stage;
    bad_stage.stop_after = "pretrain";
    EXPECT_THROW(run_pipeline(cfg, bad_stage), ArgumentError);
}

TEST(Pipeline, UnreachableGenerationBackendFailsGenerate) {
    testutil::TempDir dir;
    const auto cfg = covid(dir / "run", "[generation]\nbackend = http\nurl = " + testutil::dead_url() + "\nretry_budget = 0\n");
    const auto r = run_pipeline(cfg);
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(statuses(r), (std::vector<std::string>{"dataset=completed", "extract=completed", "filter=completed",
                                                      "generate=failed"}));
    EXPECT_FALSE(r.stages.back().error.empty());
    const auto events = RunLedger(dir / "run/ledger.jsonl").events();
    EXPECT_EQ(events.back().at("status"), "failed");
}

TEST(Pipeline, HoldoutAndKfoldSplitsOnDisk) {
    testutil::TempDir dir;
    RunOptions opt;
    opt.stop_after = "dataset";
    ASSERT_TRUE(run_pipeline(covid(dir / "h"), opt).ok);
    const auto holdout = load_splits(dir / "h/dataset/splits.json");
    ASSERT_EQ(holdout.size(), 1u);
    EXPECT_EQ(holdout[0].train.size() + holdout[0].test.size(), 10u);
    ASSERT_TRUE(run_pipeline(covid(dir / "k", "split = kfold\nk = 2\nfold = 1\n"), opt).ok);
    EXPECT_EQ(load_splits(dir / "k/dataset/folds.json").size(), 2u);
    const auto chosen = load_splits(dir / "k/dataset/splits.json");
    ASSERT_EQ(chosen.size(), 1u);
    EXPECT_EQ(chosen[0].fold_index, 1);
}

TEST(Pipeline, ChunkedEvaluationWithMock) {
    testutil::TempDir dir;
    const auto r = run_pipeline(covid(dir / "run", "[eval]\nmode = chunked\nmax_total_tokens = 24\n"));
    ASSERT_TRUE(r.ok) << r.stages.back().error;
    EXPECT_TRUE(fs::exists(dir / "run/predictions/mock.jsonl"));
    const auto rep = load_report(dir / "run/reports/mock.json");
    EXPECT_EQ(rep.mode, EvalMode::Chunked);
    EXPECT_GT(rep.n_pairs, rep.n_total);
    EXPECT_GE(rep.avg_best->f1, rep.scores.f1);
}

TEST(Pipeline, AdapterStagesWithFake) {
    testutil::TempDir dir;
    const auto cfg = covid(dir / "run", "[training]\nseeds = 1, 2\n[adapter]\ncommand = " + adapter_command() + "\n");
    const auto r = run_pipeline(cfg);
    ASSERT_TRUE(r.ok) << r.stages.back().error;
    EXPECT_EQ(r.stages.size(), 10u);
    for (const char* f : {"adapter/seed-1/pretrain/result.json", "adapter/seed-2/finetune/result.json",
                          "adapter/seed-2/predict/predictions.json", "reports/seed-1.json", "reports/seed-2.json"})
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    // The fake answers with gold spans.
    const auto rep = load_report(dir / "run/reports/seed-1.json");
    EXPECT_EQ(rep.scores.em, 100.0);
    const auto agg = nlohmann::json::parse(slurp(dir / "run/reports/aggregate.json"));
    EXPECT_EQ(agg.at("run_count"), 2);

    const auto again = run_pipeline(cfg);
    for (const auto& s : again.stages) EXPECT_EQ(s.status, StageStatus::Skipped) << s.stage;
}

TEST(Pipeline, AdapterFailureStopsDownstream) {
    testutil::TempDir dir;
    const auto cfg = covid(dir / "run", "[training]\nseeds = 1\n[adapter]\ncommand = " + adapter_command() + "\n");
    setenv("FAKE_ADAPTER_FAIL", "finetune", 1);
    const auto r = run_pipeline(cfg);
    unsetenv("FAKE_ADAPTER_FAIL");
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.stages.back().stage, "finetune");
    EXPECT_EQ(r.stages.back().status, StageStatus::Failed);
    // Primary artifacts are untouched and the next run picks up at finetune.
    const auto corpus = slurp(dir / "run/corpus/final.jsonl");
    const auto next = run_pipeline(cfg);
    ASSERT_TRUE(next.ok) << next.stages.back().error;
    for (const auto& s : next.stages) {
        const bool redo = s.stage == "finetune" || s.stage == "predict" || s.stage == "score";
        EXPECT_EQ(s.status, redo ? StageStatus::Completed : StageStatus::Skipped) << s.stage;
    }
    EXPECT_EQ(slurp(dir / "run/corpus/final.jsonl"), corpus);
}

TEST(Pipeline, RadqaDeclaredSplitsEndToEnd) {
    testutil::TempDir dir;
    std::string ini = "[pipeline]\nprofile = radqa\nrun_dir = " + (dir / "run").string() + "\n[dataset]\n";
    for (const char* s : {"train", "dev", "test"})
        ini += std::string(s) + "_path = " + testutil::data(std::string("mini_radqa_") + s + ".json").string() + "\n";
    ini += "[generation]\nper_entity = 2\n";
    const auto r = run_pipeline(parse_config_text(ini, dir.path()));
    ASSERT_TRUE(r.ok) << r.stages.back().error;
    const auto rep = load_report(dir / "run/reports/mock.json");
    EXPECT_EQ(rep.n_total, 3u);
    EXPECT_EQ(rep.n_answerable, 2u);
    const auto corpus = load_corpus(dir / "run/corpus/final.jsonl");
    EXPECT_EQ(corpus.stats.per_style.at("clinical-report"), corpus.docs.size());
}
