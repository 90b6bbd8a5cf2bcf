// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"
#include "ullava/cli.hpp"
#include "ullava/config.hpp"
#include "ullava/data.hpp"

using namespace ullava;
namespace fs = std::filesystem;

namespace {

const char* kSmallModel =
    "seed = 3\n"
    "model.image_size = 32\nmodel.patch_size = 8\nmodel.n_frames = 2\nmodel.d_vis = 16\n"
    "model.d_lm = 32\nmodel.n_layers = 1\nmodel.n_heads = 2\nmodel.max_sequence_length = 64\n"
    "model.d_prompt = 16\nmodel.mask_channels = 4\nmodel.d_box = 16\nmodel.seed = 7\n";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Outcome {
    int code;
    std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "ullava");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path write_config(const support::TempDir& dir, const std::string& extra) {
    const fs::path p = dir / "run.conf";
    std::ofstream(p) << kSmallModel << extra;
    return p;
}

}  // namespace

TEST(ConfigFile, ParsesCommentsAndTypedValues) {
    const Config c = Config::parse("# header\na = 1  # trailing\n\nb = x, y ,z\nc = true\nd = 2.5\n");
    EXPECT_EQ(c.get_int("a", 0), 1);
    EXPECT_EQ(c.get_list("b", {}), (std::vector<std::string>{"x", "y", "z"}));
    EXPECT_TRUE(c.get_bool("c", false));
    EXPECT_EQ(c.get_double("d", 0), 2.5);
    EXPECT_EQ(c.get_int("missing", 42), 42);
    EXPECT_THROW(c.get_int("d", 0), Error);
}

TEST(ConfigFile, ReportsLineOfBadEntry) {
    try {
        Config::parse("a = 1\nnot an assignment\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(ConfigFile, HashIgnoresOrderAndTracksOverrides) {
    Config a = Config::parse("x = 1\ny = 2\n");
    const Config b = Config::parse("y = 2\nx = 1\n");
    EXPECT_EQ(a.hash(), b.hash());
    a.apply_override("x=5");
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_THROW(a.apply_override("novalue"), Error);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli::exit_code_for(ErrorCode::Validation), cli::kExitValidation);
    EXPECT_EQ(cli::exit_code_for(ErrorCode::Io), cli::kExitRuntime);
    EXPECT_EQ(cli::exit_code_for(ErrorCode::ClientError), cli::kExitRuntime);
    EXPECT_NE(invoke({}).code, 0);
    EXPECT_NE(invoke({"frobnicate"}).code, 0);
}

TEST(Cli, MockSalientBuildIsCompleteAndReproducible) {
    support::TempDir dir("cli");
    const auto conf = write_config(dir, "data.tasks = salient\ndata.salient_count = 10\n");
    const Outcome a = invoke({"build-data", "--config", conf.string(), "--out", (dir / "a").string(), "--mock-clients"});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto samples = data::load_dataset(dir / "a" / "salient15k.jsonl");
    EXPECT_EQ(samples.size(), 10u);
    const auto report = nlohmann::json::parse(slurp(dir / "a" / "build_report.json"));
    EXPECT_EQ(report["salient"]["emitted"], 10);
    EXPECT_TRUE(report["salient"]["skipped"].empty());
    const Outcome b = invoke({"build-data", "--config", conf.string(), "--out", (dir / "b").string(), "--mock-clients"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(dir / "a" / "salient15k.jsonl"), slurp(dir / "b" / "salient15k.jsonl"));
}

TEST(Cli, MissingSalientSourceNamesPath) {
    support::TempDir dir("cli");
    const std::string missing = (dir / "no-such-dir").string();
    const auto conf = write_config(dir, "data.tasks = caption\ndata.salient_source = " + missing + "\n");
    const Outcome r = invoke({"build-data", "--config", conf.string(), "--out", (dir / "o").string(), "--mock-clients"});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST(Cli, SalientWithoutClientsIsValidationError) {
    support::TempDir dir("cli");
    const auto conf = write_config(dir, "data.tasks = salient\n");
    const Outcome r = invoke({"build-data", "--config", conf.string(), "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, cli::kExitValidation) << r.err;
}

TEST(Cli, UnknownTaskRejected) {
    support::TempDir dir("cli");
    const auto conf = write_config(dir, "data.tasks = juggling\n");
    EXPECT_EQ(invoke({"build-data", "--config", conf.string(), "--out", (dir / "o").string()}).code,
              cli::kExitValidation);
}

class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new support::TempDir("pipeline");
        const fs::path data = *dir_ / "data";
        conf_ = write_config(*dir_,
                             "data.count = 4\ndata.tasks = caption, res, rec\ndata.res_with_box = true\n"
                             "train.stage1_data = " + (data / "caption.jsonl").string() + "\n"
                             "train.stage2_data = " + (data / "res.jsonl").string() + ", " +
                                 (data / "rec.jsonl").string() + "\n"
                             "stage1.max_steps = 50\nstage1.batch_size = 2\nstage1.learning_rate = 1e-2\n"
                             "stage2.max_steps = 5\nstage2.batch_size = 2\nstage2.learning_rate = 1e-3\n");
        build_ = invoke({"build-data", "--config", conf_.string(), "--out", data.string()});
        train_ = invoke({"train", "--config", conf_.string(), "--out", (*dir_ / "run").string()});
    }
    static void TearDownTestSuite() { delete dir_; }

    static support::TempDir* dir_;
    static fs::path conf_;
    static Outcome build_, train_;
};

support::TempDir* CliPipeline::dir_ = nullptr;
fs::path CliPipeline::conf_;
Outcome CliPipeline::build_, CliPipeline::train_;

TEST_F(CliPipeline, TrainWritesCheckpointAndHistories) {
    ASSERT_EQ(build_.code, 0) << build_.err;
    ASSERT_EQ(train_.code, 0) << train_.err;
    EXPECT_TRUE(fs::exists(*dir_ / "run" / "checkpoint.bin"));
    const auto s1 = nlohmann::json::parse(slurp(*dir_ / "run" / "stage1_report.json"));
    EXPECT_EQ(s1["history"].size(), 50u);
    const auto s2 = nlohmann::json::parse(slurp(*dir_ / "run" / "stage2_report.json"));
    EXPECT_EQ(s2["history"].size(), 5u);
}

TEST_F(CliPipeline, StageTwoAloneNeedsCheckpoint) {
    const Outcome r = invoke({"train", "--config", conf_.string(), "--out", (*dir_ / "s2").string(), "--set",
                       "train.stages=2"});
    EXPECT_EQ(r.code, cli::kExitValidation);
    const Outcome ok = invoke({"train", "--config", conf_.string(), "--out", (*dir_ / "s2").string(), "--set",
                        "train.stages=2", "--set", "stage2.max_steps=1", "--checkpoint",
                        (*dir_ / "run" / "checkpoint.bin").string()});
    EXPECT_EQ(ok.code, 0) << ok.err;
}

TEST_F(CliPipeline, OracleEvalIsPerfect) {
    const std::string ck = (*dir_ / "run" / "checkpoint.bin").string();
    const Outcome r = invoke({"eval", "--config", conf_.string(), "--checkpoint", ck, "--out", (*dir_ / "ev").string(),
                       "--set", "eval.mode=oracle", "--split", (*dir_ / "data" / "res.jsonl").string(), "--split",
                       (*dir_ / "data" / "rec.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(slurp(*dir_ / "ev" / "eval_report.json"));
    EXPECT_EQ(report["splits"][0]["ciou"], 1.0);
    EXPECT_EQ(report["splits"][1]["prec"], 100.0);
}

TEST_F(CliPipeline, ShardedEvalMatchesUnsharded) {
    Config c = Config::parse(slurp(conf_));
    c.set("eval.mode", "teacher");
    const fs::path ck = *dir_ / "run" / "checkpoint.bin";
    const std::vector<fs::path> splits{*dir_ / "data" / "res.jsonl", *dir_ / "data" / "rec.jsonl"};
    const auto one = cli::cmd_eval(c, ck, splits, *dir_ / "e1");
    c.set("eval.shards", "3");
    const auto three = cli::cmd_eval(c, ck, splits, *dir_ / "e3");
    ASSERT_EQ(one.splits.size(), three.splits.size());
    for (std::size_t i = 0; i < one.splits.size(); ++i) {
        EXPECT_EQ(one.splits[i].ciou, three.splits[i].ciou);
        EXPECT_EQ(one.splits[i].prec, three.splits[i].prec);
    }
}

TEST_F(CliPipeline, EmptySplitRejected) {
    std::ofstream(*dir_ / "empty.jsonl") << "";
    const Outcome r = invoke({"eval", "--config", conf_.string(), "--checkpoint", (*dir_ / "run" / "checkpoint.bin").string(),
                       "--out", (*dir_ / "ev2").string(), "--split", (*dir_ / "empty.jsonl").string()});
    EXPECT_EQ(r.code, cli::kExitValidation) << r.err;
}

TEST_F(CliPipeline, InferValidatesVisualAndWritesMasks) {
    const std::string ck = (*dir_ / "run" / "checkpoint.bin").string();
    const Outcome missing = invoke({"infer", "--config", conf_.string(), "--checkpoint", ck, "--out",
                             (*dir_ / "inf").string(), "--prompt", "<image> where is the red square?"});
    EXPECT_EQ(missing.code, cli::kExitValidation) << missing.err;

    const auto res = cli::load_split(*dir_ / "data" / "res.jsonl");
    const Outcome r = invoke({"infer", "--config", conf_.string(), "--checkpoint", ck, "--out", (*dir_ / "inf").string(),
                       "--image", res[0].visual_ref->path, "--prompt", res[0].turns[0].text});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("answer: "), std::string::npos);
}

TEST_F(CliPipeline, CheckpointConfigMismatchIsReported) {
    const Outcome r = invoke({"eval", "--config", conf_.string(), "--checkpoint", (*dir_ / "run" / "checkpoint.bin").string(),
                       "--out", (*dir_ / "ev3").string(), "--set", "model.d_box=8", "--split",
                       (*dir_ / "data" / "res.jsonl").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
}
