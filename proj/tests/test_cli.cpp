#include <gtest/gtest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "support.hpp"
#include "vrstc/cli.hpp"
#include "vrstc/config.hpp"
#include "vrstc/error.hpp"
#include "vrstc/occlusion.hpp"

using namespace vrstc;
using vrstc::test::TempDir;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Captured {
    int code = 0;
    std::string err;
};

Captured run(std::vector<std::string> args) {
    std::ostringstream err, out;
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    args.insert(args.begin(), "--quiet");
    Captured c;
    c.code = cli::dispatch(args);
    std::cerr.rdbuf(old_err);
    std::cout.rdbuf(old_out);
    c.err = err.str();
    return c;
}

fs::path small_config(const TempDir& dir) {
    json j = {{"synth", {{"identities", 4}, {"tracklets_per_identity", 2}, {"frames_per_tracklet", 6}}},
              {"pretrain", {{"epochs", 1}, {"batch_size", 8}}}};
    write_json_file(dir / "config.json", j);
    return dir / "config.json";
}

json embedding(std::vector<double> v, int identity, int camera) {
    return {{"vector", v}, {"identity", identity}, {"camera", camera}};
}

} // namespace

TEST(Cli, UnknownCommandIsAUsageError) {
    auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("vrstc-error: usage:"), std::string::npos) << r.err;
    EXPECT_NE(run({}).code, 0);
}

TEST(Cli, BadConfigIsAConfigError) {
    TempDir dir("badcfg");
    write_json_file(dir / "c.json", json{{"synth", {{"identities", 2}}}, {"learning_speed", 3}});
    auto r = run({"synth", "--config", (dir / "c.json").string(), "--out", (dir / "d").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("vrstc-error: config:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("learning_speed"), std::string::npos);

    std::ofstream(dir / "broken.json") << "{ not json";
    r = run({"synth", "--config", (dir / "broken.json").string(), "--out", (dir / "d").string()});
    EXPECT_NE(r.err.find("vrstc-error: config:"), std::string::npos) << r.err;
}

TEST(Cli, MissingInputIsNamed) {
    TempDir dir("missing");
    auto r = run({"evaluate", "--data", (dir / "nowhere").string(), "--checkpoint", (dir / "x.ckpt").string(), "--out",
                  (dir / "e").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("vrstc-error: io:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("x.ckpt"), std::string::npos) << r.err;
}

TEST(Cli, PerfectEmbeddingsRankFirst) {
    TempDir dir("emb");
    json j = {{"query", {embedding({1, 0, 0}, 0, 0), embedding({0, 1, 0}, 1, 0)}},
              {"gallery", {embedding({0.9, 0.1, 0}, 0, 1), embedding({0, 1, 0.1}, 1, 1), embedding({0, 0, 1}, 2, 1)}}};
    write_json_file(dir / "emb.json", j);
    auto r = run({"evaluate", "--embeddings", (dir / "emb.json").string(), "--out", (dir / "e").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = read_json_file(dir / "e" / "report.json");
    EXPECT_EQ(report.at("rank1").get<double>(), 1.0);
    EXPECT_EQ(report.at("mAP").get<double>(), 1.0);
    EXPECT_TRUE(fs::exists(dir / "e" / "report.txt"));
    EXPECT_TRUE(fs::exists(dir / "e" / "run_manifest.json"));
}

TEST(Cli, ConfigDefaultsAndSeeds) {
    auto c = PipelineConfig::defaults();
    EXPECT_DOUBLE_EQ(c.tau, 0.89);
    c.apply_seed(10);
    EXPECT_EQ(c.synth.seed, 10u);
    EXPECT_NE(c.pretrain.seed, c.reid.seed);
    json j = c;
    PipelineConfig back = PipelineConfig::defaults();
    from_json(j, back);
    EXPECT_EQ(back.reid.seed, c.reid.seed);
    c.tau = 2;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Cli, StagesWriteManifestsAndScoreHonoursTau) {
    TempDir dir("stages");
    const auto config = small_config(dir).string();
    const auto data = (dir / "data").string(), pre = (dir / "pre").string(), score = (dir / "score").string();
    ASSERT_EQ(run({"synth", "--config", config, "--seed", "4", "--out", data}).code, 0);
    ASSERT_EQ(run({"pretrain", "--config", config, "--data", data, "--out", pre}).code, 0);
    auto r = run({"score", "--config", config, "--data", data, "--checkpoint", pre + "/reid.ckpt", "--tau", "0.89",
                  "--out", score});
    ASSERT_EQ(r.code, 0) << r.err;

    for (const auto& d : {data, pre, score}) {
        const auto m = read_json_file(fs::path(d) / "run_manifest.json");
        EXPECT_TRUE(m.contains("command"));
        EXPECT_TRUE(m.contains("seed"));
        EXPECT_TRUE(m.contains("timestamp"));
    }
    EXPECT_EQ(read_json_file(fs::path(pre) / "run_manifest.json").at("checkpoints").size(), 1u);

    const auto tables = occlusion::scores_from_json(read_json_file(fs::path(score) / "scores.json"));
    std::vector<OcclusionRecord> expected;
    for (const auto& [id, table] : tables) {
        for (const auto& f : occlusion::locate_occlusions(table, 0.89)) expected.push_back({id, f.frame, f.region});
    }
    auto written = occlusions_from_json(read_json_file(fs::path(score) / "occlusions.json"));
    std::sort(expected.begin(), expected.end());
    std::sort(written.begin(), written.end());
    EXPECT_EQ(written, expected);
    EXPECT_EQ(read_json_file(fs::path(score) / "score_report.json").at("tau").get<double>(), 0.89);
}
