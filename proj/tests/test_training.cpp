#include <gtest/gtest.h>

#include "support.hpp"
#include "vrstc/checkpoint.hpp"
#include "vrstc/error.hpp"
#include "vrstc/png_io.hpp"
#include "vrstc/training.hpp"

using namespace vrstc;
using vrstc::test::TempDir;
namespace fs = std::filesystem;

namespace {

training::ReidTrainConfig quick_reid(int epochs, std::uint64_t seed = 0) {
    training::ReidTrainConfig c;
    c.epochs = epochs;
    c.decay_every = 100;
    c.batch_size = 8;
    c.seed = seed;
    return c;
}

training::StcnetTrainConfig quick_stcnet(const std::string& preset, int steps) {
    training::StcnetTrainConfig c;
    c.flags = training::AblationFlags::preset(preset);
    c.steps = steps;
    c.batch_size = 2;
    c.heldout_samples = 4;
    c.seed = 5;
    return c;
}

stcnet::Guider untrained_guider(const VideoDataset& dataset) {
    reid::ReidNetConfig c;
    c.num_classes = dataset.num_train_classes();
    return stcnet::Guider(reid::ReidNet(c));
}

// Pixels that may change when completing `records`.
std::set<std::tuple<int, int, int>> allowed_rows(const std::vector<OcclusionRecord>& records, int height) {
    std::set<std::tuple<int, int, int>> rows;
    for (const auto& r : records) {
        const auto band = region_rows(r.region, height);
        for (auto y = band.begin; y < band.end; ++y) rows.insert({r.tracklet, r.frame_index, static_cast<int>(y)});
    }
    return rows;
}

} // namespace

TEST(AdjacentFrames, WalkOutwardAndFallBack) {
    EXPECT_EQ(training::select_adjacent_frames(8, 4, {}), std::make_pair(3, 5));
    EXPECT_EQ(training::select_adjacent_frames(8, 0, {}), std::make_pair(0, 1));
    EXPECT_EQ(training::select_adjacent_frames(8, 7, {}), std::make_pair(6, 7));
    EXPECT_EQ(training::select_adjacent_frames(8, 4, {3, 5}), std::make_pair(2, 6));
    EXPECT_EQ(training::select_adjacent_frames(8, 4, {0, 1, 2, 3, 4, 5, 6, 7}), std::make_pair(4, 4));
    EXPECT_EQ(training::select_adjacent_frames(1, 0, {}), std::make_pair(0, 0));
}

TEST(AdjacentFrames, NeverReturnsAFlaggedNeighbour) {
    test::Gen gen(1);
    for (int trial = 0; trial < 200; ++trial) {
        const int length = gen.integer(1, 12);
        const int index = gen.integer(0, length - 1);
        std::set<int> occluded;
        for (int i = 0; i < length; ++i)
            if (gen.coin()) occluded.insert(i);
        const auto [prev, next] = training::select_adjacent_frames(length, index, occluded);
        EXPECT_TRUE(prev == index || (prev < index && !occluded.contains(prev)));
        EXPECT_TRUE(next == index || (next > index && !occluded.contains(next)));
        for (int i = prev + 1; i < index && prev != index; ++i) EXPECT_TRUE(occluded.contains(i));
    }
}

TEST(Ablation, PresetsAndFlagValidation) {
    EXPECT_TRUE(training::AblationFlags::preset("spa").spatial_only());
    const auto full = training::AblationFlags::preset("full");
    EXPECT_TRUE(full.temporal && full.local_disc && full.global_disc && full.guider);
    const auto tae = training::AblationFlags::preset("spa+tae");
    EXPECT_EQ(tae.variant, stcnet::TemporalVariant::temporal_autoencoder);
    EXPECT_FALSE(tae.local_disc);
    const auto ld = training::AblationFlags::preset("spa+tem+ld");
    EXPECT_TRUE(ld.local_disc && !ld.global_disc);
    try {
        training::AblationFlags::preset("everything");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
    training::AblationFlags bad = training::AblationFlags::preset("spa");
    bad.variant = stcnet::TemporalVariant::autoencoder;
    EXPECT_THROW(bad.validate(), Error);

    nlohmann::json j = full;
    EXPECT_EQ(j.get<training::AblationFlags>().guider, true);
}

TEST(ReidTraining, SingleIdentityLossIsZero) {
    TempDir dir("one");
    generate_synthetic_dataset(test::small_synth(1, 2, 6, 2), dir.path());
    auto dataset = load_dataset(dir.path());
    auto result = training::train_reid(dataset, quick_reid(1));
    for (double l : result.step_losses) EXPECT_NEAR(l, 0.0, 1e-6);
}

TEST(ReidTraining, DeterministicForAFixedSeed) {
    TempDir dir("det");
    generate_synthetic_dataset(test::small_synth(4, 2, 6, 3), dir.path());
    auto dataset = load_dataset(dir.path());
    auto a = training::train_reid(dataset, quick_reid(2, 9));
    auto b = training::train_reid(dataset, quick_reid(2, 9));
    EXPECT_EQ(a.step_losses, b.step_losses);
    EXPECT_EQ(parameter_checksum(*a.checkpoint.model), parameter_checksum(*b.checkpoint.model));
}

TEST(ReidTraining, FitsTheTrainingIdentities) {
    TempDir dir("fit");
    generate_synthetic_dataset(test::small_synth(10, 2, 8, 4), dir.path());
    auto dataset = load_dataset(dir.path());
    std::vector<nlohmann::json> records;
    auto result = training::pretrain_reid(dataset, quick_reid(20, 1), [&](const nlohmann::json& r) { records.push_back(r); });
    ASSERT_EQ(result.history.size(), 20u);
    EXPECT_GE(result.history.back().accuracy, 0.9);
    EXPECT_FALSE(result.checkpoint.model->config().nonlocal);
    EXPECT_EQ(records.size(), result.step_losses.size());
    EXPECT_TRUE(records.front().contains("loss"));
}

TEST(ReidTraining, DiscardWithVacuousTauMatchesPlainEvaluation) {
    TempDir dir("discard");
    generate_synthetic_dataset(test::small_synth(6, 2, 6, 5), dir.path());
    auto dataset = load_dataset(dir.path());
    auto model = training::train_reid(dataset, quick_reid(1)).checkpoint.model;
    occlusion::ScoreTables tables;
    for (const auto& t : dataset.tracklets()) {
        tables[t.id].scores = torch::zeros({static_cast<std::int64_t>(t.track.frames.size()), 3}, torch::kFloat64);
    }
    const auto plain = training::evaluate_reid(dataset, model);
    const auto discard = training::evaluate_with_discard(dataset, model, tables, -1.0);
    EXPECT_EQ(plain.cmc, discard.cmc);
    EXPECT_EQ(plain.map, discard.map);
}

TEST(StcnetTraining, SpatialOnlyLeavesTheRestUntouched) {
    TempDir dir("spa");
    generate_synthetic_dataset(test::small_synth(4, 2, 6, 6), dir.path());
    auto dataset = load_dataset(dir.path());
    const auto config = quick_stcnet("spa", 3);
    auto result = training::train_stcnet(dataset, dataset.occlusions(), nullptr, config);

    torch::manual_seed(config.seed);
    auto net = stcnet::StcnetConfig::for_profile(config.profile, dataset.height(), dataset.width());
    net.temporal = false;
    stcnet::StcnetBundle fresh(net);
    EXPECT_EQ(parameter_checksum(*result.bundle.temporal), parameter_checksum(*fresh.temporal));
    EXPECT_EQ(parameter_checksum(*result.bundle.local), parameter_checksum(*fresh.local));
    EXPECT_EQ(parameter_checksum(*result.bundle.global), parameter_checksum(*fresh.global));
    EXPECT_NE(parameter_checksum(*result.bundle.spatial), parameter_checksum(*fresh.spatial));
    for (const auto& s : result.log) {
        EXPECT_EQ(s.global_adversarial, 0.0);
        EXPECT_EQ(s.guider, 0.0);
    }
}

TEST(StcnetTraining, FullConfigIsFiniteAndKeepsTheGuiderFrozen) {
    TempDir dir("full");
    generate_synthetic_dataset(test::small_synth(4, 2, 6, 7), dir.path());
    auto dataset = load_dataset(dir.path());
    auto guider = untrained_guider(dataset);
    const auto before = parameter_checksum(*guider);
    std::vector<nlohmann::json> sink;
    auto result = training::train_stcnet(dataset, dataset.occlusions(), guider, quick_stcnet("full", 4),
                                         [&](const nlohmann::json& r) { sink.push_back(r); });
    ASSERT_EQ(result.log.size(), 4u);
    ASSERT_EQ(sink.size(), 4u);
    for (const auto& s : result.log) EXPECT_TRUE(s.finite());
    EXPECT_GT(result.log.front().discriminator_local, 0.0);
    EXPECT_EQ(result.guider_checksum_before, before);
    EXPECT_EQ(result.guider_checksum_after, before);
    for (const char* key : {"step", "L_r", "L_a1", "L_a2", "L_c", "total"}) EXPECT_TRUE(sink[0].contains(key)) << key;
}

TEST(StcnetTraining, GuiderTermNeedsAGuider) {
    TempDir dir("noguider");
    generate_synthetic_dataset(test::small_synth(2, 2, 4, 8), dir.path());
    auto dataset = load_dataset(dir.path());
    EXPECT_THROW(training::train_stcnet(dataset, {}, nullptr, quick_stcnet("full", 1)), Error);
}

TEST(Completion, EmptyRecordSetIsPixelIdentical) {
    TempDir src("csrc"), dst("cdst");
    generate_synthetic_dataset(test::small_synth(2, 2, 4, 9), src.path());
    auto dataset = load_dataset(src.path());
    stcnet::StcnetBundle bundle(stcnet::StcnetConfig::for_profile(reid::Profile::tiny, 64, 32));
    auto manifest = training::complete_dataset(dataset, {}, bundle, dst.path(), "ckpt");
    EXPECT_EQ(manifest.source_checkpoint, "ckpt");
    for (const auto& entry : manifest.tracklets)
        for (const auto& f : entry.frames) EXPECT_EQ(read_png(src.path() / f).data, read_png(dst.path() / f).data);
    EXPECT_EQ(load_dataset(dst.path()).tracklets().size(), dataset.tracklets().size());
}

TEST(Completion, ChangesOnlyFlaggedBands) {
    TempDir src("fsrc"), dst("fdst");
    generate_synthetic_dataset(test::small_synth(3, 2, 8, 10), src.path());
    auto dataset = load_dataset(src.path());
    const auto& flagged = dataset.occlusions();
    ASSERT_FALSE(flagged.empty());
    torch::manual_seed(3);
    stcnet::StcnetBundle bundle(stcnet::StcnetConfig::for_profile(reid::Profile::tiny, 64, 32));
    auto manifest = training::complete_dataset(dataset, flagged, bundle, dst.path(), "ckpt");
    const auto allowed = allowed_rows(flagged, dataset.height());

    int changed = 0;
    for (const auto& entry : manifest.tracklets) {
        for (std::size_t i = 0; i < entry.frames.size(); ++i) {
            const auto a = read_png(src.path() / entry.frames[i]);
            const auto b = read_png(dst.path() / entry.frames[i]);
            for (int y = 0; y < a.height; ++y)
                for (int x = 0; x < a.width; ++x)
                    for (int c = 0; c < 3; ++c) {
                        if (a.at(y, x, c) == b.at(y, x, c)) continue;
                        ++changed;
                        EXPECT_TRUE(allowed.contains({entry.id, static_cast<int>(i), y}))
                            << "tracklet " << entry.id << " frame " << i << " row " << y;
                    }
        }
    }
    EXPECT_GT(changed, 0);
    EXPECT_EQ(manifest.generator.at("kind"), "completed");
}

TEST(Checkpoints, RoundTripPreservesParameters) {
    TempDir dir("ckpt");
    torch::manual_seed(4);
    stcnet::StcnetBundle bundle(stcnet::StcnetConfig::for_profile(reid::Profile::tiny, 64, 32));
    save_stcnet_checkpoint(dir / "s.ckpt", bundle);
    auto back = load_stcnet_checkpoint(dir / "s.ckpt");
    EXPECT_EQ(parameter_checksum(*back.spatial), parameter_checksum(*bundle.spatial));
    EXPECT_EQ(parameter_checksum(*back.temporal), parameter_checksum(*bundle.temporal));
    EXPECT_EQ(parameter_checksum(*back.local), parameter_checksum(*bundle.local));
    EXPECT_EQ(parameter_checksum(*back.global), parameter_checksum(*bundle.global));

    reid::ReidNetConfig c;
    c.nonlocal = true;
    c.num_classes = 3;
    ReidCheckpoint reid{reid::ReidNet(c), {{0, 0}, {2, 1}, {5, 2}}};
    save_reid_checkpoint(dir / "r.ckpt", reid);
    auto loaded = load_reid_checkpoint(dir / "r.ckpt");
    EXPECT_EQ(parameter_checksum(*loaded.model), parameter_checksum(*reid.model));
    EXPECT_EQ(loaded.label_map, reid.label_map);
    EXPECT_TRUE(loaded.model->config().nonlocal);
    EXPECT_THROW(load_stcnet_checkpoint(dir / "r.ckpt"), Error);
}
