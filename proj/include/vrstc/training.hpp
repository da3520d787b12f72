#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "vrstc/checkpoint.hpp"
#include "vrstc/data.hpp"
#include "vrstc/losses.hpp"
#include "vrstc/occlusion.hpp"
#include "vrstc/reid.hpp"
#include "vrstc/stcnet.hpp"

namespace vrstc::training {

// Receives one JSON record per optimization step.
using MetricsSink = std::function<void(const nlohmann::json&)>;

struct ReidTrainConfig {
    reid::Profile profile = reid::Profile::tiny;
    bool nonlocal = false;
    int batch_size = 32;
    int track_length = 4;
    int epochs = 150;
    double learning_rate = 3e-4;
    double lr_decay = 0.1;
    int decay_every = 50;
    double weight_decay = 5e-4;
    // Tracks drawn from each training tracklet per epoch.
    int samples_per_tracklet = 1;
    bool mirror = true;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const ReidTrainConfig& c);
void from_json(const nlohmann::json& j, ReidTrainConfig& c);

struct EpochStats {
    int epoch = 0;
    double loss = 0;
    double accuracy = 0;
    double learning_rate = 0;
};

struct ReidTrainResult {
    ReidCheckpoint checkpoint;
    std::vector<EpochStats> history;
    std::vector<double> step_losses;
};

// Video classifier on the training split: per-frame backbone, temporal
// average pooling, cross-entropy. `init` fine-tunes from matching parameters.
ReidTrainResult train_reid(const VideoDataset& dataset, const ReidTrainConfig& config, const MetricsSink& sink = {},
                           const ReidCheckpoint* init = nullptr);

// The guider / feature extractor: train_reid without non-local blocks.
ReidTrainResult pretrain_reid(const VideoDataset& dataset, ReidTrainConfig config, const MetricsSink& sink = {});

struct AblationFlags {
    bool temporal = true;
    stcnet::TemporalVariant variant = stcnet::TemporalVariant::attention;
    bool local_disc = true;
    bool global_disc = true;
    bool guider = true;

    // spa, spa+tem, spa+ae, spa+tae, spa+tem+ld, spa+tem+ld+gd, full
    static AblationFlags preset(const std::string& name);
    bool spatial_only() const { return !temporal && !local_disc && !global_disc && !guider; }
    void validate() const;
};

void to_json(nlohmann::json& j, const AblationFlags& f);
void from_json(const nlohmann::json& j, AblationFlags& f);

struct StcnetTrainConfig {
    reid::Profile profile = reid::Profile::tiny;
    // A full desk-scale run; the pipeline shortens it to fit its time budget.
    int steps = 3000;
    int batch_size = 16;
    double learning_rate = 5e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    losses::LossWeights weights;
    AblationFlags flags;
    int heldout_samples = 48;
    // Log the held-out masked L1 every this many steps; 0 disables.
    int heldout_every = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const StcnetTrainConfig& c);
void from_json(const nlohmann::json& j, StcnetTrainConfig& c);

struct StepLosses {
    int step = 0;
    double reconstruction = 0;
    double global_adversarial = 0;
    double local_adversarial = 0;
    double guider = 0;
    double total = 0;
    double discriminator_global = 0;
    double discriminator_local = 0;

    nlohmann::json to_json() const;
    bool finite() const;
};

struct StcnetTrainResult {
    stcnet::StcnetBundle bundle;
    std::vector<StepLosses> log;
    double heldout_l1_initial = 0;
    double heldout_l1_final = 0;
    std::uint64_t guider_checksum_before = 0;
    std::uint64_t guider_checksum_after = 0;
};

// Nearest unflagged frames strictly before and after `index`; the frame
// itself stands in when a side has none.
std::pair<int, int> select_adjacent_frames(int length, int index, const std::set<int>& occluded);

// Flagged frame indices per tracklet id.
std::map<int, std::set<int>> occluded_frames(const std::vector<OcclusionRecord>& records);

// Trains on unflagged training frames with one random region band masked per
// sample. `guider` may be null when the guider term is disabled.
StcnetTrainResult train_stcnet(const VideoDataset& dataset, const std::vector<OcclusionRecord>& flagged,
                               stcnet::Guider guider, const StcnetTrainConfig& config, const MetricsSink& sink = {});

// Mean absolute error inside the masked band after completion, over a fixed
// sample of unflagged held-out frames.
double heldout_masked_l1(stcnet::StcnetBundle& bundle, const VideoDataset& dataset,
                         const std::vector<OcclusionRecord>& flagged, int samples, std::uint64_t seed);

// Rewrites every flagged region with the STCnet completion and copies the
// rest verbatim. The new manifest names `checkpoint_id` as its source.
DatasetManifest complete_dataset(const VideoDataset& dataset, const std::vector<OcclusionRecord>& flagged,
                                 stcnet::StcnetBundle& bundle, const std::filesystem::path& out_root,
                                 const std::string& checkpoint_id);

struct EmbeddingSet {
    torch::Tensor vectors; // (N, D)
    std::vector<int> identities;
    std::vector<int> cameras;
    std::vector<int> tracklets;
};

using FrameFilter = std::function<std::vector<int>(const Tracklet&)>;

EmbeddingSet embed_split(const VideoDataset& dataset, Split split, reid::ReidNet& model,
                         const FrameFilter& keep = {});

reid::RetrievalMetrics evaluate_embeddings(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                                           bool cross_camera);

reid::RetrievalMetrics evaluate_reid(const VideoDataset& dataset, reid::ReidNet& model);

// Drops frames with any region scored below tau before pooling; a video that
// would lose every frame keeps its best-scored frames.
reid::RetrievalMetrics evaluate_with_discard(const VideoDataset& dataset, reid::ReidNet& model,
                                             const occlusion::ScoreTables& tables, double tau);

} // namespace vrstc::training
