#pragma once

#include <array>
#include <functional>
#include <map>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "vrstc/data.hpp"
#include "vrstc/reid.hpp"

namespace vrstc::occlusion {

inline constexpr double kDefaultTau = 0.89;

struct RegionFeature {
    torch::Tensor vector; // (D) float64
    int frame = 0;
    Region region = Region::upper;
};

// (T, 3, H, W) frames in completion range -> (T, C, h, w) feature maps.
using FeatureExtractor = std::function<torch::Tensor(const torch::Tensor&)>;

// Final feature maps of a trained re-ID backbone, evaluated frame by frame.
FeatureExtractor backbone_extractor(reid::ReidNet model);

// (T, C, h, w) -> (T, 3, C); row bands follow region_rows() on the map height.
torch::Tensor band_pool(const torch::Tensor& maps);

// One vector per (frame, region), frame-major.
std::vector<RegionFeature> region_features(const Track& track, const FeatureExtractor& extractor);

// Temporal mean of the region's vectors.
torch::Tensor video_region_prototype(const std::vector<RegionFeature>& features, Region region);

struct RegionScoreTable {
    torch::Tensor scores; // (T, 3) float64, cosine to the region prototype

    std::int64_t frames() const { return scores.size(0); }
    double at(std::int64_t frame, Region region) const;
};

// Zero-norm vectors score 0 with a warning.
RegionScoreTable region_scores(const std::vector<RegionFeature>& features,
                               const std::array<torch::Tensor, 3>& prototypes);

RegionScoreTable score_track(const Track& track, const FeatureExtractor& extractor);

struct FlaggedRegion {
    int frame = 0;
    Region region = Region::upper;
    auto operator<=>(const FlaggedRegion&) const = default;
};

// Entries strictly below tau.
std::vector<FlaggedRegion> locate_occlusions(const RegionScoreTable& table, double tau);

using ScoreTables = std::map<int, RegionScoreTable>; // by tracklet id

ScoreTables score_dataset(const VideoDataset& dataset, const FeatureExtractor& extractor);
std::vector<OcclusionRecord> flag_dataset(const ScoreTables& tables, double tau);

nlohmann::json scores_to_json(const ScoreTables& tables);
ScoreTables scores_from_json(const nlohmann::json& j);

// ROC AUC of (-score) as a detector of the ground-truth occluded entries,
// restricted to tracklets present in `tables`. Ties count one half.
double detection_auc(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth);

struct DetectionQuality {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

DetectionQuality detection_quality(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth,
                                   double tau);

struct TauCalibration {
    double tau = kDefaultTau;
    DetectionQuality quality;
    std::vector<std::pair<double, DetectionQuality>> sweep;
};

// Picks the candidate with the best F1 (first one on ties).
TauCalibration calibrate_tau(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth,
                             const std::vector<double>& candidates);

std::vector<double> default_tau_grid();

} // namespace vrstc::occlusion
