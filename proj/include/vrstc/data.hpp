#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <torch/types.h>

#include "json.hpp"

namespace vrstc {

// Three fixed horizontal bands of a pedestrian frame.
enum class Region : int { upper = 0, middle = 1, lower = 2 };

inline constexpr std::array<Region, 3> kRegions{Region::upper, Region::middle, Region::lower};

std::string_view to_string(Region region);
Region region_from_string(std::string_view name);

// Half-open row interval.
struct RowBand {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    std::int64_t rows() const { return end - begin; }
};

// Bands are [0, H/3), [H/3, 2*(H/3)), [2*(H/3), H) with integer division; the
// lower band absorbs the remainder.
RowBand region_rows(Region region, std::int64_t height);

enum class PixelRange {
    completion, // [-1, 1]
    reid,       // per-channel standardized
};

struct Frame {
    torch::Tensor pixels; // float32 (3, H, W)
    PixelRange range = PixelRange::completion;
    int identity = 0;
    int camera = 0;
    int index = 0;
};

struct Track {
    std::vector<Frame> frames;

    std::int64_t length() const { return static_cast<std::int64_t>(frames.size()); }
    bool empty() const { return frames.empty(); }
    // (T, 3, H, W)
    torch::Tensor stacked() const;
    // Throws unless frames share identity, camera and size and indices increase.
    void validate() const;
};

struct RegionMask {
    Region region = Region::upper;
    torch::Tensor mask; // float32 (H, W), 1 = occluded

    static RegionMask make(Region region, std::int64_t height, std::int64_t width);
};

// Union of band masks, float32 (H, W).
torch::Tensor union_mask(const std::vector<Region>& regions, std::int64_t height, std::int64_t width);

Frame apply_region_mask(const Frame& frame, const RegionMask& mask);

// Completion range -> re-ID standardization, both directions. Works on any
// tensor whose channel axis is third from the end.
torch::Tensor to_reid_range(const torch::Tensor& completion_pixels);
torch::Tensor to_completion_range(const torch::Tensor& reid_pixels);

struct OcclusionRecord {
    int tracklet = 0;
    int frame_index = 0;
    Region region = Region::upper;

    auto operator<=>(const OcclusionRecord&) const = default;
};

nlohmann::json occlusions_to_json(const std::vector<OcclusionRecord>& records);
std::vector<OcclusionRecord> occlusions_from_json(const nlohmann::json& array);

enum class Split { train, query, gallery };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct TrackletEntry {
    int id = 0;
    int identity = 0;
    int camera = 0;
    Split split = Split::train;
    std::vector<std::string> frames;            // relative to the manifest root
    std::map<int, std::string> clean_frames;    // frame index -> unoccluded rendering
};

struct DatasetManifest {
    static constexpr int kVersion = 1;

    std::filesystem::path root;
    int height = 0;
    int width = 0;
    std::vector<TrackletEntry> tracklets;
    std::vector<OcclusionRecord> occlusions;
    std::optional<std::string> source_checkpoint;
    nlohmann::json generator; // free-form provenance

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j, const std::filesystem::path& root);

    void save() const;
    static DatasetManifest load(const std::filesystem::path& root);
};

struct SynthConfig {
    int identities = 20;
    int tracklets_per_identity = 4;
    int frames_per_tracklet = 16;
    int height = 64;
    int width = 32;
    int cameras = 2;
    double occlusion_rate = 0.25;
    double train_fraction = 0.5;
    double noise_sigma = 4.0; // on the 0..255 scale
    // Share of occluders that are another identity walking past; the rest
    // are textured clutter.
    double passer_by_fraction = 0.5;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const SynthConfig& config);
void from_json(const nlohmann::json& j, SynthConfig& config);

DatasetManifest generate_synthetic_dataset(const SynthConfig& config, const std::filesystem::path& root);

struct Tracklet {
    int id = 0;
    int identity = 0; // contiguous 0..K-1 over the whole dataset
    int camera = 0;
    Split split = Split::train;
    Track track;
};

// Decoded dataset. Immutable after load.
class VideoDataset {
public:
    VideoDataset(DatasetManifest manifest, std::vector<Tracklet> tracklets);

    const DatasetManifest& manifest() const { return manifest_; }
    const std::vector<Tracklet>& tracklets() const { return tracklets_; }
    const Tracklet& tracklet(int id) const;

    int num_identities() const { return num_identities_; }
    int num_cameras() const { return num_cameras_; }
    int height() const { return manifest_.height; }
    int width() const { return manifest_.width; }

    // Indices into tracklets().
    std::vector<std::size_t> indices(Split split) const;

    // Classifier label space over the training identities, 0..K_train-1.
    int num_train_classes() const { return static_cast<int>(train_labels_.size()); }
    int train_label(int identity) const;

    // Frame-level ground truth for the synthetic generator (empty otherwise).
    const std::vector<OcclusionRecord>& occlusions() const { return manifest_.occlusions; }

private:
    DatasetManifest manifest_;
    std::vector<Tracklet> tracklets_;
    std::map<int, std::size_t> by_id_;
    std::map<int, int> train_labels_;
    int num_identities_ = 0;
    int num_cameras_ = 0;
};

VideoDataset load_dataset(const std::filesystem::path& root);

// `length` consecutive frames from a uniformly drawn offset; short tracklets
// repeat cyclically.
Track sample_track(const Track& tracklet, int length, std::mt19937_64& rng);

} // namespace vrstc
