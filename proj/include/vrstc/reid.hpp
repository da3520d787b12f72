#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "vrstc/data.hpp"

namespace vrstc::reid {

enum class Profile { tiny, paper };

std::string to_string(Profile profile);
Profile profile_from_string(const std::string& name);

// Where a non-local block follows a residual block: stage index and block index
// inside the stage, both 0-based.
struct NonLocalPlacement {
    int stage = 0;
    int block = 0;
    auto operator<=>(const NonLocalPlacement&) const = default;
};

struct ReidNetConfig {
    Profile profile = Profile::tiny;
    bool nonlocal = false;
    int num_classes = 1;
    int height = 64; // input resolution
    int width = 32;

    // Derived from the profile when nonlocal is set.
    std::vector<NonLocalPlacement> nonlocal_placements() const;
};

void to_json(nlohmann::json& j, const ReidNetConfig& config);
void from_json(const nlohmann::json& j, ReidNetConfig& config);

// Residual spacetime self-attention over (B, T, C, H, W) features with an
// embedded-Gaussian affinity. The output projection is a 1x1 conv followed by
// batch norm whose scale starts at zero, so a fresh block is the identity.
class NonLocalBlockImpl : public torch::nn::Module {
public:
    explicit NonLocalBlockImpl(std::int64_t channels, std::int64_t reduction = 2);

    torch::Tensor forward(const torch::Tensor& x);
    // Also returns the (B, THW, THW) attention matrix.
    std::pair<torch::Tensor, torch::Tensor> forward_with_weights(const torch::Tensor& x);

    torch::nn::Conv2d theta{nullptr}, phi{nullptr}, g{nullptr}, out{nullptr};
    torch::nn::BatchNorm2d out_norm{nullptr};

private:
    std::int64_t inner_;
};
TORCH_MODULE(NonLocalBlock);

// Per-frame CNN with optional non-local blocks between residual blocks.
// Input (B, T, 3, H, W) in re-ID range; output (B, T, C, h, w).
class BackboneImpl : public torch::nn::Module {
public:
    explicit BackboneImpl(const ReidNetConfig& config);

    torch::Tensor forward(const torch::Tensor& frames);
    std::int64_t feature_dim() const { return feature_dim_; }
    std::int64_t stride() const { return stride_; }

private:
    struct Stage {
        std::vector<torch::nn::AnyModule> blocks;
        std::vector<NonLocalBlock> nonlocal; // parallel to blocks, null when absent
    };
    torch::nn::Sequential stem_{nullptr};
    std::vector<Stage> stages_;
    std::int64_t feature_dim_ = 0;
    std::int64_t stride_ = 1;
};
TORCH_MODULE(Backbone);

// Backbone + spatial and temporal average pooling + identity classifier.
class ReidNetImpl : public torch::nn::Module {
public:
    explicit ReidNetImpl(const ReidNetConfig& config);

    // (B, T, 3, H, W) re-ID range -> (B, T, C, h, w)
    torch::Tensor feature_maps(const torch::Tensor& frames);
    // -> (B, C), temporal mean of per-frame pooled features
    torch::Tensor video_features(const torch::Tensor& frames);
    // -> (B, K)
    torch::Tensor logits(const torch::Tensor& frames);
    torch::Tensor classify_features(const torch::Tensor& features);

    const ReidNetConfig& config() const { return config_; }
    std::int64_t feature_dim() const { return backbone->feature_dim(); }

    Backbone backbone{nullptr};
    torch::nn::Linear classifier{nullptr};

private:
    ReidNetConfig config_;
};
TORCH_MODULE(ReidNet);

struct VideoEmbedding {
    torch::Tensor vector; // (D)
    int identity = 0;
    int camera = 0;
    int tracklet = 0;
};

// Whole-track embedding in evaluation mode. Frames are in completion range.
VideoEmbedding video_embedding(const Track& track, ReidNet& model, int tracklet_id = 0);

struct RankingResult {
    torch::Tensor distances;                // (Q, G) float64
    std::vector<std::vector<int>> rankings; // per query, gallery indices by ascending distance
};

torch::Tensor pairwise_distances(const torch::Tensor& queries, const torch::Tensor& gallery);
// ||q||^2 + ||g||^2 - 2 q.g, clamped at zero, then square-rooted.
torch::Tensor pairwise_distances_expanded(const torch::Tensor& queries, const torch::Tensor& gallery);

// Stable ascending ranking, ties broken by gallery index.
RankingResult retrieve(const torch::Tensor& queries, const torch::Tensor& gallery);

struct RetrievalMetrics {
    std::vector<double> cmc; // cmc[r - 1] = CMC at rank r, r = 1..G
    double map = 0.0;
    int evaluated_queries = 0;
    int excluded_queries = 0; // no valid match in the gallery

    double rank(int r) const;
};

// With `cross_camera`, gallery items sharing both identity and camera with the
// query are ignored.
RetrievalMetrics cmc_map(const RankingResult& result, const std::vector<int>& query_labels,
                         const std::vector<int>& gallery_labels, const std::vector<int>& query_cameras,
                         const std::vector<int>& gallery_cameras, bool cross_camera = true);

// Report columns: CMC at ranks 1, 5, 10, 20 and mAP.
nlohmann::json metrics_report(const RetrievalMetrics& metrics);

} // namespace vrstc::reid
