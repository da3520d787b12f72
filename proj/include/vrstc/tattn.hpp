#pragma once

#include <cstdint>

#include <torch/torch.h>

// Patch-based temporal attention: every 3x3 patch of the current-frame
// feature map is replaced by a softmax-weighted sum of the adjacent-frame
// patches, weighted by cosine similarity, and the overlapping output patches
// are folded back into a map by coverage averaging.
namespace vrstc::tattn {

inline constexpr std::int64_t kPatchSize = 3;
// Patches whose L2 norm is below this floor have zero similarity to anything.
inline constexpr double kNormFloor = 1e-8;

// One flattened patch per location, (H*W, C*3*3), ordered (c, dy, dx).
struct PatchGrid {
    torch::Tensor patches;
    std::int64_t height = 0;
    std::int64_t width = 0;
};

// Stride 1, zero padded. `map` is (C, H, W).
PatchGrid extract_patches(const torch::Tensor& map);

double patch_similarity(const torch::Tensor& f, const torch::Tensor& r);

// Softmax over the last axis, max-subtracted.
torch::Tensor attention_weights(const torch::Tensor& similarities);

// weights (..., L') over adjacent patches (L', P) -> (..., P).
torch::Tensor attend(const torch::Tensor& weights, const torch::Tensor& adjacent_patches);

struct AttentionResult {
    torch::Tensor output;  // same shape as the current map
    torch::Tensor weights; // (N, L, L'), rows indexed by current-frame location
};

// Batched layer on (N, C, H, W) maps. Differentiable with respect to both inputs.
// Similarities are multiplied by `scale` before the softmax.
AttentionResult temporal_attention(const torch::Tensor& current, const torch::Tensor& adjacent, double scale = 1.0);

// Convenience for (C, H, W) or (N, C, H, W) maps; returns only the output.
torch::Tensor temporal_attention_layer(const torch::Tensor& current, const torch::Tensor& adjacent);

} // namespace vrstc::tattn
