#include "vrstc/tattn.hpp"

#include <cmath>

#include "vrstc/error.hpp"

namespace F = torch::nn::functional;

namespace vrstc::tattn {

namespace {

torch::Tensor unfold_patches(const torch::Tensor& maps) {
    return F::unfold(maps, F::UnfoldFuncOptions({kPatchSize, kPatchSize}).padding(kPatchSize / 2));
}

torch::Tensor fold_patches(const torch::Tensor& patches, std::int64_t height, std::int64_t width) {
    return F::fold(patches, F::FoldFuncOptions({height, width}, {kPatchSize, kPatchSize}).padding(kPatchSize / 2));
}

// Unit-normalize columns (dim 1) of (N, P, L); sub-floor columns become zero.
torch::Tensor normalize_patches(const torch::Tensor& patches) {
    auto norms = torch::linalg_vector_norm(patches, 2, {1}, /*keepdim=*/true);
    auto unit = patches / norms.clamp_min(kNormFloor);
    return torch::where(norms < kNormFloor, torch::zeros_like(unit), unit);
}

} // namespace

PatchGrid extract_patches(const torch::Tensor& map) {
    if (map.dim() != 3 || map.size(1) < 1 || map.size(2) < 1) {
        throw Error(ErrorKind::shape, "extract_patches expects a non-empty (C, H, W) map");
    }
    auto patches = unfold_patches(map.unsqueeze(0)).squeeze(0).transpose(0, 1).contiguous();
    return {patches, map.size(1), map.size(2)};
}

double patch_similarity(const torch::Tensor& f, const torch::Tensor& r) {
    if (f.numel() != r.numel()) {
        throw Error(ErrorKind::shape, "patch sizes differ");
    }
    auto a = f.detach().to(torch::kFloat64).flatten();
    auto b = r.detach().to(torch::kFloat64).flatten();
    const double na = a.norm().item<double>();
    const double nb = b.norm().item<double>();
    if (na < kNormFloor || nb < kNormFloor) {
        return 0.0;
    }
    return a.dot(b).item<double>() / (na * nb);
}

torch::Tensor attention_weights(const torch::Tensor& similarities) {
    auto shifted = similarities - std::get<0>(similarities.max(-1, /*keepdim=*/true));
    auto e = shifted.exp();
    return e / e.sum(-1, /*keepdim=*/true);
}

torch::Tensor attend(const torch::Tensor& weights, const torch::Tensor& adjacent_patches) {
    if (adjacent_patches.dim() != 2 || weights.size(-1) != adjacent_patches.size(0)) {
        throw Error(ErrorKind::shape, "weight count does not match the number of adjacent patches");
    }
    return torch::matmul(weights, adjacent_patches);
}

AttentionResult temporal_attention(const torch::Tensor& current, const torch::Tensor& adjacent, double scale) {
    if (current.dim() != 4 || current.sizes() != adjacent.sizes()) {
        throw Error(ErrorKind::shape, "temporal attention needs two (N, C, H, W) maps of equal shape");
    }
    const auto height = current.size(2);
    const auto width = current.size(3);

    auto current_patches = unfold_patches(current);   // (N, P, L)
    auto adjacent_patches = unfold_patches(adjacent); // (N, P, L')

    auto similarity = torch::bmm(normalize_patches(current_patches).transpose(1, 2),
                                 normalize_patches(adjacent_patches)); // (N, L, L')
    auto weights = attention_weights(scale == 1.0 ? similarity : similarity * scale);

    auto attended = torch::bmm(adjacent_patches, weights.transpose(1, 2)); // (N, P, L)
    auto summed = fold_patches(attended, height, width);
    auto coverage = fold_patches(torch::ones_like(attended.select(0, 0)).unsqueeze(0), height, width);
    return {summed / coverage, weights};
}

torch::Tensor temporal_attention_layer(const torch::Tensor& current, const torch::Tensor& adjacent) {
    if (current.dim() == 3) {
        return temporal_attention(current.unsqueeze(0), adjacent.unsqueeze(0)).output.squeeze(0);
    }
    return temporal_attention(current, adjacent).output;
}

} // namespace vrstc::tattn
