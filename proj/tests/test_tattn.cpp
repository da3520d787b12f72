#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "support.hpp"
#include "vrstc/tattn.hpp"

using namespace vrstc;
using namespace vrstc::test;

TEST(Patches, SingleLocationIsValueSurroundedByZeros) {
    auto map = torch::tensor({2.5, -1.0}, torch::kFloat64).view({2, 1, 1});
    auto grid = tattn::extract_patches(map);
    ASSERT_EQ(grid.patches.sizes(), (std::vector<std::int64_t>{1, 18}));
    for (int i = 0; i < 18; ++i) {
        const double expected = i == 4 ? 2.5 : (i == 13 ? -1.0 : 0.0);
        EXPECT_EQ(grid.patches[0][i].item<double>(), expected);
    }
}

TEST(Patches, ConstantMapInteriorPatchesAreConstant) {
    auto map = torch::full({3, 5, 6}, 0.75, torch::kFloat64);
    auto grid = tattn::extract_patches(map);
    for (int a = 1; a < 4; ++a)
        for (int b = 1; b < 5; ++b) EXPECT_TRUE(torch::all(grid.patches[a * 6 + b] == 0.75).item<bool>());
}

TEST(Patches, MatchLoopExtraction) {
    Gen gen(11);
    for (int trial = 0; trial < 10; ++trial) {
        auto map = gen.normal({gen.integer(1, 3), 4, 4});
        auto grid = tattn::extract_patches(map);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const auto expected = loop_patch(map, a, b);
                auto row = grid.patches[a * 4 + b];
                for (std::size_t i = 0; i < expected.size(); ++i)
                    EXPECT_EQ(row[static_cast<std::int64_t>(i)].item<double>(), expected[i]);
            }
    }
}

TEST(Similarity, SelfOrthogonalAndScalar) {
    auto f = torch::tensor({1.0, 2.0, -3.0}, torch::kFloat64);
    EXPECT_NEAR(tattn::patch_similarity(f, f), 1.0, 1e-12);
    EXPECT_EQ(tattn::patch_similarity(torch::tensor({1.0, 0.0}), torch::tensor({0.0, 4.0})), 0.0);
    EXPECT_EQ(tattn::patch_similarity(torch::zeros({3}), f), 0.0);
    Gen gen(3);
    for (int i = 0; i < 50; ++i) {
        auto a = gen.normal({27}), b = gen.normal({27});
        std::vector<double> va(a.data_ptr<double>(), a.data_ptr<double>() + 27);
        std::vector<double> vb(b.data_ptr<double>(), b.data_ptr<double>() + 27);
        EXPECT_NEAR(tattn::patch_similarity(a, b), scalar_cosine(va, vb), 1e-7);
    }
}

TEST(Weights, UniformSaturatedAndScalarOracle) {
    auto uniform = tattn::attention_weights(torch::full({7}, 0.3, torch::kFloat64));
    EXPECT_TRUE(torch::allclose(uniform, torch::full({7}, 1.0 / 7, torch::kFloat64)));

    auto s = torch::zeros({5}, torch::kFloat64);
    s[2] = 50.0;
    EXPECT_GE(tattn::attention_weights(s)[2].item<double>(), 1.0 - 1e-15);

    Gen gen(5);
    for (int i = 0; i < 50; ++i) {
        const int n = gen.integer(1, 40);
        auto v = gen.uniform({n}, -1, 1);
        auto w = tattn::attention_weights(v);
        EXPECT_NEAR(w.sum().item<double>(), 1.0, 1e-6);
        const auto oracle = scalar_softmax(std::vector<double>(v.data_ptr<double>(), v.data_ptr<double>() + n));
        for (int k = 0; k < n; ++k) EXPECT_NEAR(w[k].item<double>(), oracle[static_cast<std::size_t>(k)], 1e-7);
    }
}

TEST(Attend, DegenerateAndLoopOracle) {
    Gen gen(8);
    auto patch = gen.normal({1, 9});
    EXPECT_TRUE(torch::allclose(tattn::attend(torch::ones({1}, torch::kFloat64), patch), patch[0]));

    auto twin = patch.repeat({2, 1});
    auto w = torch::tensor({0.3, 0.7}, torch::kFloat64);
    EXPECT_TRUE(torch::allclose(tattn::attend(w, twin), patch[0], 0, 1e-12));

    auto patches = gen.normal({3, 9});
    auto weights = tattn::attention_weights(gen.normal({3}));
    auto out = tattn::attend(weights, patches);
    for (int i = 0; i < 9; ++i) {
        double expected = 0;
        for (int j = 0; j < 3; ++j) expected += weights[j].item<double>() * patches[j][i].item<double>();
        EXPECT_NEAR(out[i].item<double>(), expected, 1e-6);
    }
    EXPECT_THROW(tattn::attend(torch::ones({2}, torch::kFloat64), patches), std::exception);
}

TEST(Layer, MatchesNestedLoopReference) {
    Gen gen(21);
    for (int trial = 0; trial < 10; ++trial) {
        auto F = gen.normal({1, 4, 4}), R = gen.normal({1, 4, 4});
        auto out = tattn::temporal_attention_layer(F, R);
        EXPECT_LT((out - loop_layer(F, R)).abs().max().item<double>(), 1e-5);
    }
}

TEST(Layer, SelfAttentionPeaksOnSameLocation) {
    Gen gen(4);
    auto F = gen.normal({1, 3, 5, 4});
    auto result = tattn::temporal_attention(F, F);
    auto argmax = result.weights[0].argmax(1);
    for (std::int64_t i = 0; i < argmax.size(0); ++i) EXPECT_EQ(argmax[i].item<std::int64_t>(), i);
}

TEST(Layer, SingleLocationReproducesInput) {
    Gen gen(6);
    auto F = gen.normal({1, 4, 1, 1});
    EXPECT_TRUE(torch::allclose(tattn::temporal_attention_layer(F, F), F, 0, 1e-12));
}

TEST(Layer, OrthogonalPatchesGiveClosedFormWeights) {
    // One-hot channel per location: distinct patches never share a nonzero coordinate.
    const int H = 3, W = 3, L = H * W;
    auto F = torch::zeros({1, L, H, W}, torch::kFloat64);
    for (int p = 0; p < L; ++p) F[0][p][p / W][p % W] = 1.0;
    auto result = tattn::temporal_attention(F, F);
    const double self = std::exp(1.0) / (std::exp(1.0) + (L - 1));
    const double other = 1.0 / (std::exp(1.0) + (L - 1));
    auto expected = torch::full({L, L}, other, torch::kFloat64) + torch::eye(L, torch::kFloat64) * (self - other);
    EXPECT_TRUE(torch::allclose(result.weights[0], expected, 0, 1e-12));
    EXPECT_LT((result.output[0] - loop_layer(F[0], F[0])).abs().max().item<double>(), 1e-12);
}

TEST(Layer, ConstantInputsStayWithinTheConstantRange) {
    const double c = 0.6;
    auto F = torch::full({1, 2, 5, 5}, c, torch::kFloat64);
    auto out = tattn::temporal_attention_layer(F, F);
    EXPECT_GE(out.min().item<double>(), 0.0);
    EXPECT_LE(out.max().item<double>(), c + 1e-12);
}

TEST(Layer, WeightsAreNormalizedAndScaleInvariant) {
    Gen gen(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int C = gen.integer(1, 4), H = gen.integer(1, 6), W = gen.integer(1, 6);
        auto F = gen.normal({2, C, H, W}), R = gen.normal({2, C, H, W});
        auto a = tattn::temporal_attention(F, R);
        EXPECT_GE(a.weights.min().item<double>(), 0.0);
        EXPECT_LT((a.weights.sum(-1) - 1).abs().max().item<double>(), 1e-6);
        const double k = gen.real(0.1, 10);
        auto b = tattn::temporal_attention(F, R * k);
        EXPECT_LT((a.weights - b.weights).abs().max().item<double>(), 1e-9);
        EXPECT_TRUE(torch::allclose(b.output, a.output * k, 1e-9, 1e-9));
    }
}

TEST(Layer, PermutingAdjacentPatchesLeavesAggregationUnchanged) {
    Gen gen(12);
    auto F = gen.normal({2, 4, 4}), R = gen.normal({2, 4, 4});
    auto f = tattn::extract_patches(F).patches;
    auto r = tattn::extract_patches(R).patches;
    auto sims = torch::empty({16, 16}, torch::kFloat64);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) sims[i][j] = tattn::patch_similarity(f[i], r[j]);
    auto perm = torch::randperm(16, torch::TensorOptions().dtype(torch::kInt64));
    auto direct = tattn::attend(tattn::attention_weights(sims), r);
    auto permuted = tattn::attend(tattn::attention_weights(sims.index_select(1, perm)), r.index_select(0, perm));
    EXPECT_TRUE(torch::allclose(direct, permuted, 1e-12, 1e-12));
}

TEST(Layer, ShapeMismatchThrows) {
    EXPECT_THROW(tattn::temporal_attention_layer(torch::zeros({1, 4, 4}), torch::zeros({1, 4, 5})), std::exception);
}

TEST(Layer, GradientsMatchCentralDifferences) {
    Gen gen(9);
    auto F = gen.normal({1, 3, 4, 4}).requires_grad_(true);
    auto R = gen.normal({1, 3, 4, 4}).requires_grad_(true);
    auto probe = gen.normal({1, 3, 4, 4});
    auto loss = [&](const torch::Tensor& f, const torch::Tensor& r) {
        return (tattn::temporal_attention_layer(f, r) * probe).sum();
    };
    loss(F, R).backward();
    const double h = 1e-6;
    for (auto* which : {&F, &R}) {
        auto grad = which->grad();
        auto base = which->detach();
        for (int i = 0; i < base.numel(); i += 5) {
            auto plus = base.clone(), minus = base.clone();
            plus.view({-1})[i] += h;
            minus.view({-1})[i] -= h;
            torch::NoGradGuard guard;
            const double numeric = which == &F
                                       ? (loss(plus, R.detach()) - loss(minus, R.detach())).item<double>() / (2 * h)
                                       : (loss(F.detach(), plus) - loss(F.detach(), minus)).item<double>() / (2 * h);
            const double analytic = grad.view({-1})[i].item<double>();
            EXPECT_LT(std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic)), 1e-3)
                << "element " << i;
        }
    }
}
