#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "vrstc/error.hpp"
#include "vrstc/losses.hpp"

using namespace vrstc;
using vrstc::test::Gen;

namespace {

torch::Tensor band(Region region, std::int64_t h = 64, std::int64_t w = 32) {
    return RegionMask::make(region, h, w).mask;
}

} // namespace

TEST(Composite, EmptyAndFullMasks) {
    Gen gen(1);
    auto p = gen.normal({3, 64, 32}, torch::kFloat32), x = gen.normal({3, 64, 32}, torch::kFloat32);
    EXPECT_TRUE(torch::equal(losses::composite(p, x, torch::zeros({64, 32})), x));
    EXPECT_TRUE(torch::equal(losses::composite(p, x, torch::ones({64, 32})), p));
}

TEST(Composite, BandMaskIsBitExactOnBothSides) {
    Gen gen(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = gen.normal({2, 3, 64, 32}, torch::kFloat32), x = gen.normal({2, 3, 64, 32}, torch::kFloat32);
        auto m = band(gen.region());
        auto out = losses::composite(p, x, m.view({1, 1, 64, 32}));
        auto inside = m.to(torch::kBool).expand_as(out);
        EXPECT_TRUE(torch::equal(out.masked_select(inside), p.masked_select(inside)));
        EXPECT_TRUE(torch::equal(out.masked_select(~inside), x.masked_select(~inside)));
        // idempotent
        EXPECT_TRUE(torch::equal(losses::composite(out, x, m), out));
    }
}

TEST(Composite, RejectsNonBinaryMask) {
    auto x = torch::zeros({3, 4, 4});
    try {
        losses::composite(x, x, torch::full({4, 4}, 0.5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
    }
}

TEST(Reconstruction, ZeroForPerfectPredictions) {
    auto x = torch::rand({3, 64, 32});
    EXPECT_EQ(losses::reconstruction_loss(x, x, x).item<double>(), 0.0);
}

TEST(Reconstruction, MiddleBandOffsetUsesTheBandPixelCount) {
    auto x = torch::zeros({3, 64, 32}, torch::kFloat64);
    auto m = band(Region::middle).to(torch::kFloat64);
    auto x1 = x + 0.5 * m;
    const double loss = losses::reconstruction_loss(x, x1, x).item<double>();
    // The middle band is rows 21..41: 21 of 64 rows.
    const double oracle = 0.5 * m.sum().item<double>() / m.numel();
    EXPECT_DOUBLE_EQ(oracle, 0.5 * 21.0 / 64.0);
    EXPECT_NEAR(loss, oracle, 1e-12);
}

TEST(Reconstruction, CompositedInputsEqualMaskRestrictedL1) {
    Gen gen(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = gen.uniform({2, 3, 64, 32}, -1, 1), p1 = gen.uniform({2, 3, 64, 32}, -1, 1),
             p2 = gen.uniform({2, 3, 64, 32}, -1, 1);
        auto m = band(gen.region()).to(torch::kFloat64).view({1, 1, 64, 32});
        auto x1 = losses::composite(p1, x, m), x2 = losses::composite(p2, x, m);
        const double loss = losses::reconstruction_loss(x, x1, x2).item<double>();
        const double restricted =
            (((x - p1).abs() + (x - p2).abs()) * m).sum().item<double>() / static_cast<double>(x.numel());
        EXPECT_NEAR(loss, restricted, 1e-6);
        // Values outside the mask do not matter.
        auto q1 = losses::composite(p1 + 3 * (1 - m), x, m);
        EXPECT_EQ(losses::reconstruction_loss(x, q1, x2).item<double>(), loss);
    }
}

TEST(Reconstruction, GradientVanishesOutsideTheMask) {
    Gen gen(5);
    auto x = gen.uniform({1, 3, 12, 8}, -1, 1);
    auto m = RegionMask::make(Region::lower, 12, 8).mask.to(torch::kFloat64).view({1, 1, 12, 8});
    auto p = gen.uniform({1, 3, 12, 8}, -1, 1).requires_grad_(true);
    auto loss = [&](const torch::Tensor& pred) {
        auto c = losses::composite(pred, x, m);
        return losses::reconstruction_loss(x, c, c);
    };
    loss(p).backward();
    auto grad = p.grad();
    EXPECT_EQ((grad * (1 - m)).abs().max().item<double>(), 0.0);
    const double h = 1e-6;
    for (int i = 0; i < p.numel(); i += 7) {
        auto plus = p.detach().clone(), minus = p.detach().clone();
        plus.view({-1})[i] += h;
        minus.view({-1})[i] -= h;
        const double numeric = (loss(plus) - loss(minus)).item<double>() / (2 * h);
        EXPECT_NEAR(numeric, grad.view({-1})[i].item<double>(), 1e-6);
    }
}

TEST(Adversarial, ClosedFormAtOneHalf) {
    auto half = torch::full({4}, 0.5, torch::kFloat64);
    auto l = losses::adversarial_losses(half, half);
    EXPECT_NEAR(l.discriminator.item<double>(), 2 * std::log(2.0), 1e-12);
    EXPECT_NEAR(l.generator.item<double>(), std::log(2.0), 1e-12);
}

TEST(Adversarial, PerfectDiscriminatorLimit) {
    auto l = losses::adversarial_losses(torch::full({2}, 1 - 1e-12, torch::kFloat64),
                                        torch::full({2}, 1e-12, torch::kFloat64));
    EXPECT_LT(l.discriminator.item<double>(), 1e-10);
}

TEST(Adversarial, MatchesScalarCrossEntropyAndLogitForm) {
    Gen gen(6);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = gen.integer(1, 6);
        auto real = gen.uniform({n}, 0.01, 0.99), fake = gen.uniform({n}, 0.01, 0.99);
        auto l = losses::adversarial_losses(real, fake);
        double d = 0, g = 0;
        for (int i = 0; i < n; ++i) {
            d += -std::log(real[i].item<double>()) / n - std::log(1 - fake[i].item<double>()) / n;
            g += -std::log(fake[i].item<double>()) / n;
        }
        EXPECT_NEAR(l.discriminator.item<double>(), d, 1e-7);
        EXPECT_NEAR(l.generator.item<double>(), g, 1e-7);
        auto logits = losses::adversarial_losses_from_logits(torch::logit(real), torch::logit(fake));
        EXPECT_NEAR(logits.discriminator.item<double>(), d, 1e-7);
        EXPECT_NEAR(logits.generator.item<double>(), g, 1e-7);
    }
}

TEST(Adversarial, RejectsOutOfRangeProbabilities) {
    EXPECT_THROW(losses::adversarial_losses(torch::ones({1}), torch::full({1}, 0.5)), Error);
}

TEST(Adversarial, CriticFormRoutesGradients) {
    auto weight = torch::ones({1}, torch::kFloat64).requires_grad_(true);
    losses::Critic critic = [&](const torch::Tensor& x) { return (x * weight).sum(1); };
    auto real = torch::ones({2, 3}, torch::kFloat64);
    auto fake = torch::full({2, 3}, 0.2, torch::kFloat64).requires_grad_(true);
    auto l = losses::adversarial_losses(critic, real, fake);
    l.discriminator.backward();
    EXPECT_FALSE(fake.grad().defined());
    l.generator.backward();
    EXPECT_TRUE(fake.grad().defined());
}

TEST(Guider, ClosedFormsAndScalarOracle) {
    std::vector<double> certain{0.0, 1.0, 0.0};
    EXPECT_EQ(losses::guider_loss(certain, 1), 0.0);
    std::vector<double> uniform(10, 0.1);
    EXPECT_NEAR(losses::guider_loss(uniform, 3), std::log(10.0), 1e-12);
    EXPECT_THROW(losses::guider_loss(uniform, 10), Error);

    Gen gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto logits = gen.normal({1, 8});
        auto p = torch::softmax(logits, 1)[0];
        const int label = gen.integer(0, 7);
        std::vector<double> dist(p.data_ptr<double>(), p.data_ptr<double>() + 8);
        EXPECT_NEAR(losses::guider_loss(dist, label), -std::log(dist[static_cast<std::size_t>(label)]), 1e-9);
        auto t = losses::guider_loss(logits, torch::tensor({label}, torch::kInt64));
        EXPECT_NEAR(t.item<double>(), -std::log(dist[static_cast<std::size_t>(label)]), 1e-9);
    }
    EXPECT_THROW(losses::guider_loss(torch::zeros({1, 3}), torch::tensor({3}, torch::kInt64)), Error);
}

TEST(Total, WeightsAndArithmetic) {
    losses::LossWeights zero{0, 0};
    EXPECT_EQ(losses::total_loss(0.7, 5, 6, 9, zero), 0.7);
    EXPECT_NEAR(losses::total_loss(1, 1, 1, 1, losses::LossWeights{}), 1.102, 1e-12);
    Gen gen(8);
    for (int trial = 0; trial < 50; ++trial) {
        const double r = gen.real(0, 3), a1 = gen.real(0, 3), a2 = gen.real(0, 3), c = gen.real(0, 3);
        const losses::LossWeights w{gen.real(0, 1), gen.real(0, 1)};
        EXPECT_NEAR(losses::total_loss(r, a1, a2, c, w), r + w.adversarial * (a1 + a2) + w.guider * c, 1e-12);
        auto t = losses::total_loss(torch::tensor(r, torch::kFloat64), torch::tensor(a1, torch::kFloat64),
                                    torch::tensor(a2, torch::kFloat64), torch::tensor(c, torch::kFloat64), w);
        EXPECT_NEAR(t.item<double>(), r + w.adversarial * (a1 + a2) + w.guider * c, 1e-12);
        // monotone in every term
        EXPECT_GE(losses::total_loss(r + 0.1, a1, a2, c, w), losses::total_loss(r, a1, a2, c, w));
        EXPECT_GE(losses::total_loss(r, a1, a2, c + 0.1, w), losses::total_loss(r, a1, a2, c, w));
    }
}

TEST(Total, NonFiniteTermIsANumericError) {
    try {
        losses::total_loss(1.0, std::nan(""), 0.0, 0.0, losses::LossWeights{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
    EXPECT_THROW(losses::total_loss(1, 1, 1, 1, losses::LossWeights{-1, 0}), Error);
}
