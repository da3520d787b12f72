#include "vrstc/losses.hpp"

#include <cmath>
#include <string>

#include "vrstc/error.hpp"

namespace F = torch::nn::functional;

namespace vrstc::losses {

void LossWeights::validate() const {
    if (!(adversarial >= 0) || !(guider >= 0)) {
        throw Error(ErrorKind::config, "loss weights must be nonnegative");
    }
}

torch::Tensor composite(const torch::Tensor& prediction, const torch::Tensor& original, const torch::Tensor& mask) {
    if (prediction.sizes() != original.sizes()) {
        throw Error(ErrorKind::shape, "prediction and original differ in shape");
    }
    if (!torch::logical_or(mask == 0, mask == 1).all().item<bool>()) {
        throw Error(ErrorKind::data, "compositing mask must be binary");
    }
    auto m = mask.to(prediction.dtype());
    // torch::where keeps both sides bit-exact instead of multiplying through.
    return torch::where(m.expand_as(prediction) > 0.5, prediction, original);
}

torch::Tensor reconstruction_loss(const torch::Tensor& target, const torch::Tensor& spatial,
                                  const torch::Tensor& temporal) {
    if (target.sizes() != spatial.sizes() || target.sizes() != temporal.sizes()) {
        throw Error(ErrorKind::shape, "reconstruction inputs differ in shape");
    }
    return (target - spatial).abs().mean() + (target - temporal).abs().mean();
}

namespace {

void check_probabilities(const torch::Tensor& p) {
    if (!torch::logical_and(p > 0, p < 1).all().item<bool>()) {
        throw Error(ErrorKind::numeric, "discriminator output outside (0, 1)");
    }
}

} // namespace

AdversarialLosses adversarial_losses(const torch::Tensor& real_probability, const torch::Tensor& fake_probability) {
    check_probabilities(real_probability);
    check_probabilities(fake_probability);
    auto d_loss = -(real_probability.log().mean() + (1 - fake_probability).log().mean());
    auto g_loss = -fake_probability.log().mean();
    return {d_loss, g_loss};
}

AdversarialLosses adversarial_losses_from_logits(const torch::Tensor& real_logit, const torch::Tensor& fake_logit) {
    // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
    auto d_loss = F::softplus(-real_logit).mean() + F::softplus(fake_logit).mean();
    auto g_loss = F::softplus(-fake_logit).mean();
    return {d_loss, g_loss};
}

AdversarialLosses adversarial_losses(const Critic& critic_logits, const torch::Tensor& real_input,
                                     const torch::Tensor& fake_input) {
    auto real_logit = critic_logits(real_input);
    auto detached = adversarial_losses_from_logits(real_logit, critic_logits(fake_input.detach()));
    auto attached = adversarial_losses_from_logits(real_logit.detach(), critic_logits(fake_input));
    return {detached.discriminator, attached.generator};
}

torch::Tensor guider_loss(const torch::Tensor& class_logits, const torch::Tensor& labels) {
    if (class_logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != class_logits.size(0)) {
        throw Error(ErrorKind::shape, "guider loss expects (N, K) logits and N labels");
    }
    const auto classes = class_logits.size(1);
    if (labels.numel() > 0 && (labels.min().item<std::int64_t>() < 0 || labels.max().item<std::int64_t>() >= classes)) {
        throw Error(ErrorKind::data, "label outside the guider's class range");
    }
    return F::cross_entropy(class_logits, labels);
}

double guider_loss(std::span<const double> distribution, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= distribution.size()) {
        throw Error(ErrorKind::data, "label outside the distribution's support");
    }
    return -std::log(distribution[static_cast<std::size_t>(label)]);
}

namespace {

void check_finite(double value, const char* name) {
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::numeric, std::string("non-finite loss term ") + name);
    }
}

} // namespace

torch::Tensor total_loss(const torch::Tensor& reconstruction, const torch::Tensor& global_adversarial,
                         const torch::Tensor& local_adversarial, const torch::Tensor& guider,
                         const LossWeights& weights) {
    weights.validate();
    check_finite(reconstruction.item<double>(), "reconstruction");
    check_finite(global_adversarial.item<double>(), "global adversarial");
    check_finite(local_adversarial.item<double>(), "local adversarial");
    check_finite(guider.item<double>(), "guider");
    return reconstruction + weights.adversarial * (global_adversarial + local_adversarial) + weights.guider * guider;
}

double total_loss(double reconstruction, double global_adversarial, double local_adversarial, double guider,
                  const LossWeights& weights) {
    weights.validate();
    check_finite(reconstruction, "reconstruction");
    check_finite(global_adversarial, "global adversarial");
    check_finite(local_adversarial, "local adversarial");
    check_finite(guider, "guider");
    return reconstruction + weights.adversarial * (global_adversarial + local_adversarial) + weights.guider * guider;
}

} // namespace vrstc::losses
