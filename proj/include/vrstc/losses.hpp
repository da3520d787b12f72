#pragma once

#include <functional>
#include <span>

#include <torch/torch.h>

namespace vrstc::losses {

// Weights of the adversarial and identity terms in the generator objective.
struct LossWeights {
    double adversarial = 0.001;
    double guider = 0.1;

    void validate() const;
};

// mask * prediction + (1 - mask) * original. `mask` is binary and broadcasts
// against the frames, e.g. (H, W) or (N, 1, H, W).
torch::Tensor composite(const torch::Tensor& prediction, const torch::Tensor& original, const torch::Tensor& mask);

// Mean-normalized |x - x1| + |x - x2|.
torch::Tensor reconstruction_loss(const torch::Tensor& target, const torch::Tensor& spatial,
                                  const torch::Tensor& temporal);

struct AdversarialLosses {
    torch::Tensor discriminator; // -[log D(real) + log(1 - D(fake))]
    torch::Tensor generator;     // -log D(fake)
};

// From probabilities in (0, 1); batch means.
AdversarialLosses adversarial_losses(const torch::Tensor& real_probability, const torch::Tensor& fake_probability);

// Same quantities from pre-sigmoid logits, numerically stable.
AdversarialLosses adversarial_losses_from_logits(const torch::Tensor& real_logit, const torch::Tensor& fake_logit);

using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

// Runs a logit-producing critic on real and fake inputs. The discriminator
// term sees a detached fake so only the generator term reaches the generators.
AdversarialLosses adversarial_losses(const Critic& critic_logits, const torch::Tensor& real_input,
                                     const torch::Tensor& fake_input);

// Cross-entropy of class logits against integer labels (batch mean).
torch::Tensor guider_loss(const torch::Tensor& class_logits, const torch::Tensor& labels);

// -log p[label] for an explicit probability vector.
double guider_loss(std::span<const double> distribution, int label);

// L_r + lambda1 (L_a1 + L_a2) + lambda2 L_c. Throws on non-finite terms.
torch::Tensor total_loss(const torch::Tensor& reconstruction, const torch::Tensor& global_adversarial,
                         const torch::Tensor& local_adversarial, const torch::Tensor& guider,
                         const LossWeights& weights);
double total_loss(double reconstruction, double global_adversarial, double local_adversarial, double guider,
                  const LossWeights& weights);

} // namespace vrstc::losses
