#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "vrstc/data.hpp"
#include "vrstc/reid.hpp"

namespace vrstc::stcnet {

struct GeneratorConfig {
    std::int64_t in_channels = 3;
    // Five 3x3 convolutions; the second and fourth use stride 2.
    std::vector<std::int64_t> encoder_channels{32, 64, 64, 128, 128};
    std::vector<std::int64_t> dilations{2, 4, 8, 16};
    // Two x2 up-convolutions.
    std::vector<std::int64_t> decoder_channels{64, 32};
    std::int64_t height = 128;
    std::int64_t width = 64;
    // Multiplies the patch cosines before the attention softmax.
    double attention_scale = 10.0;

    static GeneratorConfig paper();
    // Half widths, 64x32 frames.
    static GeneratorConfig desk();

    std::int64_t latent_channels() const { return encoder_channels.back(); }
    void validate() const;
    // Receptive field, in input pixels, of one latent unit after the dilated stack.
    std::int64_t receptive_field() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& config);
void from_json(const nlohmann::json& j, GeneratorConfig& config);

// Strided encoder followed by the dilated stack; ELU throughout.
class EncoderImpl : public torch::nn::Module {
public:
    EncoderImpl(const GeneratorConfig& config, std::int64_t in_channels, std::int64_t width_multiplier = 1);
    torch::Tensor forward(torch::Tensor x);
    std::int64_t out_channels() const { return out_channels_; }

private:
    torch::nn::ModuleList layers_;
    std::int64_t out_channels_ = 0;
};
TORCH_MODULE(Encoder);

// Two x2 up-convolutions and a 3-channel tanh projection.
class DecoderImpl : public torch::nn::Module {
public:
    DecoderImpl(const GeneratorConfig& config, std::int64_t in_channels);
    torch::Tensor forward(torch::Tensor x);

private:
    torch::nn::ModuleList layers_;
    torch::nn::Conv2d project_{nullptr};
};
TORCH_MODULE(Decoder);

void check_frame_shape(const torch::Tensor& frames);

// Generators read the mask as an extra input channel next to the pixels.
class SpatialGeneratorImpl : public torch::nn::Module {
public:
    explicit SpatialGeneratorImpl(const GeneratorConfig& config);
    // (N, 3, H, W) zero-filled frames in [-1, 1] and their (N, 1, H, W) masks
    // -> predictions in (-1, 1)
    torch::Tensor forward(const torch::Tensor& masked, const torch::Tensor& mask);

    Encoder encoder{nullptr};
    Decoder decoder{nullptr};
};
TORCH_MODULE(SpatialGenerator);

enum class TemporalVariant {
    attention,            // three encoders + two attention layers
    autoencoder,          // single input, encoder widths tripled
    temporal_autoencoder, // three encoders, features concatenated without attention
};

std::string to_string(TemporalVariant variant);
TemporalVariant temporal_variant_from_string(const std::string& name);

class TemporalGeneratorImpl : public torch::nn::Module {
public:
    TemporalGeneratorImpl(const GeneratorConfig& config, TemporalVariant variant);

    // The mask goes to the current-frame encoder only; neighbours are unoccluded.
    torch::Tensor forward(const torch::Tensor& coarse, const torch::Tensor& mask, const torch::Tensor& previous,
                          const torch::Tensor& next);

    TemporalVariant variant() const { return variant_; }
    // Weights of the last forward pass, (N, L, L') each; undefined for variants
    // without attention.
    const torch::Tensor& previous_weights() const { return previous_weights_; }
    const torch::Tensor& next_weights() const { return next_weights_; }

    // One encoder reads all three frames, so current and neighbour features
    // live in the same space; neighbours get an all-zero mask channel.
    Encoder encoder{nullptr};
    Decoder decoder{nullptr};

private:
    TemporalVariant variant_;
    double attention_scale_;
    torch::Tensor previous_weights_, next_weights_;
};
TORCH_MODULE(TemporalGenerator);

struct DiscriminatorConfig {
    std::int64_t height = 64;
    std::int64_t width = 32;
    std::int64_t base_channels = 32;
    int layers = 0; // 0: derived from the resolution

    int resolved_layers() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& config);
void from_json(const nlohmann::json& j, DiscriminatorConfig& config);

// Stride-2 3x3 convolutions, then one fully connected unit.
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const DiscriminatorConfig& config);

    torch::Tensor logits(const torch::Tensor& images); // (N)
    torch::Tensor forward(const torch::Tensor& images) { return torch::sigmoid(logits(images)); }

    const DiscriminatorConfig& config() const { return config_; }

private:
    DiscriminatorConfig config_;
    torch::nn::ModuleList convs_;
    torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(Discriminator);

// Crops the bounding box of each frame's mask and resizes it bilinearly to
// (height, width). `masks` is (N, H, W) or (N, 1, H, W).
torch::Tensor local_crop(const torch::Tensor& frames, const torch::Tensor& masks, std::int64_t height,
                         std::int64_t width);

// Frozen identity classifier over single frames in completion range.
class GuiderImpl : public torch::nn::Module {
public:
    explicit GuiderImpl(reid::ReidNet net);

    torch::Tensor logits(const torch::Tensor& frames);
    // Probabilities over the training identities, rows sum to 1.
    torch::Tensor forward(const torch::Tensor& frames) { return torch::softmax(logits(frames), -1); }

    int num_classes() const { return net_->config().num_classes; }
    reid::ReidNet& net() { return net_; }

private:
    reid::ReidNet net_;
};
TORCH_MODULE(Guider);

struct StcnetConfig {
    GeneratorConfig generator = GeneratorConfig::desk();
    TemporalVariant variant = TemporalVariant::attention;
    bool temporal = true;
    DiscriminatorConfig global_disc;
    DiscriminatorConfig local_disc;

    static StcnetConfig for_profile(reid::Profile profile, std::int64_t height, std::int64_t width);
};

void to_json(nlohmann::json& j, const StcnetConfig& config);
void from_json(const nlohmann::json& j, StcnetConfig& config);

struct StcnetBundle {
    StcnetConfig config;
    SpatialGenerator spatial{nullptr};
    TemporalGenerator temporal{nullptr};
    Discriminator local{nullptr};
    Discriminator global{nullptr};

    explicit StcnetBundle(const StcnetConfig& config);

    // Spatial pass, then temporal refinement when enabled; both composited.
    struct Completion {
        torch::Tensor spatial;  // x1
        torch::Tensor temporal; // x2 (equal to x1 when the temporal generator is off)
    };
    Completion complete(const torch::Tensor& frames, const torch::Tensor& masks, const torch::Tensor& previous,
                        const torch::Tensor& next);

    std::vector<torch::Tensor> generator_parameters();
    void train(bool on = true);
};

} // namespace vrstc::stcnet
