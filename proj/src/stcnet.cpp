#include "vrstc/stcnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "vrstc/error.hpp"
#include "vrstc/losses.hpp"
#include "vrstc/tattn.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using nlohmann::json;

namespace vrstc::stcnet {

GeneratorConfig GeneratorConfig::paper() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::desk() {
    GeneratorConfig c;
    for (auto& v : c.encoder_channels) v /= 2;
    for (auto& v : c.decoder_channels) v /= 2;
    c.height = 64;
    c.width = 32;
    return c;
}

void GeneratorConfig::validate() const {
    if (encoder_channels.size() != 5 || dilations.size() != 4 || decoder_channels.size() != 2) {
        throw Error(ErrorKind::config, "generator needs 5 encoder, 4 dilated and 2 decoder layers");
    }
    if (height % 4 != 0 || width % 4 != 0) {
        throw Error(ErrorKind::config, "generator frame size must be divisible by 4");
    }
    if (!(attention_scale > 0) || !std::isfinite(attention_scale)) {
        throw Error(ErrorKind::config, "attention scale must be positive");
    }
}

std::int64_t GeneratorConfig::receptive_field() const {
    std::int64_t field = 1, jump = 1;
    const std::int64_t strides[5] = {1, 2, 1, 2, 1};
    for (auto stride : strides) {
        field += 2 * jump;
        jump *= stride;
    }
    for (auto d : dilations) field += 2 * d * jump;
    return field;
}

void to_json(json& j, const GeneratorConfig& c) {
    j = {{"in_channels", c.in_channels},
         {"encoder_channels", c.encoder_channels},
         {"dilations", c.dilations},
         {"decoder_channels", c.decoder_channels},
         {"height", c.height},
         {"width", c.width},
         {"attention_scale", c.attention_scale}};
}

void from_json(const json& j, GeneratorConfig& c) {
    c.in_channels = j.value("in_channels", c.in_channels);
    c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
    c.dilations = j.value("dilations", c.dilations);
    c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.attention_scale = j.value("attention_scale", c.attention_scale);
}

void check_frame_shape(const torch::Tensor& frames) {
    if (frames.dim() != 4 || frames.size(1) != 3) {
        throw Error(ErrorKind::shape, "expected (N, 3, H, W) frames");
    }
    if (frames.size(2) % 4 != 0 || frames.size(3) % 4 != 0) {
        throw Error(ErrorKind::shape, "frame size must be divisible by 4");
    }
}

namespace {

torch::Tensor with_mask(const torch::Tensor& frames, const torch::Tensor& mask) {
    if (mask.dim() != 4 || mask.size(1) != 1 || mask.size(0) != frames.size(0) || mask.size(2) != frames.size(2) ||
        mask.size(3) != frames.size(3)) {
        throw Error(ErrorKind::shape, "generator mask must be (N, 1, H, W) matching the frames");
    }
    return torch::cat({frames, mask.to(frames.dtype())}, 1);
}

} // namespace

EncoderImpl::EncoderImpl(const GeneratorConfig& config, std::int64_t in_channels, std::int64_t width_multiplier) {
    config.validate();
    const std::int64_t strides[5] = {1, 2, 1, 2, 1};
    std::int64_t channels = in_channels;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto out = config.encoder_channels[i] * width_multiplier;
        layers_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, out, 3).stride(strides[i]).padding(1)));
        channels = out;
    }
    for (auto d : config.dilations) {
        layers_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(d).dilation(d)));
    }
    out_channels_ = channels;
    register_module("layers", layers_);
}

torch::Tensor EncoderImpl::forward(torch::Tensor x) {
    for (auto& layer : *layers_) x = torch::elu(layer->as<nn::Conv2d>()->forward(x));
    return x;
}

DecoderImpl::DecoderImpl(const GeneratorConfig& config, std::int64_t in_channels) {
    std::int64_t channels = in_channels;
    for (auto out : config.decoder_channels) {
        layers_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(channels, out, 4).stride(2).padding(1)));
        channels = out;
    }
    register_module("layers", layers_);
    project_ = register_module("project", nn::Conv2d(nn::Conv2dOptions(channels, 3, 3).padding(1)));
}

torch::Tensor DecoderImpl::forward(torch::Tensor x) {
    for (auto& layer : *layers_) x = torch::elu(layer->as<nn::ConvTranspose2d>()->forward(x));
    return torch::tanh(project_(x));
}

SpatialGeneratorImpl::SpatialGeneratorImpl(const GeneratorConfig& config) {
    encoder = register_module("encoder", Encoder(config, config.in_channels + 1));
    decoder = register_module("decoder", Decoder(config, encoder->out_channels()));
}

torch::Tensor SpatialGeneratorImpl::forward(const torch::Tensor& masked, const torch::Tensor& mask) {
    check_frame_shape(masked);
    return decoder(encoder(with_mask(masked, mask)));
}

std::string to_string(TemporalVariant variant) {
    switch (variant) {
    case TemporalVariant::attention: return "attention";
    case TemporalVariant::autoencoder: return "AE";
    case TemporalVariant::temporal_autoencoder: return "TAE";
    }
    return "attention";
}

TemporalVariant temporal_variant_from_string(const std::string& name) {
    if (name == "attention" || name == "tem") return TemporalVariant::attention;
    if (name == "AE" || name == "ae") return TemporalVariant::autoencoder;
    if (name == "TAE" || name == "tae") return TemporalVariant::temporal_autoencoder;
    throw Error(ErrorKind::config, "unknown temporal variant '" + name + "'");
}

TemporalGeneratorImpl::TemporalGeneratorImpl(const GeneratorConfig& config, TemporalVariant variant)
    : variant_(variant), attention_scale_(config.attention_scale) {
    if (variant == TemporalVariant::autoencoder) {
        encoder = register_module("encoder", Encoder(config, config.in_channels + 1, 3));
        decoder = register_module("decoder", Decoder(config, encoder->out_channels()));
        return;
    }
    encoder = register_module("encoder", Encoder(config, config.in_channels + 1));
    decoder = register_module("decoder", Decoder(config, 3 * encoder->out_channels()));
}

torch::Tensor TemporalGeneratorImpl::forward(const torch::Tensor& coarse, const torch::Tensor& mask,
                                             const torch::Tensor& previous, const torch::Tensor& next) {
    check_frame_shape(coarse);
    if (previous.sizes() != coarse.sizes() || next.sizes() != coarse.sizes()) {
        throw Error(ErrorKind::shape, "temporal generator inputs differ in shape");
    }
    if (variant_ == TemporalVariant::autoencoder) {
        return decoder(encoder(with_mask(coarse, mask)));
    }
    const auto clear = torch::zeros_like(mask);
    auto current = encoder(with_mask(coarse, mask));
    auto prev_features = encoder(with_mask(previous, clear));
    auto next_features = encoder(with_mask(next, clear));
    if (variant_ == TemporalVariant::attention) {
        auto attended_prev = tattn::temporal_attention(current, prev_features, attention_scale_);
        auto attended_next = tattn::temporal_attention(current, next_features, attention_scale_);
        previous_weights_ = attended_prev.weights.detach();
        next_weights_ = attended_next.weights.detach();
        prev_features = attended_prev.output;
        next_features = attended_next.output;
    }
    return decoder(torch::cat({current, prev_features, next_features}, 1));
}

int DiscriminatorConfig::resolved_layers() const {
    if (layers > 0) return layers;
    // Halve until the short side reaches 2 pixels, at most six times.
    const auto shortest = std::min(height, width);
    const int halvings = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(shortest))) - 2;
    return std::clamp(halvings, 1, 6);
}

void DiscriminatorConfig::validate() const {
    const int n = resolved_layers();
    const std::int64_t scale = std::int64_t{1} << n;
    if (height < scale || width < scale) {
        throw Error(ErrorKind::config, "discriminator input too small for " + std::to_string(n) + " stride-2 layers");
    }
}

void to_json(json& j, const DiscriminatorConfig& c) {
    j = {{"height", c.height},
         {"width", c.width},
         {"base_channels", c.base_channels},
         {"layers", c.resolved_layers()}};
}

void from_json(const json& j, DiscriminatorConfig& c) {
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.layers = j.value("layers", c.layers);
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorConfig& config) : config_(config) {
    config.validate();
    const int n = config.resolved_layers();
    std::int64_t channels = 3, h = config.height, w = config.width;
    for (int i = 0; i < n; ++i) {
        const auto out = config.base_channels * std::min<std::int64_t>(std::int64_t{1} << i, 8);
        convs_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, out, 3).stride(2).padding(1)));
        channels = out;
        h = (h + 1) / 2;
        w = (w + 1) / 2;
    }
    register_module("convs", convs_);
    fc_ = register_module("fc", nn::Linear(channels * h * w, 1));
}

torch::Tensor DiscriminatorImpl::logits(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(2) != config_.height || images.size(3) != config_.width) {
        throw Error(ErrorKind::shape, "discriminator input has the wrong size");
    }
    auto x = images;
    for (auto& layer : *convs_) x = F::leaky_relu(layer->as<nn::Conv2d>()->forward(x), F::LeakyReLUFuncOptions().negative_slope(0.2));
    return fc_(x.flatten(1)).squeeze(1);
}

torch::Tensor local_crop(const torch::Tensor& frames, const torch::Tensor& masks, std::int64_t height,
                         std::int64_t width) {
    const auto m = masks.dim() == 4 ? masks.squeeze(1) : masks;
    if (frames.dim() != 4 || m.dim() != 3 || m.size(0) != frames.size(0)) {
        throw Error(ErrorKind::shape, "local_crop expects (N, 3, H, W) frames and (N, H, W) masks");
    }
    std::vector<torch::Tensor> crops;
    for (std::int64_t i = 0; i < frames.size(0); ++i) {
        auto mi = m[i];
        auto rows = torch::nonzero(mi.sum(1) > 0).flatten();
        auto cols = torch::nonzero(mi.sum(0) > 0).flatten();
        auto frame = frames[i] * mi.unsqueeze(0);
        torch::Tensor box;
        if (rows.numel() == 0) {
            box = frame;
        } else {
            const auto r0 = rows.min().item<std::int64_t>(), r1 = rows.max().item<std::int64_t>() + 1;
            const auto c0 = cols.min().item<std::int64_t>(), c1 = cols.max().item<std::int64_t>() + 1;
            box = frame.slice(1, r0, r1).slice(2, c0, c1);
        }
        crops.push_back(F::interpolate(box.unsqueeze(0), F::InterpolateFuncOptions()
                                                             .size(std::vector<std::int64_t>{height, width})
                                                             .mode(torch::kBilinear)
                                                             .align_corners(false)));
    }
    return torch::cat(crops, 0);
}

GuiderImpl::GuiderImpl(reid::ReidNet net) : net_(std::move(net)) {
    register_module("net", net_);
    for (auto& p : net_->parameters()) p.set_requires_grad(false);
    net_->eval();
}

torch::Tensor GuiderImpl::logits(const torch::Tensor& frames) {
    check_frame_shape(frames);
    net_->eval();
    auto x = frames;
    const auto& c = net_->config();
    if (x.size(2) != c.height || x.size(3) != c.width) {
        x = F::interpolate(x, F::InterpolateFuncOptions()
                                  .size(std::vector<std::int64_t>{c.height, c.width})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
    }
    return net_->logits(to_reid_range(x).unsqueeze(1));
}

StcnetConfig StcnetConfig::for_profile(reid::Profile profile, std::int64_t height, std::int64_t width) {
    StcnetConfig c;
    c.generator = profile == reid::Profile::paper ? GeneratorConfig::paper() : GeneratorConfig::desk();
    c.generator.height = height;
    c.generator.width = width;
    const std::int64_t base = profile == reid::Profile::paper ? 64 : 32;
    c.global_disc = {height, width, base, 0};
    c.local_disc = {height / 2, width / 2, base, 0};
    return c;
}

void to_json(json& j, const StcnetConfig& c) {
    j = {{"generator", c.generator},
         {"variant", to_string(c.variant)},
         {"temporal", c.temporal},
         {"global_disc", c.global_disc},
         {"local_disc", c.local_disc}};
}

void from_json(const json& j, StcnetConfig& c) {
    if (j.contains("generator")) from_json(j.at("generator"), c.generator);
    c.variant = temporal_variant_from_string(j.value("variant", to_string(c.variant)));
    c.temporal = j.value("temporal", c.temporal);
    if (j.contains("global_disc")) from_json(j.at("global_disc"), c.global_disc);
    if (j.contains("local_disc")) from_json(j.at("local_disc"), c.local_disc);
}

StcnetBundle::StcnetBundle(const StcnetConfig& cfg) : config(cfg) {
    spatial = SpatialGenerator(cfg.generator);
    temporal = TemporalGenerator(cfg.generator, cfg.variant);
    local = Discriminator(cfg.local_disc);
    global = Discriminator(cfg.global_disc);
}

StcnetBundle::Completion StcnetBundle::complete(const torch::Tensor& frames, const torch::Tensor& masks,
                                                const torch::Tensor& previous, const torch::Tensor& next) {
    auto m = masks.dim() == 3 ? masks.unsqueeze(1) : masks;
    auto masked = frames * (1 - m);
    Completion out;
    out.spatial = losses::composite(spatial(masked, m), frames, m);
    out.temporal =
        config.temporal ? losses::composite(temporal(out.spatial, m, previous, next), frames, m) : out.spatial;
    return out;
}

std::vector<torch::Tensor> StcnetBundle::generator_parameters() {
    auto params = spatial->parameters();
    if (config.temporal) {
        auto t = temporal->parameters();
        params.insert(params.end(), t.begin(), t.end());
    }
    return params;
}

void StcnetBundle::train(bool on) {
    spatial->train(on);
    temporal->train(on);
    local->train(on);
    global->train(on);
}

} // namespace vrstc::stcnet
