#include "vrstc/reid.hpp"

#include <algorithm>
#include <numeric>

#include "vrstc/error.hpp"

namespace nn = torch::nn;
using nlohmann::json;

namespace vrstc::reid {

std::string to_string(Profile profile) { return profile == Profile::paper ? "paper" : "tiny"; }

Profile profile_from_string(const std::string& name) {
    if (name == "tiny") return Profile::tiny;
    if (name == "paper") return Profile::paper;
    throw Error(ErrorKind::config, "unknown profile '" + name + "'");
}

namespace {

struct StageSpec {
    std::int64_t width; // output channels for basic blocks, bottleneck width otherwise
    int blocks;
    std::int64_t stride;
};

std::vector<StageSpec> stage_specs(Profile profile) {
    if (profile == Profile::paper) {
        // ResNet-50 with the last stage's down-sampling removed.
        return {{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 1}};
    }
    return {{16, 1, 1}, {32, 1, 2}, {64, 1, 1}, {64, 1, 1}};
}

// Every other block from the start of the stage, up to `count` of them.
void place_every_other(std::vector<NonLocalPlacement>& out, int stage, int blocks, int count) {
    for (int b = 0, placed = 0; b < blocks && placed < count; b += 2, ++placed) {
        out.push_back({stage, b});
    }
}

nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride = 1) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(false));
}

class BasicBlockImpl : public nn::Module {
public:
    BasicBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride)
        : conv1(register_module("conv1", conv(in, out, 3, stride))),
          bn1(register_module("bn1", nn::BatchNorm2d(out))),
          conv2(register_module("conv2", conv(out, out, 3))),
          bn2(register_module("bn2", nn::BatchNorm2d(out))) {
        if (stride != 1 || in != out) {
            shortcut = register_module("shortcut", nn::Sequential(conv(in, out, 1, stride), nn::BatchNorm2d(out)));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = torch::relu(bn1(conv1(x)));
        y = bn2(conv2(y));
        return torch::relu(y + (shortcut ? shortcut->forward(x) : x));
    }

    nn::Conv2d conv1;
    nn::BatchNorm2d bn1;
    nn::Conv2d conv2;
    nn::BatchNorm2d bn2;
    nn::Sequential shortcut{nullptr};
};
TORCH_MODULE(BasicBlock);

class BottleneckImpl : public nn::Module {
public:
    static constexpr std::int64_t kExpansion = 4;

    BottleneckImpl(std::int64_t in, std::int64_t width, std::int64_t stride)
        : conv1(register_module("conv1", conv(in, width, 1))),
          bn1(register_module("bn1", nn::BatchNorm2d(width))),
          conv2(register_module("conv2", conv(width, width, 3, stride))),
          bn2(register_module("bn2", nn::BatchNorm2d(width))),
          conv3(register_module("conv3", conv(width, width * kExpansion, 1))),
          bn3(register_module("bn3", nn::BatchNorm2d(width * kExpansion))) {
        if (stride != 1 || in != width * kExpansion) {
            shortcut = register_module(
                "shortcut", nn::Sequential(conv(in, width * kExpansion, 1, stride), nn::BatchNorm2d(width * kExpansion)));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = torch::relu(bn1(conv1(x)));
        y = torch::relu(bn2(conv2(y)));
        y = bn3(conv3(y));
        return torch::relu(y + (shortcut ? shortcut->forward(x) : x));
    }

    nn::Conv2d conv1;
    nn::BatchNorm2d bn1;
    nn::Conv2d conv2;
    nn::BatchNorm2d bn2;
    nn::Conv2d conv3;
    nn::BatchNorm2d bn3;
    nn::Sequential shortcut{nullptr};
};
TORCH_MODULE(Bottleneck);

} // namespace

std::vector<NonLocalPlacement> ReidNetConfig::nonlocal_placements() const {
    std::vector<NonLocalPlacement> placements;
    if (!nonlocal) return placements;
    const auto specs = stage_specs(profile);
    // Two blocks in the res3 analog, three in the res4 analog, capped by
    // how many every-other slots each stage has.
    place_every_other(placements, 1, specs[1].blocks, 2);
    place_every_other(placements, 2, specs[2].blocks, 3);
    return placements;
}

void to_json(json& j, const ReidNetConfig& c) {
    json placements = json::array();
    for (const auto& p : c.nonlocal_placements()) placements.push_back({p.stage, p.block});
    j = {{"profile", to_string(c.profile)},
         {"nonlocal", c.nonlocal},
         {"num_classes", c.num_classes},
         {"height", c.height},
         {"width", c.width},
         {"nonlocal_placements", placements}};
}

void from_json(const json& j, ReidNetConfig& c) {
    c.profile = profile_from_string(j.value("profile", to_string(c.profile)));
    c.nonlocal = j.value("nonlocal", c.nonlocal);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
}

// ---------------------------------------------------------------------------

NonLocalBlockImpl::NonLocalBlockImpl(std::int64_t channels, std::int64_t reduction)
    : inner_(std::max<std::int64_t>(1, channels / reduction)) {
    auto projection = [](std::int64_t in, std::int64_t out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 1)); };
    theta = register_module("theta", projection(channels, inner_));
    phi = register_module("phi", projection(channels, inner_));
    g = register_module("g", projection(channels, inner_));
    out = register_module("out", projection(inner_, channels));
    out_norm = register_module("out_norm", nn::BatchNorm2d(channels));
    torch::NoGradGuard no_grad;
    out_norm->weight.zero_();
}

std::pair<torch::Tensor, torch::Tensor> NonLocalBlockImpl::forward_with_weights(const torch::Tensor& x) {
    if (x.dim() != 5) {
        throw Error(ErrorKind::shape, "non-local block expects (B, T, C, H, W)");
    }
    const auto b = x.size(0), t = x.size(1), c = x.size(2), h = x.size(3), w = x.size(4);
    auto flat = x.reshape({b * t, c, h, w});
    // (B*T, C', H, W) -> (B, T*H*W, C')
    auto tokens = [&](const torch::Tensor& y) {
        return y.reshape({b, t, inner_, h * w}).permute({0, 1, 3, 2}).reshape({b, t * h * w, inner_});
    };
    auto q = tokens(theta(flat));
    auto k = tokens(phi(flat));
    auto v = tokens(g(flat));
    auto weights = torch::softmax(torch::bmm(q, k.transpose(1, 2)), -1);
    auto y = torch::bmm(weights, v); // (B, THW, C')
    y = y.reshape({b, t, h * w, inner_}).permute({0, 1, 3, 2}).reshape({b * t, inner_, h, w});
    auto z = out_norm(out(y)).reshape({b, t, c, h, w}) + x;
    return {z, weights};
}

torch::Tensor NonLocalBlockImpl::forward(const torch::Tensor& x) { return forward_with_weights(x).first; }

BackboneImpl::BackboneImpl(const ReidNetConfig& config) {
    const auto specs = stage_specs(config.profile);
    const auto placements = config.nonlocal_placements();
    std::int64_t channels = 0;
    if (config.profile == Profile::paper) {
        stem_ = nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)),
                               nn::BatchNorm2d(64), nn::ReLU(),
                               nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
        channels = 64;
        stride_ = 4;
    } else {
        stem_ = nn::Sequential(conv(3, 16, 3, 2), nn::BatchNorm2d(16), nn::ReLU());
        channels = 16;
        stride_ = 2;
    }
    register_module("stem", stem_);

    for (std::size_t s = 0; s < specs.size(); ++s) {
        Stage stage;
        for (int b = 0; b < specs[s].blocks; ++b) {
            const std::int64_t stride = b == 0 ? specs[s].stride : 1;
            const auto name = "stage" + std::to_string(s) + "_block" + std::to_string(b);
            if (config.profile == Profile::paper) {
                auto block = register_module(name, Bottleneck(channels, specs[s].width, stride));
                stage.blocks.emplace_back(block);
                channels = specs[s].width * BottleneckImpl::kExpansion;
            } else {
                auto block = register_module(name, BasicBlock(channels, specs[s].width, stride));
                stage.blocks.emplace_back(block);
                channels = specs[s].width;
            }
            const NonLocalPlacement here{static_cast<int>(s), b};
            if (std::find(placements.begin(), placements.end(), here) != placements.end()) {
                stage.nonlocal.push_back(register_module(name + "_nonlocal", NonLocalBlock(channels)));
            } else {
                stage.nonlocal.push_back(nullptr);
            }
        }
        stride_ *= specs[s].stride;
        stages_.push_back(std::move(stage));
    }
    feature_dim_ = channels;
}

torch::Tensor BackboneImpl::forward(const torch::Tensor& frames) {
    if (frames.dim() != 5) {
        throw Error(ErrorKind::shape, "backbone expects (B, T, 3, H, W)");
    }
    const auto b = frames.size(0), t = frames.size(1);
    auto x = stem_->forward(frames.reshape({b * t, frames.size(2), frames.size(3), frames.size(4)}));
    for (auto& stage : stages_) {
        for (std::size_t i = 0; i < stage.blocks.size(); ++i) {
            x = stage.blocks[i].forward(x);
            if (stage.nonlocal[i]) {
                auto seq = x.reshape({b, t, x.size(1), x.size(2), x.size(3)});
                x = stage.nonlocal[i]->forward(seq).reshape_as(x);
            }
        }
    }
    return x.reshape({b, t, x.size(1), x.size(2), x.size(3)});
}

ReidNetImpl::ReidNetImpl(const ReidNetConfig& config) : config_(config) {
    if (config.num_classes < 1) {
        throw Error(ErrorKind::config, "re-ID network needs at least one class");
    }
    backbone = register_module("backbone", Backbone(config));
    classifier = register_module("classifier", nn::Linear(backbone->feature_dim(), config.num_classes));
}

torch::Tensor ReidNetImpl::feature_maps(const torch::Tensor& frames) { return backbone->forward(frames); }

torch::Tensor ReidNetImpl::video_features(const torch::Tensor& frames) {
    return feature_maps(frames).mean({3, 4}).mean(1);
}

torch::Tensor ReidNetImpl::classify_features(const torch::Tensor& features) { return classifier(features); }

torch::Tensor ReidNetImpl::logits(const torch::Tensor& frames) { return classify_features(video_features(frames)); }

VideoEmbedding video_embedding(const Track& track, ReidNet& model, int tracklet_id) {
    if (track.empty()) {
        throw Error(ErrorKind::data, "cannot embed an empty track");
    }
    torch::NoGradGuard no_grad;
    const bool was_training = model->is_training();
    model->eval();
    auto frames = to_reid_range(track.stacked()).unsqueeze(0);
    VideoEmbedding embedding;
    embedding.vector = model->video_features(frames).squeeze(0);
    embedding.identity = track.frames.front().identity;
    embedding.camera = track.frames.front().camera;
    embedding.tracklet = tracklet_id;
    model->train(was_training);
    return embedding;
}

// ---------------------------------------------------------------------------

namespace {

void check_embeddings(const torch::Tensor& queries, const torch::Tensor& gallery) {
    if (queries.dim() != 2 || gallery.dim() != 2 || queries.size(1) != gallery.size(1)) {
        throw Error(ErrorKind::shape, "query and gallery embeddings must share their dimension");
    }
    if (gallery.size(0) == 0) {
        throw Error(ErrorKind::data, "empty gallery");
    }
}

} // namespace

torch::Tensor pairwise_distances(const torch::Tensor& queries, const torch::Tensor& gallery) {
    check_embeddings(queries, gallery);
    auto q = queries.to(torch::kFloat64).unsqueeze(1);
    auto g = gallery.to(torch::kFloat64).unsqueeze(0);
    return (q - g).pow(2).sum(-1).sqrt();
}

torch::Tensor pairwise_distances_expanded(const torch::Tensor& queries, const torch::Tensor& gallery) {
    check_embeddings(queries, gallery);
    auto q = queries.to(torch::kFloat64);
    auto g = gallery.to(torch::kFloat64);
    auto squared = q.pow(2).sum(1, true) + g.pow(2).sum(1).unsqueeze(0) - 2.0 * q.matmul(g.t());
    return squared.clamp_min(0).sqrt();
}

RankingResult retrieve(const torch::Tensor& queries, const torch::Tensor& gallery) {
    RankingResult result;
    result.distances = pairwise_distances(queries, gallery).contiguous();
    const auto nq = result.distances.size(0), ng = result.distances.size(1);
    auto acc = result.distances.accessor<double, 2>();
    result.rankings.resize(static_cast<std::size_t>(nq));
    for (std::int64_t q = 0; q < nq; ++q) {
        auto& order = result.rankings[static_cast<std::size_t>(q)];
        order.resize(static_cast<std::size_t>(ng));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return acc[q][a] < acc[q][b]; });
    }
    return result;
}

double RetrievalMetrics::rank(int r) const {
    if (cmc.empty() || r < 1) return 0.0;
    return cmc[static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(r), cmc.size()) - 1)];
}

RetrievalMetrics cmc_map(const RankingResult& result, const std::vector<int>& query_labels,
                         const std::vector<int>& gallery_labels, const std::vector<int>& query_cameras,
                         const std::vector<int>& gallery_cameras, bool cross_camera) {
    const auto nq = result.rankings.size();
    const auto ng = gallery_labels.size();
    if (query_labels.size() != nq || query_cameras.size() != nq || gallery_cameras.size() != ng) {
        throw Error(ErrorKind::shape, "label/camera vectors do not match the ranking");
    }
    RetrievalMetrics metrics;
    metrics.cmc.assign(ng, 0.0);
    double ap_sum = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
        int position = 0, hits = 0, first_hit = -1;
        double precision_sum = 0.0;
        for (int g : result.rankings[q]) {
            const auto gi = static_cast<std::size_t>(g);
            const bool same_id = gallery_labels[gi] == query_labels[q];
            if (cross_camera && same_id && gallery_cameras[gi] == query_cameras[q]) continue;
            ++position;
            if (!same_id) continue;
            ++hits;
            if (first_hit < 0) first_hit = position;
            precision_sum += static_cast<double>(hits) / position;
        }
        if (hits == 0) {
            ++metrics.excluded_queries;
            continue;
        }
        ++metrics.evaluated_queries;
        ap_sum += precision_sum / hits;
        for (std::size_t r = static_cast<std::size_t>(first_hit - 1); r < ng; ++r) metrics.cmc[r] += 1.0;
    }
    if (metrics.evaluated_queries > 0) {
        for (auto& v : metrics.cmc) v /= metrics.evaluated_queries;
        metrics.map = ap_sum / metrics.evaluated_queries;
    }
    return metrics;
}

json metrics_report(const RetrievalMetrics& metrics) {
    return {{"rank1", metrics.rank(1)},
            {"rank5", metrics.rank(5)},
            {"rank10", metrics.rank(10)},
            {"rank20", metrics.rank(20)},
            {"mAP", metrics.map},
            {"evaluated_queries", metrics.evaluated_queries},
            {"excluded_queries", metrics.excluded_queries}};
}

} // namespace vrstc::reid
