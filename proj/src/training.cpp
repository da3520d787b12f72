#include "vrstc/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "vrstc/error.hpp"
#include "vrstc/log.hpp"
#include "vrstc/png_io.hpp"

namespace fs = std::filesystem;
namespace F = torch::nn::functional;
using nlohmann::json;

namespace vrstc::training {

void ReidTrainConfig::validate() const {
    if (batch_size < 1 || track_length < 1 || epochs < 0 || samples_per_tracklet < 1 || decay_every < 1) {
        throw Error(ErrorKind::config, "re-ID training sizes must be positive");
    }
    if (!(learning_rate > 0) || !(lr_decay > 0) || weight_decay < 0) {
        throw Error(ErrorKind::config, "re-ID learning rates must be positive");
    }
}

void to_json(json& j, const ReidTrainConfig& c) {
    j = {{"profile", reid::to_string(c.profile)},
         {"nonlocal", c.nonlocal},
         {"batch_size", c.batch_size},
         {"track_length", c.track_length},
         {"epochs", c.epochs},
         {"learning_rate", c.learning_rate},
         {"lr_decay", c.lr_decay},
         {"decay_every", c.decay_every},
         {"weight_decay", c.weight_decay},
         {"samples_per_tracklet", c.samples_per_tracklet},
         {"mirror", c.mirror},
         {"seed", c.seed}};
}

void from_json(const json& j, ReidTrainConfig& c) {
    c.profile = reid::profile_from_string(j.value("profile", reid::to_string(c.profile)));
    c.nonlocal = j.value("nonlocal", c.nonlocal);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.track_length = j.value("track_length", c.track_length);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.decay_every = j.value("decay_every", c.decay_every);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.samples_per_tracklet = j.value("samples_per_tracklet", c.samples_per_tracklet);
    c.mirror = j.value("mirror", c.mirror);
    c.seed = j.value("seed", c.seed);
}

namespace {

void copy_matching_parameters(torch::nn::Module& target, const torch::nn::Module& source) {
    torch::NoGradGuard no_grad;
    auto source_params = source.named_parameters();
    auto source_buffers = source.named_buffers();
    for (auto& item : target.named_parameters()) {
        if (const auto* found = source_params.find(item.key()); found && found->sizes() == item.value().sizes()) {
            item.value().copy_(*found);
        }
    }
    for (auto& item : target.named_buffers()) {
        if (const auto* found = source_buffers.find(item.key()); found && found->sizes() == item.value().sizes()) {
            item.value().copy_(*found);
        }
    }
}

} // namespace

ReidTrainResult train_reid(const VideoDataset& dataset, const ReidTrainConfig& config, const MetricsSink& sink,
                           const ReidCheckpoint* init) {
    config.validate();
    const auto train = dataset.indices(Split::train);
    if (train.empty()) {
        throw Error(ErrorKind::data, "training split is empty");
    }
    torch::manual_seed(config.seed);
    std::mt19937_64 rng(config.seed);

    reid::ReidNetConfig net_config;
    net_config.profile = config.profile;
    net_config.nonlocal = config.nonlocal;
    net_config.num_classes = dataset.num_train_classes();
    net_config.height = dataset.height();
    net_config.width = dataset.width();

    ReidTrainResult result;
    result.checkpoint.model = reid::ReidNet(net_config);
    auto& model = result.checkpoint.model;
    if (init && init->model) {
        copy_matching_parameters(*model, *init->model);
    }
    for (const auto& t : dataset.tracklets()) {
        if (t.split == Split::train) {
            const int label = dataset.train_label(t.identity);
            if (std::find(result.checkpoint.label_map.begin(), result.checkpoint.label_map.end(),
                          std::pair{t.identity, label}) == result.checkpoint.label_map.end()) {
                result.checkpoint.label_map.emplace_back(t.identity, label);
            }
        }
    }

    torch::optim::Adam optimizer(model->parameters(), torch::optim::AdamOptions(config.learning_rate)
                                                          .weight_decay(config.weight_decay));
    std::bernoulli_distribution flip(0.5);
    int step = 0;
    model->train();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.learning_rate * std::pow(config.lr_decay, epoch / config.decay_every);
        for (auto& group : optimizer.param_groups()) {
            static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
        }
        std::vector<std::size_t> order;
        for (int r = 0; r < config.samples_per_tracklet; ++r) order.insert(order.end(), train.begin(), train.end());
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0;
        std::int64_t correct = 0, seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<torch::Tensor> tracks;
            std::vector<std::int64_t> labels;
            for (std::size_t i = start; i < end; ++i) {
                const auto& tracklet = dataset.tracklets()[order[i]];
                auto frames = sample_track(tracklet.track, config.track_length, rng).stacked();
                if (config.mirror && flip(rng)) frames = frames.flip({3});
                tracks.push_back(to_reid_range(frames));
                labels.push_back(dataset.train_label(tracklet.identity));
            }
            auto batch = torch::stack(tracks);
            auto target = torch::tensor(labels, torch::kInt64);

            optimizer.zero_grad();
            auto logits = model->logits(batch);
            auto loss = F::cross_entropy(logits, target);
            const double value = loss.item<double>();
            if (!std::isfinite(value)) {
                throw Error(ErrorKind::numeric, "re-ID loss diverged at step " + std::to_string(step));
            }
            loss.backward();
            optimizer.step();

            const auto n = static_cast<std::int64_t>(labels.size());
            loss_sum += value * static_cast<double>(n);
            correct += (logits.argmax(1) == target).sum().item<std::int64_t>();
            seen += n;
            result.step_losses.push_back(value);
            if (sink) sink({{"step", step}, {"epoch", epoch}, {"loss", value}, {"lr", lr}});
            ++step;
        }
        EpochStats stats{epoch, loss_sum / static_cast<double>(seen),
                         static_cast<double>(correct) / static_cast<double>(seen), lr};
        result.history.push_back(stats);
    }
    model->eval();
    return result;
}

ReidTrainResult pretrain_reid(const VideoDataset& dataset, ReidTrainConfig config, const MetricsSink& sink) {
    config.nonlocal = false;
    return train_reid(dataset, config, sink);
}

// ---------------------------------------------------------------------------

AblationFlags AblationFlags::preset(const std::string& name) {
    AblationFlags f;
    f.temporal = false;
    f.local_disc = false;
    f.global_disc = false;
    f.guider = false;
    if (name == "spa") return f;
    f.temporal = true;
    if (name == "spa+tem") return f;
    if (name == "spa+ae") {
        f.variant = stcnet::TemporalVariant::autoencoder;
        return f;
    }
    if (name == "spa+tae") {
        f.variant = stcnet::TemporalVariant::temporal_autoencoder;
        return f;
    }
    f.local_disc = true;
    if (name == "spa+tem+ld") return f;
    f.global_disc = true;
    if (name == "spa+tem+ld+gd") return f;
    f.guider = true;
    if (name == "full") return f;
    throw Error(ErrorKind::config, "unknown ablation preset '" + name + "'");
}

void AblationFlags::validate() const {
    if (!temporal && variant != stcnet::TemporalVariant::attention) {
        throw Error(ErrorKind::config, "temporal variants require the temporal generator");
    }
}

void to_json(json& j, const AblationFlags& f) {
    j = {{"temporal", f.temporal},
         {"temporal_variant", stcnet::to_string(f.variant)},
         {"local_disc", f.local_disc},
         {"global_disc", f.global_disc},
         {"guider", f.guider}};
}

void from_json(const json& j, AblationFlags& f) {
    f.temporal = j.value("temporal", f.temporal);
    f.variant = stcnet::temporal_variant_from_string(j.value("temporal_variant", stcnet::to_string(f.variant)));
    f.local_disc = j.value("local_disc", f.local_disc);
    f.global_disc = j.value("global_disc", f.global_disc);
    f.guider = j.value("guider", f.guider);
}

void StcnetTrainConfig::validate() const {
    if (steps < 0 || batch_size < 1 || heldout_samples < 1 || heldout_every < 0) {
        throw Error(ErrorKind::config, "STCnet training sizes must be positive");
    }
    if (!(learning_rate > 0) || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw Error(ErrorKind::config, "invalid STCnet optimizer settings");
    }
    weights.validate();
    flags.validate();
}

void to_json(json& j, const StcnetTrainConfig& c) {
    j = {{"profile", reid::to_string(c.profile)},
         {"steps", c.steps},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"lambda1", c.weights.adversarial},
         {"lambda2", c.weights.guider},
         {"flags", c.flags},
         {"heldout_samples", c.heldout_samples},
         {"heldout_every", c.heldout_every},
         {"seed", c.seed}};
}

void from_json(const json& j, StcnetTrainConfig& c) {
    c.profile = reid::profile_from_string(j.value("profile", reid::to_string(c.profile)));
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.weights.adversarial = j.value("lambda1", c.weights.adversarial);
    c.weights.guider = j.value("lambda2", c.weights.guider);
    if (j.contains("flags")) from_json(j.at("flags"), c.flags);
    c.heldout_samples = j.value("heldout_samples", c.heldout_samples);
    c.heldout_every = j.value("heldout_every", c.heldout_every);
    c.seed = j.value("seed", c.seed);
}

json StepLosses::to_json() const {
    return {{"step", step},
            {"L_r", reconstruction},
            {"L_a1", global_adversarial},
            {"L_a2", local_adversarial},
            {"L_c", guider},
            {"total", total},
            {"D_g", discriminator_global},
            {"D_l", discriminator_local}};
}

bool StepLosses::finite() const {
    for (double v : {reconstruction, global_adversarial, local_adversarial, guider, total, discriminator_global,
                     discriminator_local}) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::pair<int, int> select_adjacent_frames(int length, int index, const std::set<int>& occluded) {
    int previous = index, next = index;
    for (int j = index - 1; j >= 0; --j) {
        if (!occluded.contains(j)) {
            previous = j;
            break;
        }
    }
    for (int j = index + 1; j < length; ++j) {
        if (!occluded.contains(j)) {
            next = j;
            break;
        }
    }
    return {previous, next};
}

std::map<int, std::set<int>> occluded_frames(const std::vector<OcclusionRecord>& records) {
    std::map<int, std::set<int>> out;
    for (const auto& r : records) out[r.tracklet].insert(r.frame_index);
    return out;
}

namespace {

struct FrameRef {
    std::size_t tracklet; // index into dataset.tracklets()
    int frame;
    int previous;
    int next;
};

std::vector<FrameRef> clean_frames(const VideoDataset& dataset, const std::vector<std::size_t>& tracklets,
                                   const std::map<int, std::set<int>>& occluded) {
    static const std::set<int> none;
    std::vector<FrameRef> refs;
    for (auto i : tracklets) {
        const auto& t = dataset.tracklets()[i];
        const auto found = occluded.find(t.id);
        const auto& flagged = found == occluded.end() ? none : found->second;
        const int length = static_cast<int>(t.track.length());
        for (int f = 0; f < length; ++f) {
            if (flagged.contains(f)) continue;
            const auto [previous, next] = select_adjacent_frames(length, f, flagged);
            refs.push_back({i, f, previous, next});
        }
    }
    return refs;
}

torch::Tensor resize_to(const torch::Tensor& frames, std::int64_t height, std::int64_t width) {
    if (frames.size(2) == height && frames.size(3) == width) return frames;
    return F::interpolate(frames, F::InterpolateFuncOptions()
                                      .size(std::vector<std::int64_t>{height, width})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
}

struct Batch {
    torch::Tensor target, previous, next, mask, labels;
};

Batch gather(const VideoDataset& dataset, const std::vector<FrameRef>& refs, const std::vector<std::size_t>& picks,
             const std::vector<Region>& regions, const stcnet::GeneratorConfig& generator, bool want_labels) {
    std::vector<torch::Tensor> target, previous, next;
    std::vector<std::int64_t> labels;
    for (auto p : picks) {
        const auto& ref = refs[p];
        const auto& t = dataset.tracklets()[ref.tracklet];
        target.push_back(t.track.frames[static_cast<std::size_t>(ref.frame)].pixels);
        previous.push_back(t.track.frames[static_cast<std::size_t>(ref.previous)].pixels);
        next.push_back(t.track.frames[static_cast<std::size_t>(ref.next)].pixels);
        if (want_labels) labels.push_back(dataset.train_label(t.identity));
    }
    Batch b;
    b.target = resize_to(torch::stack(target), generator.height, generator.width);
    b.previous = resize_to(torch::stack(previous), generator.height, generator.width);
    b.next = resize_to(torch::stack(next), generator.height, generator.width);
    std::vector<torch::Tensor> masks;
    for (auto region : regions) masks.push_back(union_mask({region}, generator.height, generator.width));
    b.mask = torch::stack(masks).unsqueeze(1);
    if (want_labels) b.labels = torch::tensor(labels, torch::kInt64);
    return b;
}

std::vector<std::size_t> heldout_tracklets(const VideoDataset& dataset) {
    auto held = dataset.indices(Split::query);
    const auto gallery = dataset.indices(Split::gallery);
    held.insert(held.end(), gallery.begin(), gallery.end());
    if (held.empty()) held = dataset.indices(Split::train);
    std::sort(held.begin(), held.end());
    return held;
}

} // namespace

double heldout_masked_l1(stcnet::StcnetBundle& bundle, const VideoDataset& dataset,
                         const std::vector<OcclusionRecord>& flagged, int samples, std::uint64_t seed) {
    const auto refs = clean_frames(dataset, heldout_tracklets(dataset), occluded_frames(flagged));
    if (refs.empty()) {
        throw Error(ErrorKind::data, "no unflagged held-out frames");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, refs.size() - 1);
    std::uniform_int_distribution<int> region(0, 2);
    std::vector<std::size_t> picks;
    std::vector<Region> regions;
    for (int i = 0; i < samples; ++i) {
        picks.push_back(pick(rng));
        regions.push_back(static_cast<Region>(region(rng)));
    }
    torch::NoGradGuard no_grad;
    bundle.train(false);
    auto b = gather(dataset, refs, picks, regions, bundle.config.generator, false);
    auto out = bundle.complete(b.target, b.mask, b.previous, b.next);
    const auto masked_values = b.mask.sum().item<double>() * 3.0;
    return (out.temporal - b.target).abs().sum().item<double>() / masked_values;
}

StcnetTrainResult train_stcnet(const VideoDataset& dataset, const std::vector<OcclusionRecord>& flagged,
                               stcnet::Guider guider, const StcnetTrainConfig& config, const MetricsSink& sink) {
    config.validate();
    const auto& flags = config.flags;
    if (flags.guider && !guider) {
        throw Error(ErrorKind::config, "guider loss enabled without a pretrained guider");
    }
    const auto occluded = occluded_frames(flagged);
    const auto refs = clean_frames(dataset, dataset.indices(Split::train), occluded);
    if (refs.empty()) {
        throw Error(ErrorKind::data, "no unoccluded training frames for STCnet");
    }

    torch::manual_seed(config.seed);
    std::mt19937_64 rng(config.seed);
    auto net_config = stcnet::StcnetConfig::for_profile(config.profile, dataset.height(), dataset.width());
    if (config.profile == reid::Profile::paper) {
        // Completion runs at the generator's native resolution.
        net_config = stcnet::StcnetConfig::for_profile(config.profile, 128, 64);
    }
    net_config.temporal = flags.temporal;
    net_config.variant = flags.variant;
    StcnetTrainResult result{stcnet::StcnetBundle(net_config)};
    auto& bundle = result.bundle;

    if (guider) result.guider_checksum_before = parameter_checksum(*guider);
    result.heldout_l1_initial = heldout_masked_l1(bundle, dataset, flagged, config.heldout_samples, config.seed + 1);

    const auto adam = [&](std::vector<torch::Tensor> params) {
        return torch::optim::Adam(std::move(params), torch::optim::AdamOptions(config.learning_rate)
                                                         .betas({config.beta1, config.beta2}));
    };
    auto gen_optimizer = adam(bundle.generator_parameters());
    std::vector<torch::Tensor> disc_params;
    if (flags.global_disc) {
        auto p = bundle.global->parameters();
        disc_params.insert(disc_params.end(), p.begin(), p.end());
    }
    if (flags.local_disc) {
        auto p = bundle.local->parameters();
        disc_params.insert(disc_params.end(), p.begin(), p.end());
    }
    std::optional<torch::optim::Adam> disc_optimizer;
    if (!disc_params.empty()) disc_optimizer.emplace(adam(disc_params));

    const auto local_h = net_config.local_disc.height, local_w = net_config.local_disc.width;
    std::uniform_int_distribution<std::size_t> pick(0, refs.size() - 1);
    std::uniform_int_distribution<int> region_draw(0, 2);

    bundle.train(true);
    for (int step = 0; step < config.steps; ++step) {
        std::vector<std::size_t> picks;
        std::vector<Region> regions;
        for (int i = 0; i < config.batch_size; ++i) {
            picks.push_back(pick(rng));
            regions.push_back(static_cast<Region>(region_draw(rng)));
        }
        auto b = gather(dataset, refs, picks, regions, net_config.generator, flags.guider);
        auto out = bundle.complete(b.target, b.mask, b.previous, b.next);

        StepLosses record;
        record.step = step;
        auto zero = torch::zeros({}, torch::kFloat32);
        torch::Tensor real_local, fake_local;
        if (flags.local_disc) {
            real_local = stcnet::local_crop(b.target, b.mask, local_h, local_w);
            fake_local = stcnet::local_crop(out.temporal, b.mask, local_h, local_w);
        }

        if (disc_optimizer) {
            disc_optimizer->zero_grad();
            auto d_loss = zero;
            if (flags.global_disc) {
                auto l = losses::adversarial_losses_from_logits(bundle.global->logits(b.target),
                                                                bundle.global->logits(out.temporal.detach()));
                record.discriminator_global = l.discriminator.item<double>();
                d_loss = d_loss + l.discriminator;
            }
            if (flags.local_disc) {
                auto l = losses::adversarial_losses_from_logits(bundle.local->logits(real_local),
                                                                bundle.local->logits(fake_local.detach()));
                record.discriminator_local = l.discriminator.item<double>();
                d_loss = d_loss + l.discriminator;
            }
            if (!std::isfinite(d_loss.item<double>())) {
                throw Error(ErrorKind::numeric, "discriminator loss diverged at step " + std::to_string(step));
            }
            d_loss.backward();
            disc_optimizer->step();
        }

        gen_optimizer.zero_grad();
        auto l_r = losses::reconstruction_loss(b.target, out.spatial, out.temporal);
        auto l_a1 = zero, l_a2 = zero, l_c = zero;
        if (flags.global_disc) {
            l_a1 = F::softplus(-bundle.global->logits(out.temporal)).mean();
        }
        if (flags.local_disc) {
            l_a2 = F::softplus(-bundle.local->logits(fake_local)).mean();
        }
        if (flags.guider) {
            l_c = losses::guider_loss(guider->logits(out.temporal), b.labels);
        }
        auto total = losses::total_loss(l_r, l_a1, l_a2, l_c, config.weights);
        total.backward();
        gen_optimizer.step();

        record.reconstruction = l_r.item<double>();
        record.global_adversarial = l_a1.item<double>();
        record.local_adversarial = l_a2.item<double>();
        record.guider = l_c.item<double>();
        record.total = total.item<double>();
        if (!record.finite()) {
            throw Error(ErrorKind::numeric, "STCnet loss diverged at step " + std::to_string(step));
        }
        if (sink) sink(record.to_json());
        result.log.push_back(record);
        if (config.heldout_every > 0 && (step + 1) % config.heldout_every == 0 && step + 1 < config.steps) {
            const double l1 = heldout_masked_l1(bundle, dataset, flagged, config.heldout_samples, config.seed + 1);
            bundle.train(true);
            if (sink) sink(json{{"step", step}, {"heldout_l1", l1}});
        }
    }

    result.heldout_l1_final = heldout_masked_l1(bundle, dataset, flagged, config.heldout_samples, config.seed + 1);
    if (guider) result.guider_checksum_after = parameter_checksum(*guider);
    bundle.train(false);
    return result;
}

// ---------------------------------------------------------------------------

DatasetManifest complete_dataset(const VideoDataset& dataset, const std::vector<OcclusionRecord>& flagged,
                                 stcnet::StcnetBundle& bundle, const fs::path& out_root,
                                 const std::string& checkpoint_id) {
    std::error_code ec;
    fs::create_directories(out_root, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create " + out_root.string());
    }
    const auto& source = dataset.manifest();
    DatasetManifest manifest = source;
    manifest.root = out_root;
    manifest.source_checkpoint = checkpoint_id;
    manifest.generator = {{"kind", "completed"},
                          {"source", source.generator},
                          {"completed_regions", occlusions_to_json(flagged)}};

    std::map<std::pair<int, int>, std::vector<Region>> regions;
    for (const auto& r : flagged) regions[{r.tracklet, r.frame_index}].push_back(r.region);
    const auto occluded = occluded_frames(flagged);
    const auto& gen = bundle.config.generator;

    torch::NoGradGuard no_grad;
    bundle.train(false);
    for (std::size_t ti = 0; ti < source.tracklets.size(); ++ti) {
        const auto& entry = source.tracklets[ti];
        const auto& tracklet = dataset.tracklet(entry.id);
        const auto found = occluded.find(entry.id);
        static const std::set<int> none;
        const auto& frames_flagged = found == occluded.end() ? none : found->second;

        for (const auto& relative : entry.frames) {
            fs::create_directories((out_root / relative).parent_path(), ec);
        }
        for (const auto& [index, relative] : entry.clean_frames) {
            fs::create_directories((out_root / relative).parent_path(), ec);
            fs::copy_file(source.root / relative, out_root / relative, fs::copy_options::overwrite_existing, ec);
            if (ec) throw Error(ErrorKind::io, "cannot copy " + (source.root / relative).string());
        }

        std::vector<int> todo;
        for (int f = 0; f < static_cast<int>(entry.frames.size()); ++f) {
            if (!frames_flagged.contains(f)) {
                fs::copy_file(source.root / entry.frames[static_cast<std::size_t>(f)],
                              out_root / entry.frames[static_cast<std::size_t>(f)],
                              fs::copy_options::overwrite_existing, ec);
                if (ec) throw Error(ErrorKind::io, "cannot copy " + entry.frames[static_cast<std::size_t>(f)]);
            } else {
                todo.push_back(f);
            }
        }
        if (todo.empty()) continue;

        const int length = static_cast<int>(tracklet.track.length());
        std::vector<torch::Tensor> target, previous, next, masks, native_masks;
        for (int f : todo) {
            const auto [p, n] = select_adjacent_frames(length, f, frames_flagged);
            target.push_back(tracklet.track.frames[static_cast<std::size_t>(f)].pixels);
            previous.push_back(tracklet.track.frames[static_cast<std::size_t>(p)].pixels);
            next.push_back(tracklet.track.frames[static_cast<std::size_t>(n)].pixels);
            const auto& frame_regions = regions.at({entry.id, f});
            masks.push_back(union_mask(frame_regions, gen.height, gen.width));
            native_masks.push_back(union_mask(frame_regions, dataset.height(), dataset.width()));
        }
        auto x = torch::stack(target);
        auto out = bundle.complete(resize_to(x, gen.height, gen.width), torch::stack(masks).unsqueeze(1),
                                   resize_to(torch::stack(previous), gen.height, gen.width),
                                   resize_to(torch::stack(next), gen.height, gen.width));
        auto completed = resize_to(out.temporal, dataset.height(), dataset.width());

        for (std::size_t i = 0; i < todo.size(); ++i) {
            const auto& relative = entry.frames[static_cast<std::size_t>(todo[i])];
            Image8 image = read_png(source.root / relative);
            const Image8 generated = tensor_to_image(completed[static_cast<std::int64_t>(i)]);
            auto mask = native_masks[i].accessor<float, 2>();
            for (int y = 0; y < image.height; ++y) {
                for (int xcol = 0; xcol < image.width; ++xcol) {
                    if (mask[y][xcol] < 0.5f) continue;
                    for (int c = 0; c < 3; ++c) image.at(y, xcol, c) = generated.at(y, xcol, c);
                }
            }
            write_png(out_root / relative, image);
        }
    }
    manifest.save();
    return manifest;
}

// ---------------------------------------------------------------------------

EmbeddingSet embed_split(const VideoDataset& dataset, Split split, reid::ReidNet& model, const FrameFilter& keep) {
    EmbeddingSet set;
    std::vector<torch::Tensor> vectors;
    for (auto i : dataset.indices(split)) {
        const auto& tracklet = dataset.tracklets()[i];
        Track track;
        if (keep) {
            for (int f : keep(tracklet)) track.frames.push_back(tracklet.track.frames[static_cast<std::size_t>(f)]);
        } else {
            track = tracklet.track;
        }
        auto e = reid::video_embedding(track, model, tracklet.id);
        vectors.push_back(e.vector);
        set.identities.push_back(tracklet.identity);
        set.cameras.push_back(tracklet.camera);
        set.tracklets.push_back(tracklet.id);
    }
    set.vectors = vectors.empty() ? torch::zeros({0, model->feature_dim()}) : torch::stack(vectors);
    return set;
}

reid::RetrievalMetrics evaluate_embeddings(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                                           bool cross_camera) {
    const auto ranking = reid::retrieve(queries.vectors, gallery.vectors);
    return reid::cmc_map(ranking, queries.identities, gallery.identities, queries.cameras, gallery.cameras,
                         cross_camera);
}

reid::RetrievalMetrics evaluate_reid(const VideoDataset& dataset, reid::ReidNet& model) {
    const auto queries = embed_split(dataset, Split::query, model);
    const auto gallery = embed_split(dataset, Split::gallery, model);
    return evaluate_embeddings(queries, gallery, dataset.num_cameras() > 1);
}

reid::RetrievalMetrics evaluate_with_discard(const VideoDataset& dataset, reid::ReidNet& model,
                                             const occlusion::ScoreTables& tables, double tau) {
    const FrameFilter keep = [&](const Tracklet& tracklet) {
        const auto& scores = tables.at(tracklet.id).scores;
        auto worst = std::get<0>(scores.min(1)); // per-frame minimum over regions
        auto acc = worst.accessor<double, 1>();
        std::vector<int> kept;
        double best = -2.0;
        for (std::int64_t t = 0; t < worst.size(0); ++t) {
            if (acc[t] >= tau) kept.push_back(static_cast<int>(t));
            best = std::max(best, acc[t]);
        }
        if (kept.empty()) {
            for (std::int64_t t = 0; t < worst.size(0); ++t) {
                if (acc[t] == best) kept.push_back(static_cast<int>(t));
            }
        }
        return kept;
    };
    const auto queries = embed_split(dataset, Split::query, model, keep);
    const auto gallery = embed_split(dataset, Split::gallery, model, keep);
    return evaluate_embeddings(queries, gallery, dataset.num_cameras() > 1);
}

} // namespace vrstc::training
