#include "vrstc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "vrstc/error.hpp"
#include "vrstc/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vrstc {

std::string_view to_string(Region region) {
    switch (region) {
    case Region::upper: return "upper";
    case Region::middle: return "middle";
    case Region::lower: return "lower";
    }
    return "upper";
}

Region region_from_string(std::string_view name) {
    if (name == "upper" || name == "u") return Region::upper;
    if (name == "middle" || name == "m") return Region::middle;
    if (name == "lower" || name == "l") return Region::lower;
    throw Error(ErrorKind::data, "unknown region '" + std::string(name) + "'");
}

RowBand region_rows(Region region, std::int64_t height) {
    const std::int64_t third = height / 3;
    switch (region) {
    case Region::upper: return {0, third};
    case Region::middle: return {third, 2 * third};
    case Region::lower: return {2 * third, height};
    }
    return {0, 0};
}

torch::Tensor Track::stacked() const {
    if (frames.empty()) {
        throw Error(ErrorKind::data, "empty track");
    }
    std::vector<torch::Tensor> pixels;
    pixels.reserve(frames.size());
    for (const auto& frame : frames) {
        pixels.push_back(frame.pixels);
    }
    return torch::stack(pixels);
}

void Track::validate() const {
    if (frames.empty()) {
        throw Error(ErrorKind::data, "empty track");
    }
    const auto& first = frames.front();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& frame = frames[i];
        if (frame.identity != first.identity || frame.camera != first.camera) {
            throw Error(ErrorKind::data, "track mixes identities or cameras");
        }
        if (frame.pixels.sizes() != first.pixels.sizes()) {
            throw Error(ErrorKind::shape, "track mixes frame sizes");
        }
        if (i > 0 && frame.index <= frames[i - 1].index) {
            throw Error(ErrorKind::data, "track frame indices must increase");
        }
    }
}

RegionMask RegionMask::make(Region region, std::int64_t height, std::int64_t width) {
    RegionMask result;
    result.region = region;
    result.mask = torch::zeros({height, width}, torch::kFloat32);
    const auto band = region_rows(region, height);
    result.mask.slice(0, band.begin, band.end).fill_(1.0);
    return result;
}

torch::Tensor union_mask(const std::vector<Region>& regions, std::int64_t height, std::int64_t width) {
    auto mask = torch::zeros({height, width}, torch::kFloat32);
    for (auto region : regions) {
        const auto band = region_rows(region, height);
        mask.slice(0, band.begin, band.end).fill_(1.0);
    }
    return mask;
}

Frame apply_region_mask(const Frame& frame, const RegionMask& mask) {
    const auto& pixels = frame.pixels;
    if (pixels.dim() != 3 || mask.mask.dim() != 2 || pixels.size(1) != mask.mask.size(0) ||
        pixels.size(2) != mask.mask.size(1)) {
        throw Error(ErrorKind::shape, "mask does not match frame size");
    }
    Frame out = frame;
    out.pixels = pixels * (1.0 - mask.mask).unsqueeze(0);
    return out;
}

namespace {

// ImageNet channel statistics.
torch::Tensor channel_mean() { return torch::tensor({0.485f, 0.456f, 0.406f}).view({3, 1, 1}); }
torch::Tensor channel_std() { return torch::tensor({0.229f, 0.224f, 0.225f}).view({3, 1, 1}); }

} // namespace

torch::Tensor to_reid_range(const torch::Tensor& completion_pixels) {
    auto unit = (completion_pixels + 1.0) * 0.5;
    return (unit - channel_mean().to(unit.device())) / channel_std().to(unit.device());
}

torch::Tensor to_completion_range(const torch::Tensor& reid_pixels) {
    auto unit = reid_pixels * channel_std().to(reid_pixels.device()) + channel_mean().to(reid_pixels.device());
    return unit * 2.0 - 1.0;
}

json occlusions_to_json(const std::vector<OcclusionRecord>& records) {
    json array = json::array();
    for (const auto& record : records) {
        array.push_back({{"tracklet", record.tracklet},
                         {"frame_index", record.frame_index},
                         {"region", std::string(to_string(record.region))}});
    }
    return array;
}

std::vector<OcclusionRecord> occlusions_from_json(const json& array) {
    std::vector<OcclusionRecord> records;
    for (const auto& item : array) {
        records.push_back({item.at("tracklet").get<int>(), item.at("frame_index").get<int>(),
                           region_from_string(item.at("region").get<std::string>())});
    }
    return records;
}

std::string_view to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
    }
    return "train";
}

Split split_from_string(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "query") return Split::query;
    if (name == "gallery") return Split::gallery;
    throw Error(ErrorKind::data, "unknown split '" + std::string(name) + "'");
}

json DatasetManifest::to_json() const {
    json list = json::array();
    for (const auto& t : tracklets) {
        json clean = json::object();
        for (const auto& [index, file] : t.clean_frames) {
            clean[std::to_string(index)] = file;
        }
        list.push_back({{"id", t.id},
                        {"identity", t.identity},
                        {"camera", t.camera},
                        {"split", std::string(to_string(t.split))},
                        {"frames", t.frames},
                        {"clean_frames", clean}});
    }
    json j = {{"format", "vrstc-dataset"},
              {"version", kVersion},
              {"height", height},
              {"width", width},
              {"tracklets", list},
              {"occlusions", occlusions_to_json(occlusions)}};
    if (source_checkpoint) {
        j["source_checkpoint"] = *source_checkpoint;
    }
    if (!generator.is_null()) {
        j["generator"] = generator;
    }
    return j;
}

DatasetManifest DatasetManifest::from_json(const json& j, const fs::path& root) {
    if (j.value("version", 0) != kVersion) {
        throw Error(ErrorKind::data, "unsupported manifest version in " + root.string());
    }
    DatasetManifest manifest;
    manifest.root = root;
    manifest.height = j.at("height").get<int>();
    manifest.width = j.at("width").get<int>();
    for (const auto& item : j.at("tracklets")) {
        TrackletEntry entry;
        entry.id = item.at("id").get<int>();
        entry.identity = item.at("identity").get<int>();
        entry.camera = item.at("camera").get<int>();
        entry.split = split_from_string(item.at("split").get<std::string>());
        entry.frames = item.at("frames").get<std::vector<std::string>>();
        if (item.contains("clean_frames")) {
            for (const auto& [key, value] : item.at("clean_frames").items()) {
                entry.clean_frames[std::stoi(key)] = value.get<std::string>();
            }
        }
        manifest.tracklets.push_back(std::move(entry));
    }
    if (j.contains("occlusions")) {
        manifest.occlusions = occlusions_from_json(j.at("occlusions"));
    }
    if (j.contains("source_checkpoint")) {
        manifest.source_checkpoint = j.at("source_checkpoint").get<std::string>();
    }
    if (j.contains("generator")) {
        manifest.generator = j.at("generator");
    }
    return manifest;
}

void DatasetManifest::save() const {
    std::error_code ec;
    fs::create_directories(root, ec);
    std::ofstream out(root / "manifest.json");
    if (!out) {
        throw Error(ErrorKind::io, "cannot write manifest under " + root.string());
    }
    out << to_json().dump(1) << '\n';
}

DatasetManifest DatasetManifest::load(const fs::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) {
        throw Error(ErrorKind::io, "missing manifest " + (root / "manifest.json").string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::data, "malformed manifest: " + std::string(e.what()));
    }
    return from_json(j, root);
}

void to_json(json& j, const SynthConfig& c) {
    j = {{"identities", c.identities},
         {"tracklets_per_identity", c.tracklets_per_identity},
         {"frames_per_tracklet", c.frames_per_tracklet},
         {"height", c.height},
         {"width", c.width},
         {"cameras", c.cameras},
         {"occlusion_rate", c.occlusion_rate},
         {"train_fraction", c.train_fraction},
         {"noise_sigma", c.noise_sigma},
         {"passer_by_fraction", c.passer_by_fraction},
         {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
    c.identities = j.value("identities", c.identities);
    c.tracklets_per_identity = j.value("tracklets_per_identity", c.tracklets_per_identity);
    c.frames_per_tracklet = j.value("frames_per_tracklet", c.frames_per_tracklet);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.cameras = j.value("cameras", c.cameras);
    c.occlusion_rate = j.value("occlusion_rate", c.occlusion_rate);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.passer_by_fraction = j.value("passer_by_fraction", c.passer_by_fraction);
    c.seed = j.value("seed", c.seed);
}

// ---------------------------------------------------------------------------
// Procedural pedestrians

namespace {

struct Rgb {
    double r = 0, g = 0, b = 0;
};

constexpr std::array<Rgb, 10> kClothing{{{200, 40, 40},
                                         {40, 60, 190},
                                         {40, 150, 60},
                                         {220, 200, 50},
                                         {35, 35, 35},
                                         {225, 225, 225},
                                         {128, 128, 128},
                                         {120, 50, 150},
                                         {230, 120, 30},
                                         {110, 70, 40}}};
constexpr std::array<Rgb, 4> kSkin{{{240, 200, 170}, {210, 160, 120}, {160, 110, 80}, {100, 70, 50}}};
constexpr std::array<Rgb, 4> kHair{{{20, 15, 10}, {90, 60, 30}, {200, 170, 90}, {140, 140, 140}}};

enum class Pattern { solid, horizontal, vertical };

struct Signature {
    Rgb hair, skin, torso, accent, legs;
    Pattern pattern = Pattern::solid;
    double body_width = 0.5;
    int gait_period = 8;
};

struct CameraLook {
    Rgb background;
    Rgb gain;
};

Rgb jitter(Rgb c, double amount, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-amount, amount);
    return {c.r + d(rng), c.g + d(rng), c.b + d(rng)};
}

template <std::size_t N>
Rgb pick(const std::array<Rgb, N>& palette, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, N - 1);
    return palette[d(rng)];
}

Signature draw_signature(std::mt19937_64& rng) {
    Signature s;
    s.hair = jitter(pick(kHair, rng), 10, rng);
    s.skin = jitter(pick(kSkin, rng), 10, rng);
    s.torso = jitter(pick(kClothing, rng), 20, rng);
    s.accent = jitter(pick(kClothing, rng), 20, rng);
    s.legs = jitter(pick(kClothing, rng), 20, rng);
    std::uniform_int_distribution<int> pattern(0, 2);
    s.pattern = static_cast<Pattern>(pattern(rng));
    s.body_width = std::uniform_real_distribution<double>(0.42, 0.58)(rng);
    s.gait_period = std::uniform_int_distribution<int>(6, 10)(rng);
    return s;
}

CameraLook draw_camera(std::mt19937_64& rng) {
    CameraLook look;
    std::uniform_real_distribution<double> bg(70, 170);
    look.background = {bg(rng), bg(rng), bg(rng)};
    std::uniform_real_distribution<double> gain(0.85, 1.1);
    look.gain = {gain(rng), gain(rng), gain(rng)};
    return look;
}

struct TrackletPose {
    double center_offset = 0; // fraction of width
    double phase = 0;
    double brightness = 1.0;
};

// Float canvas in 0..255, (H, W, 3).
struct Canvas {
    int height, width;
    std::vector<double> values;

    Canvas(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    void set(int y, int x, Rgb c) {
        if (y < 0 || y >= height || x < 0 || x >= width) return;
        auto* p = &values[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    void fill_rect(double y0, double y1, double x0, double x1, Rgb c) {
        const int ya = static_cast<int>(std::lround(y0)), yb = static_cast<int>(std::lround(y1));
        const int xa = static_cast<int>(std::lround(x0)), xb = static_cast<int>(std::lround(x1));
        for (int y = ya; y < yb; ++y)
            for (int x = xa; x < xb; ++x) set(y, x, c);
    }
};

void render_person(Canvas& canvas, const Signature& s, const CameraLook& cam, const TrackletPose& pose, int t) {
    const double H = canvas.height, W = canvas.width;
    for (int y = 0; y < canvas.height; ++y) {
        const double shade = 0.85 + 0.3 * y / H;
        for (int x = 0; x < canvas.width; ++x) {
            canvas.set(y, x, {cam.background.r * shade, cam.background.g * shade, cam.background.b * shade});
        }
    }

    const double swing = std::sin(2.0 * std::numbers::pi * (t + pose.phase) / s.gait_period);
    const double cx = W * (0.5 + pose.center_offset) + 0.03 * W * swing;
    const double bob = 0.01 * H * std::abs(swing);

    // legs
    const double leg_w = 0.14 * W;
    const double stride = 0.09 * W * swing;
    const double leg_top = 0.58 * H + bob, leg_bottom = 0.93 * H;
    canvas.fill_rect(leg_top, leg_bottom, cx - 0.03 * W - leg_w - stride, cx - 0.03 * W - stride, s.legs);
    canvas.fill_rect(leg_top, leg_bottom, cx + 0.03 * W + stride, cx + 0.03 * W + leg_w + stride, s.legs);
    const Rgb shoe{30, 25, 20};
    canvas.fill_rect(leg_bottom - 0.03 * H, leg_bottom, cx - 0.03 * W - leg_w - stride - 1, cx - 0.03 * W - stride, shoe);
    canvas.fill_rect(leg_bottom - 0.03 * H, leg_bottom, cx + 0.03 * W + stride, cx + 0.03 * W + leg_w + stride + 1, shoe);

    // torso with pattern
    const double half = 0.5 * s.body_width * W;
    const double torso_top = 0.18 * H + bob, torso_bottom = 0.60 * H + bob;
    for (int y = static_cast<int>(std::lround(torso_top)); y < std::lround(torso_bottom); ++y) {
        for (int x = static_cast<int>(std::lround(cx - half)); x < std::lround(cx + half); ++x) {
            bool accent = false;
            if (s.pattern == Pattern::horizontal) accent = ((y - static_cast<int>(torso_top)) / 3) % 2 == 1;
            if (s.pattern == Pattern::vertical) accent = ((x - static_cast<int>(cx - half)) / 3) % 2 == 1;
            canvas.set(y, x, accent ? s.accent : s.torso);
        }
    }
    // arms swing opposite to legs
    const double arm_w = 0.08 * W;
    canvas.fill_rect(torso_top + 0.02 * H, 0.50 * H + bob, cx - half - arm_w, cx - half, s.skin);
    canvas.fill_rect(torso_top + 0.02 * H, 0.50 * H + bob - 0.02 * H * swing, cx + half, cx + half + arm_w, s.skin);

    // head
    const double head_half = 0.13 * W;
    canvas.fill_rect(0.05 * H + bob, 0.18 * H + bob, cx - head_half, cx + head_half, s.skin);
    canvas.fill_rect(0.03 * H + bob, 0.08 * H + bob, cx - head_half - 1, cx + head_half + 1, s.hair);

    // camera response and tracklet brightness
    for (std::size_t i = 0; i < canvas.values.size(); i += 3) {
        canvas.values[i] *= cam.gain.r * pose.brightness;
        canvas.values[i + 1] *= cam.gain.g * pose.brightness;
        canvas.values[i + 2] *= cam.gain.b * pose.brightness;
    }
}

// Another pedestrian passing in front: copies the band from a rendering of
// `other`.
void paint_passer_by(Canvas& canvas, RowBand band, const Signature& other, const CameraLook& cam,
                     std::mt19937_64& rng) {
    Canvas passer(canvas.height, canvas.width);
    TrackletPose pose;
    pose.center_offset = std::uniform_real_distribution<double>(-0.06, 0.06)(rng);
    pose.phase = std::uniform_real_distribution<double>(0, other.gait_period)(rng);
    render_person(passer, other, cam, pose, 0);
    for (int y = static_cast<int>(band.begin); y < band.end; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            const auto* p = &passer.values[(static_cast<std::size_t>(y) * canvas.width + x) * 3];
            canvas.set(y, x, {p[0], p[1], p[2]});
        }
}

void paint_occluder(Canvas& canvas, RowBand band, std::mt19937_64& rng) {
    const Rgb a = jitter(pick(kClothing, rng), 25, rng);
    const Rgb b = jitter(pick(kClothing, rng), 25, rng);
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    const int period = std::uniform_int_distribution<int>(2, 5)(rng);
    for (int y = static_cast<int>(band.begin); y < band.end; ++y) {
        for (int x = 0; x < canvas.width; ++x) {
            bool second = false;
            if (kind == 0) second = (y / period) % 2 == 1;
            if (kind == 1) second = (x / period) % 2 == 1;
            if (kind == 2) second = ((x / period) + (y / period)) % 2 == 1;
            canvas.set(y, x, second ? b : a);
        }
    }
}

Image8 quantize(const Canvas& canvas, double sigma, std::mt19937_64& noise_rng) {
    std::normal_distribution<double> noise(0.0, sigma);
    Image8 image = make_image(canvas.height, canvas.width);
    for (std::size_t i = 0; i < canvas.values.size(); ++i) {
        const double v = canvas.values[i] + (sigma > 0 ? noise(noise_rng) : 0.0);
        image.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return image;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
    return std::mt19937_64(seq);
}

// Occluded frame -> region, contiguous runs of 2..5 frames.
std::map<int, Region> draw_occlusion_runs(int frames, double rate, std::mt19937_64& rng) {
    std::map<int, Region> occluded;
    int remaining = static_cast<int>(std::lround(rate * frames));
    if (frames < 2) return occluded;
    if (remaining == 1) remaining = 2;
    remaining = std::min(remaining, frames);
    std::uniform_int_distribution<int> region_draw(0, 2);
    for (int attempt = 0; remaining >= 2 && attempt < 200; ++attempt) {
        const int longest = std::min(5, remaining);
        int len = std::uniform_int_distribution<int>(2, longest)(rng);
        if (remaining - len == 1) len = (len + 1 <= longest) ? len + 1 : len - 1;
        const int start = std::uniform_int_distribution<int>(0, frames - len)(rng);
        bool free = true;
        for (int i = start; i < start + len; ++i) free = free && !occluded.contains(i);
        if (!free) continue;
        const auto region = static_cast<Region>(region_draw(rng));
        for (int i = start; i < start + len; ++i) occluded[i] = region;
        remaining -= len;
    }
    return occluded;
}

std::string frame_name(int index) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "frame_%04d.png", index);
    return buffer;
}

} // namespace

DatasetManifest generate_synthetic_dataset(const SynthConfig& config, const fs::path& root) {
    if (config.height % 4 != 0 || config.width % 4 != 0 || config.height <= 0 || config.width <= 0) {
        throw Error(ErrorKind::config, "frame size must be a positive multiple of 4");
    }
    if (config.identities < 0 || config.tracklets_per_identity < 1 || config.frames_per_tracklet < 1 ||
        config.cameras < 1 || config.occlusion_rate < 0 || config.occlusion_rate > 1 ||
        config.passer_by_fraction < 0 || config.passer_by_fraction > 1) {
        throw Error(ErrorKind::config, "invalid synthetic dataset configuration");
    }
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) {
        throw Error(ErrorKind::io, "cannot create dataset root " + root.string());
    }
    {
        const auto probe = root / ".write_probe";
        std::ofstream out(probe);
        if (!out) throw Error(ErrorKind::io, "dataset root is not writable: " + root.string());
        out.close();
        fs::remove(probe, ec);
    }

    DatasetManifest manifest;
    manifest.root = root;
    manifest.height = config.height;
    manifest.width = config.width;
    manifest.generator = {{"kind", "synthetic"}, {"config", config}};

    std::mt19937_64 world = substream(config.seed, 0xC0FFEE, 0, 0);
    std::vector<CameraLook> cameras;
    for (int c = 0; c < config.cameras; ++c) cameras.push_back(draw_camera(world));

    const int train_ids = static_cast<int>(std::ceil(config.identities * config.train_fraction));
    int tracklet_id = 0;
    for (int identity = 0; identity < config.identities; ++identity) {
        auto id_rng = substream(config.seed, 1, static_cast<std::uint64_t>(identity), 0);
        const Signature signature = draw_signature(id_rng);
        for (int k = 0; k < config.tracklets_per_identity; ++k, ++tracklet_id) {
            auto rng = substream(config.seed, 2, static_cast<std::uint64_t>(tracklet_id), 0);
            TrackletEntry entry;
            entry.id = tracklet_id;
            entry.identity = identity;
            entry.camera = k % config.cameras;
            entry.split = identity < train_ids ? Split::train : (entry.camera == 0 ? Split::query : Split::gallery);

            TrackletPose pose;
            pose.center_offset = std::uniform_real_distribution<double>(-0.06, 0.06)(rng);
            pose.phase = std::uniform_real_distribution<double>(0, signature.gait_period)(rng);
            pose.brightness = std::uniform_real_distribution<double>(0.9, 1.1)(rng);
            const auto occluded = draw_occlusion_runs(config.frames_per_tracklet, config.occlusion_rate, rng);

            const fs::path dir = fs::path(std::to_string(identity)) /
                                 (std::to_string(entry.camera) + "_" + std::to_string(tracklet_id));
            const fs::path clean_dir = fs::path("_clean") / dir;
            fs::create_directories(root / dir, ec);
            if (ec) throw Error(ErrorKind::io, "cannot create " + (root / dir).string());

            for (int t = 0; t < config.frames_per_tracklet; ++t) {
                Canvas canvas(config.height, config.width);
                render_person(canvas, signature, cameras[static_cast<std::size_t>(entry.camera)], pose, t);
                auto noise_seed = substream(config.seed, 3, static_cast<std::uint64_t>(tracklet_id),
                                            static_cast<std::uint64_t>(t));
                const auto name = (dir / frame_name(t)).string();
                entry.frames.push_back(name);
                auto found = occluded.find(t);
                if (found == occluded.end()) {
                    write_png(root / name, quantize(canvas, config.noise_sigma, noise_seed));
                    continue;
                }
                auto clean_noise = noise_seed;
                fs::create_directories(root / clean_dir, ec);
                const auto clean_name = (clean_dir / frame_name(t)).string();
                write_png(root / clean_name, quantize(canvas, config.noise_sigma, clean_noise));
                entry.clean_frames[t] = clean_name;

                auto occluder_rng = substream(config.seed, 4, static_cast<std::uint64_t>(tracklet_id),
                                              static_cast<std::uint64_t>(t));
                const auto rows = region_rows(found->second, config.height);
                if (config.identities > 1 && std::bernoulli_distribution(config.passer_by_fraction)(occluder_rng)) {
                    int other = std::uniform_int_distribution<int>(0, config.identities - 2)(occluder_rng);
                    if (other >= identity) ++other;
                    auto other_rng = substream(config.seed, 1, static_cast<std::uint64_t>(other), 0);
                    paint_passer_by(canvas, rows, draw_signature(other_rng),
                                    cameras[static_cast<std::size_t>(entry.camera)], occluder_rng);
                } else {
                    paint_occluder(canvas, rows, occluder_rng);
                }
                write_png(root / name, quantize(canvas, config.noise_sigma, noise_seed));
                manifest.occlusions.push_back({tracklet_id, t, found->second});
            }
            manifest.tracklets.push_back(std::move(entry));
        }
    }
    manifest.save();
    return manifest;
}

// ---------------------------------------------------------------------------

VideoDataset::VideoDataset(DatasetManifest manifest, std::vector<Tracklet> tracklets)
    : manifest_(std::move(manifest)), tracklets_(std::move(tracklets)) {
    std::set<int> identities, cameras, train_ids;
    for (std::size_t i = 0; i < tracklets_.size(); ++i) {
        by_id_[tracklets_[i].id] = i;
        identities.insert(tracklets_[i].identity);
        cameras.insert(tracklets_[i].camera);
        if (tracklets_[i].split == Split::train) train_ids.insert(tracklets_[i].identity);
    }
    num_identities_ = static_cast<int>(identities.size());
    num_cameras_ = static_cast<int>(cameras.size());
    int label = 0;
    for (int identity : train_ids) train_labels_[identity] = label++;
}

const Tracklet& VideoDataset::tracklet(int id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        throw Error(ErrorKind::data, "unknown tracklet " + std::to_string(id));
    }
    return tracklets_[it->second];
}

std::vector<std::size_t> VideoDataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tracklets_.size(); ++i) {
        if (tracklets_[i].split == split) out.push_back(i);
    }
    return out;
}

int VideoDataset::train_label(int identity) const {
    auto it = train_labels_.find(identity);
    if (it == train_labels_.end()) {
        throw Error(ErrorKind::data, "identity " + std::to_string(identity) + " is not a training identity");
    }
    return it->second;
}

VideoDataset load_dataset(const fs::path& root) {
    DatasetManifest manifest = DatasetManifest::load(root);

    std::map<int, int> remap;
    for (const auto& entry : manifest.tracklets) remap[entry.identity] = 0;
    int next = 0;
    for (auto& [identity, label] : remap) label = next++;

    std::vector<Tracklet> tracklets;
    tracklets.reserve(manifest.tracklets.size());
    for (const auto& entry : manifest.tracklets) {
        Tracklet tracklet;
        tracklet.id = entry.id;
        tracklet.identity = remap.at(entry.identity);
        tracklet.camera = entry.camera;
        tracklet.split = entry.split;
        for (std::size_t t = 0; t < entry.frames.size(); ++t) {
            const auto path = root / entry.frames[t];
            if (!fs::exists(path)) {
                throw Error(ErrorKind::io, "missing frame file " + path.string());
            }
            const Image8 image = read_png(path);
            if (image.height != manifest.height || image.width != manifest.width) {
                throw Error(ErrorKind::shape, "inconsistent frame size in " + path.string());
            }
            Frame frame;
            frame.pixels = image_to_tensor(image);
            frame.identity = tracklet.identity;
            frame.camera = tracklet.camera;
            frame.index = static_cast<int>(t);
            tracklet.track.frames.push_back(std::move(frame));
        }
        tracklets.push_back(std::move(tracklet));
    }
    return VideoDataset(std::move(manifest), std::move(tracklets));
}

Track sample_track(const Track& tracklet, int length, std::mt19937_64& rng) {
    if (tracklet.empty()) {
        throw Error(ErrorKind::data, "cannot sample from an empty tracklet");
    }
    if (length < 1) {
        throw Error(ErrorKind::config, "track length must be positive");
    }
    const auto n = tracklet.length();
    Track out;
    if (n < length) {
        for (int i = 0; i < length; ++i) out.frames.push_back(tracklet.frames[static_cast<std::size_t>(i % n)]);
        return out;
    }
    const auto offset = std::uniform_int_distribution<std::int64_t>(0, n - length)(rng);
    for (int i = 0; i < length; ++i) out.frames.push_back(tracklet.frames[static_cast<std::size_t>(offset + i)]);
    return out;
}

} // namespace vrstc
