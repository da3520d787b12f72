#include "vrstc/visualize.hpp"

#include <algorithm>
#include <map>

#include "vrstc/error.hpp"

namespace fs = std::filesystem;

namespace vrstc::visualize {

namespace {

constexpr int kBarWidth = 6;
constexpr int kGap = 2;
constexpr int kUnderline = 3;

void blit(Image8& canvas, const Image8& image, int top, int left) {
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) canvas.at(top + y, left + x, c) = image.at(y, x, c);
}

void fill(Image8& canvas, int top, int left, int height, int width, std::array<std::uint8_t, 3> colour) {
    for (int y = top; y < top + height; ++y)
        for (int x = left; x < left + width; ++x)
            for (int c = 0; c < 3; ++c) canvas.at(y, x, c) = colour[static_cast<std::size_t>(c)];
}

} // namespace

std::array<std::uint8_t, 3> score_colour(double score, double floor) {
    const double t = std::clamp((score - floor) / (1.0 - floor), 0.0, 1.0);
    return {static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t))), static_cast<std::uint8_t>(std::lround(255.0 * t)),
            0};
}

Image8 score_strip(const Track& track, const occlusion::RegionScoreTable& table, double tau) {
    if (track.empty()) {
        throw Error(ErrorKind::data, "cannot draw an empty track");
    }
    if (table.scores.size(0) != track.length()) {
        throw Error(ErrorKind::shape, "score table does not match the track length");
    }
    const int h = static_cast<int>(track.frames[0].pixels.size(1));
    const int w = static_cast<int>(track.frames[0].pixels.size(2));
    const int cell = w + kBarWidth + kGap;
    Image8 canvas = make_image(h + kUnderline, cell * static_cast<int>(track.length()));
    std::fill(canvas.data.begin(), canvas.data.end(), std::uint8_t{255});
    for (int t = 0; t < static_cast<int>(track.length()); ++t) {
        const int left = t * cell;
        blit(canvas, tensor_to_image(track.frames[static_cast<std::size_t>(t)].pixels), 0, left);
        bool flagged = false;
        for (auto region : kRegions) {
            const double score = table.at(t, region);
            flagged = flagged || score < tau;
            const auto rows = region_rows(region, h);
            fill(canvas, static_cast<int>(rows.begin), left + w, static_cast<int>(rows.rows()), kBarWidth,
                 score_colour(score));
        }
        if (flagged) fill(canvas, h, left, kUnderline, w + kBarWidth, {255, 0, 0});
    }
    return canvas;
}

Image8 completion_grid(const std::vector<std::array<Image8, 3>>& rows) {
    if (rows.empty()) {
        throw Error(ErrorKind::data, "no rows to draw");
    }
    const int h = rows[0][0].height, w = rows[0][0].width;
    Image8 canvas = make_image(static_cast<int>(rows.size()) * (h + kGap), 3 * (w + kGap));
    std::fill(canvas.data.begin(), canvas.data.end(), std::uint8_t{255});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int k = 0; k < 3; ++k) {
            const auto& image = rows[r][static_cast<std::size_t>(k)];
            if (image.height != h || image.width != w) {
                throw Error(ErrorKind::shape, "grid images differ in size");
            }
            blit(canvas, image, static_cast<int>(r) * (h + kGap), k * (w + kGap));
        }
    }
    return canvas;
}

VisualizeSummary write_visualizations(const VideoDataset& raw, const occlusion::ScoreTables& tables, double tau,
                                      const VideoDataset* completed, const std::vector<OcclusionRecord>& flagged,
                                      const fs::path& out, int max_rows) {
    VisualizeSummary summary;
    fs::create_directories(out / "strips");
    for (const auto& tracklet : raw.tracklets()) {
        const auto found = tables.find(tracklet.id);
        if (found == tables.end()) continue;
        write_png(out / "strips" / (std::to_string(tracklet.id) + ".png"),
                  score_strip(tracklet.track, found->second, tau));
        ++summary.strips;
    }
    if (!completed || flagged.empty()) return summary;

    std::map<std::pair<int, int>, std::vector<Region>> by_frame;
    for (const auto& r : flagged) by_frame[{r.tracklet, r.frame_index}].push_back(r.region);
    std::vector<std::array<Image8, 3>> rows;
    for (const auto& [key, regions] : by_frame) {
        if (static_cast<int>(rows.size()) >= max_rows) break;
        const auto& original = raw.tracklet(key.first).track.frames.at(static_cast<std::size_t>(key.second));
        const auto& filled = completed->tracklet(key.first).track.frames.at(static_cast<std::size_t>(key.second));
        const auto mask = union_mask(regions, raw.height(), raw.width());
        auto masked = original.pixels * (1 - mask).unsqueeze(0);
        rows.push_back({tensor_to_image(original.pixels), tensor_to_image(masked), tensor_to_image(filled.pixels)});
    }
    write_png(out / "grid.png", completion_grid(rows));
    summary.grid_rows = static_cast<int>(rows.size());
    return summary;
}

} // namespace vrstc::visualize
