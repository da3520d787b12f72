#pragma once

#include <filesystem>
#include <vector>

#include "vrstc/data.hpp"
#include "vrstc/occlusion.hpp"
#include "vrstc/png_io.hpp"

namespace vrstc::visualize {

// Score in [floor, 1] to a red (low) .. green (high) colour.
std::array<std::uint8_t, 3> score_colour(double score, double floor = 0.5);

// Frames side by side, each followed by a bar whose three segments show the
// region scores. Frames with a flagged region get a red underline.
Image8 score_strip(const Track& track, const occlusion::RegionScoreTable& table, double tau);

// One row per entry: original | masked | completed.
Image8 completion_grid(const std::vector<std::array<Image8, 3>>& rows);

struct VisualizeSummary {
    int strips = 0;
    int grid_rows = 0;
};

// Writes strips/<tracklet>.png and, when `completed` is given, grid.png with
// up to `max_rows` flagged frames.
VisualizeSummary write_visualizations(const VideoDataset& raw, const occlusion::ScoreTables& tables, double tau,
                                      const VideoDataset* completed, const std::vector<OcclusionRecord>& flagged,
                                      const std::filesystem::path& out, int max_rows = 12);

} // namespace vrstc::visualize
