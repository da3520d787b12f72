#include "vrstc/occlusion.hpp"

#include <algorithm>
#include <set>

#include "vrstc/error.hpp"
#include "vrstc/log.hpp"

using nlohmann::json;

namespace vrstc::occlusion {

namespace {

constexpr double kZeroNorm = 1e-12;

} // namespace

FeatureExtractor backbone_extractor(reid::ReidNet model) {
    return [model](const torch::Tensor& frames) mutable {
        torch::NoGradGuard no_grad;
        model->eval();
        // Frames go through as independent length-1 sequences.
        auto batch = to_reid_range(frames).unsqueeze(1);
        auto maps = model->feature_maps(batch);
        return maps.squeeze(1);
    };
}

torch::Tensor band_pool(const torch::Tensor& maps) {
    if (maps.dim() != 4) {
        throw Error(ErrorKind::shape, "band pooling expects (T, C, h, w)");
    }
    const auto height = maps.size(2);
    if (height < 3) {
        throw Error(ErrorKind::shape, "feature map height must be at least 3 to split into regions");
    }
    std::vector<torch::Tensor> bands;
    for (auto region : kRegions) {
        const auto rows = region_rows(region, height);
        bands.push_back(maps.slice(2, rows.begin, rows.end).mean({2, 3}));
    }
    return torch::stack(bands, 1);
}

std::vector<RegionFeature> region_features(const Track& track, const FeatureExtractor& extractor) {
    auto pooled = band_pool(extractor(track.stacked())).to(torch::kFloat64);
    std::vector<RegionFeature> features;
    for (std::int64_t t = 0; t < pooled.size(0); ++t) {
        for (auto region : kRegions) {
            features.push_back({pooled[t][static_cast<int>(region)].clone(), static_cast<int>(t), region});
        }
    }
    return features;
}

torch::Tensor video_region_prototype(const std::vector<RegionFeature>& features, Region region) {
    torch::Tensor sum;
    int count = 0;
    for (const auto& f : features) {
        if (f.region != region) continue;
        sum = sum.defined() ? sum + f.vector : f.vector.to(torch::kFloat64).clone();
        ++count;
    }
    if (count == 0) {
        throw Error(ErrorKind::data, "no features for region " + std::string(to_string(region)));
    }
    return sum / count;
}

double RegionScoreTable::at(std::int64_t frame, Region region) const {
    return scores[frame][static_cast<int>(region)].item<double>();
}

RegionScoreTable region_scores(const std::vector<RegionFeature>& features,
                               const std::array<torch::Tensor, 3>& prototypes) {
    int frames = 0;
    for (const auto& f : features) frames = std::max(frames, f.frame + 1);
    RegionScoreTable table;
    table.scores = torch::zeros({frames, 3}, torch::kFloat64);
    auto acc = table.scores.accessor<double, 2>();
    for (const auto& f : features) {
        const auto& prototype = prototypes[static_cast<std::size_t>(f.region)];
        const auto v = f.vector.to(torch::kFloat64);
        const auto p = prototype.to(torch::kFloat64);
        const double nv = v.norm().item<double>();
        const double np = p.norm().item<double>();
        if (nv < kZeroNorm || np < kZeroNorm) {
            log_warning("zero-norm region feature at frame " + std::to_string(f.frame) + "; score set to 0");
            acc[f.frame][static_cast<int>(f.region)] = 0.0;
            continue;
        }
        const double cosine = v.dot(p).item<double>() / (nv * np);
        acc[f.frame][static_cast<int>(f.region)] = std::clamp(cosine, -1.0, 1.0);
    }
    return table;
}

RegionScoreTable score_track(const Track& track, const FeatureExtractor& extractor) {
    const auto features = region_features(track, extractor);
    std::array<torch::Tensor, 3> prototypes;
    for (auto region : kRegions) {
        prototypes[static_cast<std::size_t>(region)] = video_region_prototype(features, region);
    }
    return region_scores(features, prototypes);
}

std::vector<FlaggedRegion> locate_occlusions(const RegionScoreTable& table, double tau) {
    if (!(tau >= -1.0 && tau <= 1.0)) {
        throw Error(ErrorKind::config, "tau must lie in [-1, 1]");
    }
    std::vector<FlaggedRegion> flagged;
    auto acc = table.scores.accessor<double, 2>();
    for (std::int64_t t = 0; t < table.scores.size(0); ++t) {
        for (auto region : kRegions) {
            if (acc[t][static_cast<int>(region)] < tau) flagged.push_back({static_cast<int>(t), region});
        }
    }
    return flagged;
}

ScoreTables score_dataset(const VideoDataset& dataset, const FeatureExtractor& extractor) {
    ScoreTables tables;
    for (const auto& tracklet : dataset.tracklets()) {
        tables[tracklet.id] = score_track(tracklet.track, extractor);
    }
    return tables;
}

std::vector<OcclusionRecord> flag_dataset(const ScoreTables& tables, double tau) {
    std::vector<OcclusionRecord> records;
    for (const auto& [id, table] : tables) {
        for (const auto& f : locate_occlusions(table, tau)) records.push_back({id, f.frame, f.region});
    }
    return records;
}

json scores_to_json(const ScoreTables& tables) {
    json out = json::array();
    for (const auto& [id, table] : tables) {
        json rows = json::array();
        auto acc = table.scores.accessor<double, 2>();
        for (std::int64_t t = 0; t < table.scores.size(0); ++t) {
            rows.push_back({acc[t][0], acc[t][1], acc[t][2]});
        }
        out.push_back({{"tracklet", id}, {"scores", rows}});
    }
    return out;
}

ScoreTables scores_from_json(const json& j) {
    ScoreTables tables;
    for (const auto& item : j) {
        const auto rows = item.at("scores").get<std::vector<std::array<double, 3>>>();
        RegionScoreTable table;
        table.scores = torch::zeros({static_cast<std::int64_t>(rows.size()), 3}, torch::kFloat64);
        auto acc = table.scores.accessor<double, 2>();
        for (std::size_t t = 0; t < rows.size(); ++t)
            for (int k = 0; k < 3; ++k) acc[static_cast<std::int64_t>(t)][k] = rows[t][static_cast<std::size_t>(k)];
        tables[item.at("tracklet").get<int>()] = std::move(table);
    }
    return tables;
}

namespace {

struct Entry {
    double score;
    bool occluded;
};

std::vector<Entry> labelled_entries(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth) {
    std::set<OcclusionRecord> positive(truth.begin(), truth.end());
    std::vector<Entry> entries;
    for (const auto& [id, table] : tables) {
        auto acc = table.scores.accessor<double, 2>();
        for (std::int64_t t = 0; t < table.scores.size(0); ++t) {
            for (auto region : kRegions) {
                const bool occluded = positive.contains({id, static_cast<int>(t), region});
                entries.push_back({acc[t][static_cast<int>(region)], occluded});
            }
        }
    }
    return entries;
}

} // namespace

double detection_auc(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth) {
    auto entries = labelled_entries(tables, truth);
    // Mann-Whitney: rank by ascending detector output, i.e. descending score.
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });
    double positive_rank_sum = 0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < entries.size();) {
        std::size_t j = i;
        while (j < entries.size() && entries[j].score == entries[i].score) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (entries[k].occluded) {
                positive_rank_sum += mid_rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = entries.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw Error(ErrorKind::data, "AUC needs both occluded and clean entries");
    }
    const double p = static_cast<double>(positives), n = static_cast<double>(negatives);
    return (positive_rank_sum - p * (p + 1) / 2) / (p * n);
}

DetectionQuality detection_quality(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth,
                                   double tau) {
    const auto entries = labelled_entries(tables, truth);
    double tp = 0, fp = 0, fn = 0;
    for (const auto& e : entries) {
        const bool flagged = e.score < tau;
        if (flagged && e.occluded) ++tp;
        if (flagged && !e.occluded) ++fp;
        if (!flagged && e.occluded) ++fn;
    }
    DetectionQuality q;
    q.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    q.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    q.f1 = q.precision + q.recall > 0 ? 2 * q.precision * q.recall / (q.precision + q.recall) : 0.0;
    return q;
}

TauCalibration calibrate_tau(const ScoreTables& tables, const std::vector<OcclusionRecord>& truth,
                             const std::vector<double>& candidates) {
    if (candidates.empty()) {
        throw Error(ErrorKind::config, "empty tau sweep");
    }
    TauCalibration best;
    best.quality.f1 = -1;
    for (double tau : candidates) {
        const auto q = detection_quality(tables, truth, tau);
        best.sweep.emplace_back(tau, q);
        if (q.f1 > best.quality.f1) {
            best.tau = tau;
            best.quality = q;
        }
    }
    return best;
}

std::vector<double> default_tau_grid() {
    std::vector<double> grid;
    for (int i = 50; i <= 995; i += 5) grid.push_back(i / 1000.0);
    return grid;
}

} // namespace vrstc::occlusion
