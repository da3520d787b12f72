#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "vrstc/data.hpp"
#include "vrstc/occlusion.hpp"
#include "vrstc/training.hpp"

namespace vrstc {

// Everything a full run needs. Layered as defaults < config file < flags.
struct PipelineConfig {
    reid::Profile profile = reid::Profile::tiny;
    std::uint64_t seed = 0;
    SynthConfig synth;
    training::ReidTrainConfig pretrain;
    training::StcnetTrainConfig stcnet;
    training::ReidTrainConfig reid;
    double tau = occlusion::kDefaultTau;
    // Pick tau by F1 against the synthetic ground truth on the training split.
    bool calibrate_tau = true;
    // Start the final re-ID models from the pretrained weights.
    bool finetune = false;

    static PipelineConfig defaults();

    // Propagates the top-level seed and profile into every stage.
    void apply_seed(std::uint64_t s);
    void apply_profile(reid::Profile p);
    void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
// Overlays the keys present in `j` onto `c`.
void from_json(const nlohmann::json& j, PipelineConfig& c);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value, int indent = 2);

} // namespace vrstc
