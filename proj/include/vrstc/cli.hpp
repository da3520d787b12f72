#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vrstc/config.hpp"

namespace vrstc::cli {

// Written as run_manifest.json into every stage output directory.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::map<std::string, std::string> checkpoints; // file name -> digest
    std::string timestamp;

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& dir) const;
};

// Stage entry points. Each writes its artifacts and a run manifest into `out`.
DatasetManifest run_synth(const PipelineConfig& config, const std::filesystem::path& out);

void run_pretrain(const PipelineConfig& config, const std::filesystem::path& data, const std::filesystem::path& out);

struct ScoreOutcome {
    double tau = 0;
    std::optional<double> auc;
    nlohmann::json report;
};
// Scores every region, optionally calibrates tau on the training split, and
// writes scores.json, occlusions.json and score_report.json.
ScoreOutcome run_score(const PipelineConfig& config, const std::filesystem::path& data,
                       const std::filesystem::path& checkpoint, const std::filesystem::path& out);

nlohmann::json run_train_stcnet(const PipelineConfig& config, const std::filesystem::path& data,
                                const std::filesystem::path& guider, const std::filesystem::path& occlusions,
                                const std::filesystem::path& out);

void run_complete(const PipelineConfig& config, const std::filesystem::path& data,
                  const std::filesystem::path& stcnet, const std::filesystem::path& occlusions,
                  const std::filesystem::path& out);

void run_train_reid(const PipelineConfig& config, const std::filesystem::path& data,
                    const std::filesystem::path& out, const std::optional<std::filesystem::path>& init);

// Writes report.json and report.txt; returns the report.
nlohmann::json run_evaluate(const std::filesystem::path& data, const std::filesystem::path& checkpoint,
                            const std::filesystem::path& out);
nlohmann::json run_evaluate_embeddings(const std::filesystem::path& embeddings, const std::filesystem::path& out);

// All stages in order; writes report.json (metrics only) and timing.json.
nlohmann::json run_pipeline(const PipelineConfig& config, const std::filesystem::path& out);

// Plain-text rendering of an evaluation report.
std::string format_report(const nlohmann::json& report);

// Parses argv, runs one command and maps failures to
// "vrstc-error: <class>: <message>" on stderr with a nonzero exit.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);

} // namespace vrstc::cli
