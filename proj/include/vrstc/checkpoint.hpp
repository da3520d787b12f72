#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "vrstc/reid.hpp"
#include "vrstc/stcnet.hpp"

namespace vrstc {

inline constexpr int kCheckpointVersion = 1;

// FNV-1a over every parameter and buffer, in registration order.
std::uint64_t parameter_checksum(const torch::nn::Module& module);

// FNV-1a of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

// Reads only the JSON header of a checkpoint and checks format and version.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

struct ReidCheckpoint {
    reid::ReidNet model{nullptr};
    // identity (dataset label) -> classifier index
    std::vector<std::pair<int, int>> label_map;
};

void save_reid_checkpoint(const std::filesystem::path& path, const ReidCheckpoint& checkpoint,
                          const nlohmann::json& extra = nlohmann::json::object());
ReidCheckpoint load_reid_checkpoint(const std::filesystem::path& path);

void save_stcnet_checkpoint(const std::filesystem::path& path, stcnet::StcnetBundle& bundle,
                            const nlohmann::json& extra = nlohmann::json::object());
stcnet::StcnetBundle load_stcnet_checkpoint(const std::filesystem::path& path);

} // namespace vrstc
