#include "vrstc/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "vrstc/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vrstc {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_update(std::uint64_t& hash, const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= kFnvPrime;
    }
}

void hash_tensor(std::uint64_t& hash, const torch::Tensor& t) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    fnv_update(hash, c.data_ptr(), static_cast<std::size_t>(c.numel()) * c.element_size());
}

torch::serialize::OutputArchive module_archive(torch::nn::Module& module) {
    torch::serialize::OutputArchive archive;
    module.save(archive);
    return archive;
}

void write_header(torch::serialize::OutputArchive& archive, const std::string& kind, json body) {
    body["format"] = "vrstc-checkpoint";
    body["version"] = kCheckpointVersion;
    body["kind"] = kind;
    archive.write("header", c10::IValue(body.dump()));
}

json header_from(torch::serialize::InputArchive& archive, const fs::path& path) {
    c10::IValue value;
    if (!archive.try_read("header", value) || !value.isString()) {
        throw Error(ErrorKind::data, "checkpoint without header: " + path.string());
    }
    auto header = json::parse(value.toStringRef());
    if (header.value("format", "") != "vrstc-checkpoint") {
        throw Error(ErrorKind::data, "not a vrstc checkpoint: " + path.string());
    }
    if (header.value("version", 0) != kCheckpointVersion) {
        throw Error(ErrorKind::data, "unsupported checkpoint version in " + path.string());
    }
    return header;
}

torch::serialize::InputArchive open_archive(const fs::path& path) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::io, "missing checkpoint " + path.string());
    }
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw Error(ErrorKind::data, "unreadable checkpoint " + path.string());
    }
    return archive;
}

void load_module(torch::serialize::InputArchive& archive, const std::string& key, torch::nn::Module& module) {
    torch::serialize::InputArchive sub;
    if (!archive.try_read(key, sub)) {
        throw Error(ErrorKind::data, "checkpoint lacks module '" + key + "'");
    }
    module.load(sub);
}

} // namespace

std::uint64_t parameter_checksum(const torch::nn::Module& module) {
    std::uint64_t hash = kFnvOffset;
    for (const auto& item : module.named_parameters()) {
        fnv_update(hash, item.key().data(), item.key().size());
        hash_tensor(hash, item.value());
    }
    for (const auto& item : module.named_buffers()) {
        fnv_update(hash, item.key().data(), item.key().size());
        hash_tensor(hash, item.value());
    }
    return hash;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot read " + path.string());
    }
    std::uint64_t hash = kFnvOffset;
    char buffer[1 << 15];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        fnv_update(hash, buffer, static_cast<std::size_t>(in.gcount()));
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

json read_checkpoint_header(const fs::path& path) {
    auto archive = open_archive(path);
    return header_from(archive, path);
}

void save_reid_checkpoint(const fs::path& path, const ReidCheckpoint& checkpoint, const json& extra) {
    torch::serialize::OutputArchive archive;
    json labels = json::array();
    for (const auto& [identity, index] : checkpoint.label_map) labels.push_back({identity, index});
    json body = {{"config", checkpoint.model->config()}, {"label_map", labels}, {"extra", extra}};
    write_header(archive, "reid", body);
    auto model = module_archive(const_cast<reid::ReidNetImpl&>(*checkpoint.model));
    archive.write("model", model);
    archive.save_to(path.string());
}

ReidCheckpoint load_reid_checkpoint(const fs::path& path) {
    auto archive = open_archive(path);
    const auto header = header_from(archive, path);
    if (header.value("kind", "") != "reid") {
        throw Error(ErrorKind::data, "expected a re-ID checkpoint: " + path.string());
    }
    ReidCheckpoint checkpoint;
    checkpoint.model = reid::ReidNet(header.at("config").get<reid::ReidNetConfig>());
    load_module(archive, "model", *checkpoint.model);
    for (const auto& pair : header.at("label_map")) {
        checkpoint.label_map.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    }
    checkpoint.model->eval();
    return checkpoint;
}

void save_stcnet_checkpoint(const fs::path& path, stcnet::StcnetBundle& bundle, const json& extra) {
    torch::serialize::OutputArchive archive;
    write_header(archive, "stcnet", {{"config", bundle.config}, {"extra", extra}});
    auto spatial = module_archive(*bundle.spatial);
    auto temporal = module_archive(*bundle.temporal);
    auto local = module_archive(*bundle.local);
    auto global = module_archive(*bundle.global);
    archive.write("spatial", spatial);
    archive.write("temporal", temporal);
    archive.write("local_discriminator", local);
    archive.write("global_discriminator", global);
    archive.save_to(path.string());
}

stcnet::StcnetBundle load_stcnet_checkpoint(const fs::path& path) {
    auto archive = open_archive(path);
    const auto header = header_from(archive, path);
    if (header.value("kind", "") != "stcnet") {
        throw Error(ErrorKind::data, "expected an STCnet checkpoint: " + path.string());
    }
    stcnet::StcnetBundle bundle(header.at("config").get<stcnet::StcnetConfig>());
    load_module(archive, "spatial", *bundle.spatial);
    load_module(archive, "temporal", *bundle.temporal);
    load_module(archive, "local_discriminator", *bundle.local);
    load_module(archive, "global_discriminator", *bundle.global);
    bundle.train(false);
    return bundle;
}

} // namespace vrstc
