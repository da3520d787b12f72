#include "vrstc/config.hpp"

#include <fstream>
#include <set>

#include "vrstc/error.hpp"

using nlohmann::json;

namespace vrstc {

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig c;
    c.synth.identities = 120;
    c.synth.train_fraction = 0.33;
    c.pretrain.epochs = 30;
    c.pretrain.decay_every = 20;
    c.pretrain.batch_size = 16;
    c.pretrain.samples_per_tracklet = 2;
    c.reid = c.pretrain;
    c.reid.nonlocal = true;
    c.stcnet.steps = 1000;
    c.apply_seed(c.seed);
    return c;
}

void PipelineConfig::apply_seed(std::uint64_t s) {
    seed = s;
    synth.seed = s;
    pretrain.seed = s + 1;
    stcnet.seed = s + 2;
    reid.seed = s + 3;
}

void PipelineConfig::apply_profile(reid::Profile p) {
    profile = p;
    pretrain.profile = p;
    stcnet.profile = p;
    reid.profile = p;
}

void PipelineConfig::validate() const {
    pretrain.validate();
    stcnet.validate();
    reid.validate();
    if (!(tau >= -1.0 && tau <= 1.0)) {
        throw Error(ErrorKind::config, "tau must lie in [-1, 1]");
    }
    if (synth.height % 4 != 0 || synth.width % 4 != 0) {
        throw Error(ErrorKind::config, "frame size must be divisible by 4");
    }
}

void to_json(json& j, const PipelineConfig& c) {
    j = {{"profile", reid::to_string(c.profile)},
         {"seed", c.seed},
         {"synth", c.synth},
         {"pretrain", c.pretrain},
         {"stcnet", c.stcnet},
         {"reid", c.reid},
         {"tau", c.tau},
         {"calibrate_tau", c.calibrate_tau},
         {"finetune", c.finetune}};
}

void from_json(const json& j, PipelineConfig& c) {
    if (!j.is_object()) {
        throw Error(ErrorKind::config, "configuration must be a JSON object");
    }
    static const std::set<std::string> known{"profile", "seed", "synth", "pretrain", "stcnet",
                                             "reid", "tau", "calibrate_tau", "finetune"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw Error(ErrorKind::config, "unknown configuration key '" + key + "'");
    }
    try {
        if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());
        if (j.contains("profile")) c.apply_profile(reid::profile_from_string(j.at("profile").get<std::string>()));
        if (j.contains("synth")) from_json(j.at("synth"), c.synth);
        if (j.contains("pretrain")) training::from_json(j.at("pretrain"), c.pretrain);
        if (j.contains("stcnet")) training::from_json(j.at("stcnet"), c.stcnet);
        if (j.contains("reid")) training::from_json(j.at("reid"), c.reid);
        c.tau = j.value("tau", c.tau);
        c.calibrate_tau = j.value("calibrate_tau", c.calibrate_tau);
        c.finetune = j.value("finetune", c.finetune);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& value, int indent) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << value.dump(indent) << '\n';
}

} // namespace vrstc
