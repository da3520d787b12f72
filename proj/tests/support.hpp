#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include <torch/torch.h>

#include "vrstc/data.hpp"

namespace vrstc::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("vrstc_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Hand-rolled generators: every random case derives from one 64-bit seed.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }

    torch::Tensor normal(std::vector<std::int64_t> shape, torch::ScalarType dtype = torch::kFloat64) {
        auto t = torch::empty(shape, torch::kFloat64);
        auto flat = t.view({-1});
        auto acc = flat.accessor<double, 1>();
        std::normal_distribution<double> d(0.0, 1.0);
        for (std::int64_t i = 0; i < flat.size(0); ++i) acc[i] = d(rng_);
        return t.to(dtype);
    }

    torch::Tensor uniform(std::vector<std::int64_t> shape, double lo, double hi,
                          torch::ScalarType dtype = torch::kFloat64) {
        auto t = torch::empty(shape, torch::kFloat64);
        auto flat = t.view({-1});
        auto acc = flat.accessor<double, 1>();
        for (std::int64_t i = 0; i < flat.size(0); ++i) acc[i] = real(lo, hi);
        return t.to(dtype);
    }

    Region region() { return static_cast<Region>(integer(0, 2)); }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline SynthConfig small_synth(int identities = 6, int tracklets = 2, int frames = 8, std::uint64_t seed = 0) {
    SynthConfig c;
    c.identities = identities;
    c.tracklets_per_identity = tracklets;
    c.frames_per_tracklet = frames;
    c.seed = seed;
    return c;
}

} // namespace vrstc::test
