#pragma once

// Nested-loop reference implementations shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace vrstc::test {

// Patch at (a, b) of a (C, H, W) map, ordered (c, dy, dx), zero padded.
inline std::vector<double> loop_patch(const torch::Tensor& map, int a, int b) {
    auto m = map.to(torch::kFloat64).contiguous();
    auto acc = m.accessor<double, 3>();
    const int C = static_cast<int>(m.size(0)), H = static_cast<int>(m.size(1)), W = static_cast<int>(m.size(2));
    std::vector<double> patch;
    for (int c = 0; c < C; ++c)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int y = a + dy, x = b + dx;
                patch.push_back(y >= 0 && y < H && x >= 0 && x < W ? acc[c][y][x] : 0.0);
            }
    return patch;
}

inline double scalar_cosine(const std::vector<double>& f, const std::vector<double>& r) {
    double dot = 0, nf = 0, nr = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        dot += f[i] * r[i];
        nf += f[i] * f[i];
        nr += r[i] * r[i];
    }
    nf = std::sqrt(nf);
    nr = std::sqrt(nr);
    if (nf < 1e-8 || nr < 1e-8) return 0.0;
    return dot / (nf * nr);
}

inline std::vector<double> scalar_softmax(const std::vector<double>& s) {
    const double m = *std::max_element(s.begin(), s.end());
    std::vector<double> e;
    double z = 0;
    for (double v : s) {
        e.push_back(std::exp(v - m));
        z += e.back();
    }
    for (double& v : e) v /= z;
    return e;
}

// Full nested-loop reference of the layer on one (C, H, W) pair.
inline torch::Tensor loop_layer(const torch::Tensor& F, const torch::Tensor& R) {
    const int C = static_cast<int>(F.size(0)), H = static_cast<int>(F.size(1)), W = static_cast<int>(F.size(2));
    std::vector<std::vector<double>> rp;
    for (int a = 0; a < H; ++a)
        for (int b = 0; b < W; ++b) rp.push_back(loop_patch(R, a, b));
    std::vector<double> sum(static_cast<std::size_t>(C * H * W), 0.0), count(static_cast<std::size_t>(C * H * W), 0.0);
    for (int a = 0; a < H; ++a) {
        for (int b = 0; b < W; ++b) {
            const auto f = loop_patch(F, a, b);
            std::vector<double> s;
            for (const auto& r : rp) s.push_back(scalar_cosine(f, r));
            const auto w = scalar_softmax(s);
            std::vector<double> o(f.size(), 0.0);
            for (std::size_t j = 0; j < rp.size(); ++j)
                for (std::size_t i = 0; i < o.size(); ++i) o[i] += w[j] * rp[j][i];
            std::size_t i = 0;
            for (int c = 0; c < C; ++c)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx, ++i) {
                        const int y = a + dy, x = b + dx;
                        if (y < 0 || y >= H || x < 0 || x >= W) continue;
                        const auto k = static_cast<std::size_t>((c * H + y) * W + x);
                        sum[k] += o[i];
                        count[k] += 1.0;
                    }
        }
    }
    auto out = torch::empty({C, H, W}, torch::kFloat64);
    auto acc = out.accessor<double, 3>();
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const auto k = static_cast<std::size_t>((c * H + y) * W + x);
                acc[c][y][x] = sum[k] / count[k];
            }
    return out;
}

struct Oracle {
    std::vector<double> cmc;
    double map = 0;
    int evaluated = 0;
};

// Independent brute force: direct distances, explicit sort, textbook AP.
inline Oracle brute_force(const torch::Tensor& q, const torch::Tensor& g, const std::vector<int>& ql,
                   const std::vector<int>& gl, const std::vector<int>& qc, const std::vector<int>& gc) {
    const auto nq = q.size(0), ng = g.size(0);
    Oracle o;
    o.cmc.assign(static_cast<std::size_t>(ng), 0.0);
    double ap_total = 0;
    for (std::int64_t i = 0; i < nq; ++i) {
        std::vector<std::pair<double, int>> order;
        for (std::int64_t j = 0; j < ng; ++j) {
            double d = 0;
            for (std::int64_t k = 0; k < q.size(1); ++k) {
                const double diff = q[i][k].item<double>() - g[j][k].item<double>();
                d += diff * diff;
            }
            order.emplace_back(std::sqrt(d), static_cast<int>(j));
        }
        std::sort(order.begin(), order.end());
        std::vector<bool> relevant;
        for (const auto& [d, j] : order) {
            const bool same = gl[static_cast<std::size_t>(j)] == ql[static_cast<std::size_t>(i)];
            if (same && gc[static_cast<std::size_t>(j)] == qc[static_cast<std::size_t>(i)]) continue;
            relevant.push_back(same);
        }
        const auto total = std::count(relevant.begin(), relevant.end(), true);
        if (total == 0) continue;
        ++o.evaluated;
        double ap = 0;
        for (std::size_t k = 0; k < relevant.size(); ++k) {
            if (!relevant[k]) continue;
            const auto hits_so_far = std::count(relevant.begin(), relevant.begin() + static_cast<long>(k) + 1, true);
            ap += static_cast<double>(hits_so_far) / static_cast<double>(k + 1);
        }
        ap_total += ap / static_cast<double>(total);
        for (std::size_t r = 0; r < o.cmc.size(); ++r) {
            const auto upto = std::min(relevant.size(), r + 1);
            if (std::find(relevant.begin(), relevant.begin() + static_cast<long>(upto), true) !=
                relevant.begin() + static_cast<long>(upto))
                o.cmc[r] += 1;
        }
    }
    if (o.evaluated > 0) {
        for (auto& v : o.cmc) v /= o.evaluated;
        o.map = ap_total / o.evaluated;
    }
    return o;
}

} // namespace vrstc::test
