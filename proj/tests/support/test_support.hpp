// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmaudit/tensor_io.hpp"

namespace lmaudit::testing {

inline std::filesystem::path data_dir() {
    return LMAUDIT_TEST_DATA_DIR;
}

inline std::filesystem::path data(const std::string& name) {
    return data_dir() / name;
}

/// Portable generator: mt19937_64 is fully specified, and the normal draw is
/// done by hand (Box-Muller) so fixtures do not depend on the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[index(i)]);
        return p;
    }

private:
    std::mt19937_64 engine_;
};

inline WeightMatrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    std::vector<float> data(rows * cols);
    for (auto& x : data) x = static_cast<float>(rng.normal());
    return make_weight_matrix(rows, cols, std::move(data), "gaussian");
}

/// 90 unit rows around three cluster directions plus 10 orphan rows of norm 1e-6,
/// orphans at the returned (ascending) ids.
inline std::pair<WeightMatrix, std::vector<std::uint32_t>> planted_orphans(Rng& rng, std::size_t d = 8) {
    std::vector<std::vector<double>> centers(3, std::vector<double>(d));
    for (std::size_t c = 0; c < 3; ++c) centers[c][c] = 1.0;
    const auto perm = rng.permutation(100);
    std::vector<float> data(100 * d);
    std::vector<std::uint32_t> orphans;
    for (std::size_t slot = 0; slot < 100; ++slot) {
        const std::size_t row = perm[slot];
        std::vector<double> r(d);
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            r[c] = slot < 90 ? centers[slot / 30][c] + 0.3 * rng.normal() : rng.normal();
            norm += r[c] * r[c];
        }
        const double scale = (slot < 90 ? 1.0 : 1e-6) / std::sqrt(norm);
        for (std::size_t c = 0; c < d; ++c) data[row * d + c] = static_cast<float>(r[c] * scale);
        if (slot >= 90) orphans.push_back(static_cast<std::uint32_t>(row));
    }
    std::sort(orphans.begin(), orphans.end());
    return {make_weight_matrix(100, d, std::move(data), "planted"), orphans};
}

/// Minimal container writer for round-trip tests; values are written as F32.
inline void write_container(const std::filesystem::path& path, const std::string& name, const WeightMatrix& w) {
    nlohmann::json header;
    header[name] = {{"dtype", "F32"},
                    {"shape", {w.rows, w.cols}},
                    {"data_offsets", {0, w.data.size() * 4}}};
    const auto text = header.dump();
    std::ofstream out(path, std::ios::binary);
    const std::uint64_t n = text.size();
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((n >> (8 * i)) & 0xFF));
    out << text;
    for (float x : w.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &x, 4);
        for (int i = 0; i < 4; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace lmaudit::testing
