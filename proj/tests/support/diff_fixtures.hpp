// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "lmaudit/audit.hpp"
#include "lmaudit/spectral.hpp"
#include "lmaudit/tensor_io.hpp"
#include "lmaudit/vocab.hpp"

namespace lmaudit::testing {

inline Vocabulary numbered_vocabulary(std::size_t n) {
    std::vector<std::string> entries;
    for (std::size_t i = 0; i < n; ++i) entries.push_back("t" + std::to_string(i));
    return Vocabulary(std::move(entries));
}

inline AuditConfig small_config(std::size_t n, std::size_t k) {
    AuditConfig c;
    c.n_vectors = n;
    c.k_tokens = k;
    c.spectrum_m = n;
    return c;
}

/// Rebuilds W from its own factors with s[0] and s[1] exchanged, so the two
/// leading left singular vectors trade places in the new matrix's SVD.
inline WeightMatrix swap_leading_directions(const WeightMatrix& w) {
    const auto f = compute_svd(w);
    std::vector<double> s = f.s;
    std::swap(s[0], s[1]);
    std::vector<float> out(w.rows * w.cols);
    for (std::size_t r = 0; r < w.rows; ++r) {
        for (std::size_t c = 0; c < w.cols; ++c) {
            double x = 0.0;
            for (std::size_t k = 0; k < w.cols; ++k) {
                x += static_cast<double>(f.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k))) * s[k] *
                     f.vt(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
            }
            out[r * w.cols + c] = static_cast<float>(x);
        }
    }
    return make_weight_matrix(w.rows, w.cols, std::move(out), w.model_label + "_swapped");
}

} // namespace lmaudit::testing
